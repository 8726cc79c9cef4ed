"""Independent reference implementations used to cross-check the library.

Graphs here are plain dicts {(src, dst): strict?}; nothing is shared with
sizechange.scgraph beyond the arc triples used to convert back and forth.
"""

from __future__ import annotations

from itertools import product


def to_dict(g) -> dict:
    return {(a.src, a.dst): a.change.name == "STRICT" for a in g.arcs}


def compose_paths(arity: int, gs: list[dict]) -> dict:
    """Compose a chain of graphs by enumerating every path through it."""
    out: dict = {}
    for start in range(arity):
        for mids in product(range(arity), repeat=len(gs)):
            path = (start,) + mids
            strict = False
            ok = True
            for k, g in enumerate(gs):
                edge = g.get((path[k], path[k + 1]))
                if edge is None:
                    ok = False
                    break
                strict = strict or edge
            if ok:
                key = (start, path[-1])
                out[key] = out.get(key, False) or strict
    return out


def compose_layers(arity: int, gs: list[dict]) -> dict:
    """Compose a chain by forward reachability over (node, saw-strict) states;
    agrees with :func:`compose_paths` but is linear in the chain length."""
    out = {}
    for start in range(arity):
        frontier = {(start, False)}
        for g in gs:
            frontier = {(d, seen or strict) for (n, seen) in frontier
                        for (s, d), strict in g.items() if s == n}
        for node, seen in frontier:
            out[(start, node)] = out.get((start, node), False) or seen
    return out


def descending(arity: int, g: dict) -> bool:
    idem = compose_layers(arity, [g, g]) == g
    return not idem or any(g.get((i, i)) for i in range(arity))


def prog_oracle(arity: int, seq: list[dict]) -> bool:
    """Every contiguous run of the sequence composes to a descending graph."""
    n = len(seq)
    for i in range(n):
        for j in range(i + 1, n + 1):
            if not descending(arity, compose_layers(arity, seq[i:j])):
                return False
    return True


def rejection_prefix(arity: int, seq: list[dict]):
    for k in range(1, len(seq) + 1):
        if not prog_oracle(arity, seq[:k]):
            return k
    return None


def magnitude_less(new, old) -> bool:
    """The order on plain integers: strictly smaller magnitude."""
    return abs(new) < abs(old)
