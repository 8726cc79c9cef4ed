"""Size-change graphs: construction, composition, descent checks, the
incremental monitor, and the closure-based decision procedure.

Graph sequences are always given oldest first, and composition reads left to
right in call order: ``compose(g_first, g_then)``.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Iterable, NamedTuple, Optional, Sequence

from .core import DEFAULT_ORDER, EQUAL, LESS, RuntimeFault, precedes, value_eq


class Change(enum.IntEnum):
    NONASC = 1
    STRICT = 2

    @property
    def symbol(self) -> str:
        return "<" if self is Change.STRICT else "<="


STRICT = Change.STRICT
NONASC = Change.NONASC


class Arc(NamedTuple):
    src: int
    change: Change
    dst: int

    def __str__(self):
        return f"{self.src} {self.change.symbol} {self.dst}"


class ArityMismatch(RuntimeFault):
    def __init__(self, message: str):
        super().__init__("arity", message)


class SCGraph:
    """A size-change graph over ``arity`` parameters.

    At most one arc is kept per (src, dst) pair; a strict arc subsumes a
    non-ascending one, so two graphs are equal iff their arc sets are.
    Internally a graph is the row-major tuple ``cells`` of length arity²
    holding 0 (no arc), 1 (non-ascending) or 2 (strict).  Graphs are
    interned, so equal graphs are usually the same object.
    """

    __slots__ = ("arity", "cells", "_hash", "_sortkey", "_arcs", "__weakref__")

    def __new__(cls, arity: int, arcs: Iterable = ()):
        cells = [0] * (arity * arity)
        for a in arcs:
            src, ch, dst = a
            ch = Change(ch)
            if not (0 <= src < arity and 0 <= dst < arity):
                raise ValueError(f"arc {src}->{dst} outside arity {arity}")
            k = src * arity + dst
            if ch > cells[k]:
                cells[k] = int(ch)
        return _make(arity, tuple(cells))

    @property
    def arcs(self) -> frozenset:
        a = self._arcs
        if a is None:
            n = self.arity
            a = self._arcs = frozenset(
                Arc(k // n, Change(c), k % n) for k, c in enumerate(self.cells) if c
            )
        return a

    def change(self, src: int, dst: int) -> Optional[Change]:
        c = self.cells[src * self.arity + dst]
        return Change(c) if c else None

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, SCGraph):
            return NotImplemented
        return self.arity == other.arity and self.cells == other.cells

    def __hash__(self):
        return self._hash

    def __len__(self):
        return sum(1 for c in self.cells if c)

    def __reduce__(self):
        return (_make, (self.arity, self.cells))

    def sort_key(self):
        k = self._sortkey
        if k is None:
            k = self._sortkey = (self.arity, tuple(sorted((a.src, a.dst, -a.change) for a in self.arcs)))
        return k

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def sorted_arcs(self) -> list[Arc]:
        return sorted(self.arcs, key=lambda a: (a.src, a.dst, -a.change))

    def to_text(self) -> str:
        return f"arity {self.arity}; " + ", ".join(str(a) for a in self.sorted_arcs())

    def to_json(self) -> dict:
        return {"arity": self.arity, "arcs": [[a.src, a.change.symbol, a.dst] for a in self.sorted_arcs()]}

    def pretty(self, names: Optional[Sequence[str]] = None) -> str:
        def nm(i):
            return names[i] if names else str(i)
        parts = [f"({nm(a.src)} {'↓' if a.change is STRICT else '↓̄'} {nm(a.dst)})" for a in self.sorted_arcs()]
        return "{" + ", ".join(parts) + "}"

    def __repr__(self):
        return f"SCGraph({self.to_text()})"


_INTERN: dict = {}


def _make(arity: int, cells: tuple) -> SCGraph:
    key = (arity, cells)
    g = _INTERN.get(key)
    if g is None:
        g = object.__new__(SCGraph)
        g.arity = arity
        g.cells = cells
        g._hash = hash(key)
        g._sortkey = None
        g._arcs = None
        if len(_INTERN) < 1 << 20:
            _INTERN[key] = g
    return g


def graph(arity: int, *arcs) -> SCGraph:
    """Shorthand: ``graph(2, (0, '<', 0), (1, '<=', 1))``."""
    conv = []
    for s, c, d in arcs:
        if isinstance(c, str):
            c = STRICT if c in ("<", "↓", "strict") else NONASC
        conv.append((s, c, d))
    return SCGraph(arity, conv)


_ARC_RE = re.compile(r"^\s*(\d+)\s*(<=|<)\s*(\d+)\s*$")


def parse_text(text: str) -> SCGraph:
    """Parse the ``arity k; i R j, ...`` line form."""
    head, _, rest = text.partition(";")
    m = re.match(r"^\s*arity\s+(\d+)\s*$", head)
    if not m:
        raise ValueError(f"bad graph header: {head!r}")
    arcs = []
    for part in filter(None, (p.strip() for p in rest.split(","))):
        am = _ARC_RE.match(part)
        if not am:
            raise ValueError(f"bad arc: {part!r}")
        arcs.append((int(am.group(1)), STRICT if am.group(2) == "<" else NONASC, int(am.group(3))))
    return SCGraph(int(m.group(1)), arcs)


def from_json(obj: Any) -> SCGraph:
    if isinstance(obj, str):
        obj = json.loads(obj)
    return SCGraph(obj["arity"], [(s, STRICT if c == "<" else NONASC, d) for s, c, d in obj["arcs"]])


def dump_graphs_text(gs: Iterable[SCGraph]) -> str:
    return "\n".join(g.to_text() for g in sorted(gs)) + "\n"


def load_graphs_text(text: str) -> list[SCGraph]:
    return [parse_text(line) for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]


# ---------------------------------------------------------------------------
#  Algebra
# ---------------------------------------------------------------------------


def build_graph(old: Sequence, new: Sequence, cmp: Optional[Callable] = None) -> SCGraph:
    """Graph of the transition from argument list ``old`` to ``new``.

    ``cmp(new_j, old_i)`` returns LESS, EQUAL or None.
    """
    n = len(old)
    if len(new) != n:
        raise ArityMismatch(f"graph between {n} and {len(new)} arguments")
    if cmp is None or cmp == DEFAULT_ORDER.compare:
        return _build_default(old, new, n)
    cells = []
    for vi in old:
        for vj in new:
            r = cmp(vj, vi)
            cells.append(2 if r is LESS else 1 if r is EQUAL else 0)
    return _make(n, tuple(cells))


def _build_default(old, new, n) -> SCGraph:
    cells = []
    for vi in old:
        if type(vi) is int:
            mag = vi if vi >= 0 else -vi
            for vj in new:
                if type(vj) is int:
                    m = vj if vj >= 0 else -vj
                    cells.append(2 if m < mag else 1 if vj == vi else 0)
                else:
                    cells.append(0)
        else:
            for vj in new:
                cells.append(2 if precedes(vj, vi) else 1 if value_eq(vj, vi) else 0)
    return _make(n, tuple(cells))


@lru_cache(maxsize=1 << 16)
def compose(g0: SCGraph, g1: SCGraph) -> SCGraph:
    """Sequential composition: ``g0`` then ``g1``.

    (i, ↓, k) when some i→j→k path has a strict arc; (i, ↓̄, k) when only
    all-non-ascending paths exist.
    """
    n = g0.arity
    if n != g1.arity:
        raise ArityMismatch(f"compose arity {n} with {g1.arity}")
    a = g0.cells
    b = g1.cells
    out = [0] * (n * n)
    for i in range(n):
        row = i * n
        for j in range(n):
            c0 = a[row + j]
            if not c0:
                continue
            col = j * n
            for k in range(n):
                c1 = b[col + k]
                if c1:
                    c = 2 if (c0 == 2 or c1 == 2) else 1
                    if c > out[row + k]:
                        out[row + k] = c
    return _make(n, tuple(out))


def is_idempotent(g: SCGraph) -> bool:
    return compose(g, g) == g


@lru_cache(maxsize=1 << 16)
def is_descending(g: SCGraph) -> bool:
    """False exactly when ``g`` is idempotent and has no strict self-arc."""
    n = g.arity
    cells = g.cells
    if any(cells[i * n + i] == 2 for i in range(n)):
        return True
    return compose(g, g) != g


def compose_all(seq: Sequence[SCGraph]) -> SCGraph:
    it = iter(seq)
    acc = next(it)
    for g in it:
        acc = compose(acc, g)
    return acc


def prog(seq: Sequence[SCGraph]) -> bool:
    """Reference check: every contiguous composition of the sequence
    (oldest first) is descending.  Quadratic; use the monitor in hot paths."""
    n = len(seq)
    for i in range(n):
        acc = None
        for j in range(i, n):
            acc = seq[j] if acc is None else compose(acc, seq[j])
            if not is_descending(acc):
                return False
    return True


def first_violation(seq: Sequence[SCGraph]) -> Optional[int]:
    """Length of the shortest prefix on which ``prog`` fails, or None."""
    for k in range(1, len(seq) + 1):
        last = None
        for i in range(k - 1, -1, -1):
            last = seq[i] if last is None else compose(seq[i], last)
            if not is_descending(last):
                return k
    return None


# ---------------------------------------------------------------------------
#  Incremental monitor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonitorState:
    """Holds every suffix composition ``g_i ; ... ; g_n`` of the sequence
    seen so far (as a set; duplicates collapse)."""

    arity: int
    n: int = 0
    end_set: frozenset = frozenset()


@dataclass(frozen=True)
class ViolationReport:
    graph: SCGraph
    closure: Any = None  # ClosureKey, or a label string
    call_index: int = 0

    def to_json(self) -> dict:
        closure = self.closure
        label = getattr(closure, "label", closure)
        return {"graph": self.graph.to_json(), "closure": label, "call_index": self.call_index}


def monitor_init(arity: int) -> MonitorState:
    return MonitorState(arity)


class MonitorStats:
    """Counts compositions/descent checks done by :func:`monitor_step`."""

    __slots__ = ("compositions", "desc_checks")

    def __init__(self):
        self.compositions = 0
        self.desc_checks = 0


@lru_cache(maxsize=1 << 16)
def _advance(end_set: frozenset, g: SCGraph):
    ends = {compose(s, g) for s in end_set}
    ends.add(g)
    bad = [e for e in ends if not is_descending(e)]
    if bad:
        return None, min(bad), len(ends)
    ends = frozenset(ends)
    return (end_set if ends == end_set else ends), None, len(ends)


def monitor_step(st: MonitorState, g: SCGraph, stats: Optional[MonitorStats] = None):
    """Extend the monitored sequence with ``g``.

    Returns the new state, or a :class:`ViolationReport` naming the first
    (in canonical order) non-descending composition that ends with ``g``.
    """
    if g.arity != st.arity:
        raise ArityMismatch(f"monitor of arity {st.arity} got graph of arity {g.arity}")
    end_set, bad, checked = _advance(st.end_set, g)
    if stats is not None:
        stats.compositions += len(st.end_set)
        stats.desc_checks += checked
    if bad is not None:
        return ViolationReport(bad, None, st.n + 1)
    return MonitorState(st.arity, st.n + 1, end_set)


def monitor_fold(seq: Sequence[SCGraph], arity: Optional[int] = None):
    """Fold ``monitor_step`` over a sequence; returns (state or report, steps taken)."""
    if arity is None:
        arity = seq[0].arity if seq else 0
    st = monitor_init(arity)
    for k, g in enumerate(seq, 1):
        st = monitor_step(st, g)
        if isinstance(st, ViolationReport):
            return st, k
    return st, len(seq)


# ---------------------------------------------------------------------------
#  Static closure check
# ---------------------------------------------------------------------------


def close_under_composition(gs: Iterable[SCGraph]) -> frozenset:
    closed = set(gs)
    arities = {g.arity for g in closed}
    if len(arities) > 1:
        raise ArityMismatch(f"mixed arities {sorted(arities)}")
    work = list(closed)
    base = list(closed)
    while work:
        g = work.pop()
        # composing with the generators on both sides reaches every product
        for h in base:
            for c in (compose(g, h), compose(h, g)):
                if c not in closed:
                    closed.add(c)
                    work.append(c)
    return frozenset(closed)


def scp_holds(gs: Iterable[SCGraph]):
    """True when the closure of ``gs`` has no idempotent graph without a
    strict self-arc; otherwise the first such graph in canonical order."""
    closed = close_under_composition(gs)
    for g in sorted(closed):
        if not is_descending(g):
            return g
    return True
