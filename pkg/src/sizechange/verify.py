"""Static size-change verification by symbolic execution.

Functions are run on symbolic arguments.  Branches on symbolic data fork the
path and record the branch fact.  Calls to a function that is not already
active are inlined.  A call to an active function (by lambda label) is a
loop: it yields a call site whose size-change graph relates the active
call's arguments to the new ones, with every arc justified by the path
condition.  The callee is then analysed separately in an abstract calling
context (argument shapes), and the call returns a fresh value described by
that context's result summary.  Summaries are iterated to a fixpoint.  The
collected graphs are closed under composition and checked for the
size-change principle.
"""

from __future__ import annotations

import enum
import itertools
import sys
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .core import (
    NIL, App, Clo, If0, Lam, Lit, NilType, Pair, Prim, PrimRef, TermC, TermClo, Val, Var,
    precedes, value_eq, EQUAL, LESS,
)
from .primitives import PRIMITIVES
from .reader import Program
from .scgraph import SCGraph, build_graph, close_under_composition, is_descending


# ---------------------------------------------------------------------------
#  Symbolic values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """An unknown value.  ``sort`` is "int", "list" or "any"."""

    id: int
    sort: str = "any"

    def __repr__(self):
        return f"x{self.id}"


@dataclass(frozen=True)
class Op:
    """An uninterpreted primitive application, e.g. ``(car x3)``."""

    name: str
    args: tuple

    def __repr__(self):
        return f"({self.name} {' '.join(map(repr, self.args))})"


@dataclass(frozen=True)
class Lin:
    """``base + offset`` for a symbolic integer ``base`` (offset ≠ 0)."""

    base: Any
    offset: int

    def __repr__(self):
        sign = "+" if self.offset > 0 else "-"
        return f"({sign} {self.base!r} {abs(self.offset)})"


@dataclass(frozen=True)
class Opaque:
    """A value (usually a closure) the verifier does not track."""

    what: str = "closure"

    def __repr__(self):
        return f"#<opaque:{self.what}>"


SymValue = Union[Atom, Op, Lin, Opaque, int, Pair, NilType, Clo, TermClo, Prim]


def _is_base(v) -> bool:
    return type(v) is Atom or type(v) is Op


def _linear(v):
    """(base, offset) for symbolic integers, (None, c) for literals, else None."""
    t = type(v)
    if t is int:
        return None, v
    if t is Lin:
        return v.base, v.offset
    if t is Atom or t is Op:
        return v, 0
    return None


def _mk_lin(base, offset):
    if base is None:
        return offset
    return base if offset == 0 else Lin(base, offset)


def _has_symbolic(v) -> bool:
    stack = [v]
    while stack:
        x = stack.pop()
        t = type(x)
        if t in (Atom, Op, Lin, Opaque):
            return True
        if t is Pair:
            stack.append(x.car)
            stack.append(x.cdr)
        elif t is Clo:
            stack.extend(x.env.values())
        elif t is TermClo:
            stack.extend(x.inner.env.values())
    return False


# ---------------------------------------------------------------------------
#  Path conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Info:
    """What the path condition says about one symbolic base."""

    lo: Optional[int] = None
    hi: Optional[int] = None
    ne: frozenset = frozenset()
    tag: Optional[str] = None  # "int", "pair", "nil", "list"
    nottags: frozenset = frozenset()  # subset of {"pair", "nil"}


class Infeasible(Exception):
    pass


def _normalize(info: Info) -> Info:
    lo, hi, ne = info.lo, info.hi, info.ne
    if lo is not None:
        while lo in ne:
            lo += 1
    if hi is not None:
        while hi in ne:
            hi -= 1
    if lo is not None and hi is not None and lo > hi:
        raise Infeasible()
    tag, nt = info.tag, info.nottags
    if tag == "list":
        if "pair" in nt and "nil" in nt:
            raise Infeasible()
        if "pair" in nt:
            tag = "nil"
        elif "nil" in nt:
            tag = "pair"
    if tag in ("pair", "nil") and tag in nt:
        raise Infeasible()
    if tag not in (None, "int") and (lo is not None or hi is not None):
        raise Infeasible()
    if lo is not None or hi is not None:
        tag = "int" if tag is None else tag
    if tag is not None and tag != "int" and ne:
        ne = frozenset()
    if lo == info.lo and hi == info.hi and tag == info.tag and ne == info.ne:
        return info
    return Info(lo, hi, ne, tag, nt)


_TAG_MEET = {
    (None, None): None,
    ("int", "int"): "int",
    ("pair", "pair"): "pair",
    ("nil", "nil"): "nil",
    ("list", "list"): "list",
    ("list", "pair"): "pair",
    ("list", "nil"): "nil",
}


def _meet_tag(a, b):
    if a is None:
        return b
    if b is None:
        return a
    key = (a, b) if (a, b) in _TAG_MEET else (b, a)
    if key not in _TAG_MEET:
        raise Infeasible()
    return _TAG_MEET[key]


class PathCond:
    """A satisfiable-as-far-as-we-know conjunction of facts.

    Facts are kept per symbolic base: an integer interval with excluded
    points, and a sort tag (int, pair, nil or list).  Adding a fact that
    contradicts what is known raises :class:`Infeasible`.
    """

    __slots__ = ("facts",)

    def __init__(self, facts: Optional[dict] = None):
        self.facts = facts or {}

    def info(self, base) -> Info:
        i = self.facts.get(base)
        if i is not None:
            return i
        if type(base) is Atom and base.sort in ("int", "list"):
            return Info(tag=base.sort)
        return Info()

    def _with(self, base, info: Info) -> "PathCond":
        info = _normalize(info)
        if self.facts.get(base) == info:
            return self
        facts = dict(self.facts)
        facts[base] = info
        return PathCond(facts)

    # -- fact constructors (all raise Infeasible on contradiction) ----------

    def bound(self, base, lo=None, hi=None) -> "PathCond":
        i = self.info(base)
        nlo = lo if i.lo is None else (i.lo if lo is None else max(i.lo, lo))
        nhi = hi if i.hi is None else (i.hi if hi is None else min(i.hi, hi))
        return self._with(base, Info(nlo, nhi, i.ne, _meet_tag(i.tag, "int"), i.nottags))

    def exclude(self, base, c: int) -> "PathCond":
        i = self.info(base)
        if (i.lo is not None and c < i.lo) or (i.hi is not None and c > i.hi):
            return self
        if i.tag not in (None, "int"):
            return self
        return self._with(base, Info(i.lo, i.hi, i.ne | {c}, i.tag, i.nottags))

    def tagged(self, base, tag: str) -> "PathCond":
        i = self.info(base)
        return self._with(base, Info(i.lo, i.hi, i.ne, _meet_tag(i.tag, tag), i.nottags))

    def not_tagged(self, base, tag: str) -> "PathCond":
        i = self.info(base)
        if i.tag == tag:
            raise Infeasible()
        return self._with(base, Info(i.lo, i.hi, i.ne, i.tag, i.nottags | {tag}))

    # -- queries --------------------------------------------------------------

    def interval(self, v):
        """Integer bounds of ``v`` as (lo, hi), None meaning unbounded."""
        lin = _linear(v)
        if lin is None:
            return None
        base, off = lin
        if base is None:
            return off, off
        i = self.info(base)
        lo = None if i.lo is None else i.lo + off
        hi = None if i.hi is None else i.hi + off
        return lo, hi

    def is_int(self, v) -> bool:
        lin = _linear(v)
        if lin is None:
            return False
        base, _ = lin
        if base is None or type(v) is Lin:
            return True
        return self.info(base).tag == "int"

    def propositions(self) -> list[str]:
        """The facts as readable propositions, sorted."""
        out = []
        for base, i in self.facts.items():
            b = repr(base)
            if i.lo is not None and i.lo == i.hi:
                out.append(f"(= {b} {i.lo})")
                continue
            if i.lo is not None:
                out.append(f"(>= {b} {i.lo})")
            if i.hi is not None:
                out.append(f"(<= {b} {i.hi})")
            out.extend(f"(!= {b} {c})" for c in sorted(i.ne))
            if i.tag in ("pair", "nil", "list"):
                out.append(f"({i.tag} {b})")
            out.extend(f"(not-{t} {b})" for t in sorted(i.nottags))
        return sorted(out)

    def __repr__(self):
        return "{" + ", ".join(self.propositions()) + "}"


def pathcond(*props) -> PathCond:
    """Build a path condition from tuples such as ``(">=", x, 0)``,
    ``("!=", x, 0)``, ``("=", x, 0)``, ``("pair", l)`` or ``("nil", l)``.
    Raises :class:`Infeasible` when the facts contradict each other."""
    phi = PathCond()
    for p in props:
        phi = _assert(phi, p)
    return phi


def _assert(phi: PathCond, prop) -> PathCond:
    kind = prop[0]
    if kind in ("pair", "nil", "list", "int"):
        base = prop[1]
        if not _is_base(base):
            raise ValueError(f"{kind} fact needs a symbolic base, got {base!r}")
        return phi.tagged(base, kind)
    if kind in ("not-pair", "not-nil"):
        return phi.not_tagged(prop[1], kind[4:])
    s, c = prop[1], prop[2]
    lin = _linear(s)
    if lin is None or lin[0] is None:
        raise ValueError(f"numeric fact needs a symbolic integer, got {s!r}")
    base, off = lin
    if kind == "=":
        return phi.bound(base, c - off, c - off)
    if kind in ("!=", "≠"):
        return phi.bound(base).exclude(base, c - off)
    if kind in (">=", "≥"):
        return phi.bound(base, lo=c - off)
    if kind in ("<=", "≤"):
        return phi.bound(base, hi=c - off)
    if kind == ">":
        return phi.bound(base, lo=c - off + 1)
    if kind == "<":
        return phi.bound(base, hi=c - off - 1)
    raise ValueError(f"unknown proposition {prop!r}")


# ---------------------------------------------------------------------------
#  Order entailment
# ---------------------------------------------------------------------------


class Entail(enum.Enum):
    STRICT = "strict"
    NONASCEND = "nonascend"
    UNKNOWN = "unknown"


def _min_abs(lo, hi):
    if lo is not None and lo > 0:
        return lo
    if hi is not None and hi < 0:
        return -hi
    return 0


def _max_abs(lo, hi):
    if lo is None or hi is None:
        return None
    return max(abs(lo), abs(hi))


def _car_cdr_root(v):
    """If ``v`` is a non-empty car/cdr chain, the value at its root."""
    seen = False
    while type(v) is Op and v.name in ("car", "cdr") and len(v.args) == 1:
        v = v.args[0]
        seen = True
    return v if seen else None


def _inside(newer, older) -> bool:
    """``newer`` is syntactically a field reachable inside the pair ``older``."""
    stack = [older.car, older.cdr]
    while stack:
        d = stack.pop()
        if d == newer:
            return True
        if type(d) is Pair:
            stack.append(d.car)
            stack.append(d.cdr)
    return False


def entails_order(phi: PathCond, older, newer) -> Entail:
    """How ``newer`` relates to ``older`` in every instantiation allowed by
    ``phi``: STRICT when newer ≺ older is forced, NONASCEND when newer = older
    is forced, UNKNOWN otherwise."""
    if older == newer:
        return Entail.NONASCEND
    if not _has_symbolic(older) and not _has_symbolic(newer):
        if precedes(newer, older):
            return Entail.STRICT
        if value_eq(newer, older):
            return Entail.NONASCEND
        return Entail.UNKNOWN
    # structural: car/cdr chains and fields of known pairs
    root = _car_cdr_root(newer)
    if root is not None and root == older:
        return Entail.STRICT
    if type(older) is Pair and _inside(newer, older):
        return Entail.STRICT
    if newer is NIL and _is_base(older) and phi.info(older).tag == "pair":
        return Entail.STRICT
    # numeric: linear terms over intervals
    lo_new = _linear(newer)
    lo_old = _linear(older)
    if lo_new is None or lo_old is None:
        return Entail.UNKNOWN
    if not (phi.is_int(newer) and phi.is_int(older)):
        return Entail.UNKNOWN
    (bn, on), (bo, oo) = lo_new, lo_old
    if bn is not None and bn == bo:
        d = on - oo
        lo, hi = phi.interval(older)
        # |x + d| < |x|  iff  2x + d > 0 (d < 0)  or  2x + d < 0 (d > 0)
        if d < 0 and lo is not None and 2 * lo + d > 0:
            return Entail.STRICT
        if d > 0 and hi is not None and 2 * hi + d < 0:
            return Entail.STRICT
        return Entail.UNKNOWN
    nlo, nhi = phi.interval(newer)
    olo, ohi = phi.interval(older)
    mx = _max_abs(nlo, nhi)
    if mx is not None and mx < _min_abs(olo, ohi):
        return Entail.STRICT
    return Entail.UNKNOWN


def _comparator(phi: PathCond):
    def cmp(new, old):
        r = entails_order(phi, old, new)
        if r is Entail.STRICT:
            return LESS
        if r is Entail.NONASCEND:
            return EQUAL
        return None
    return cmp


# ---------------------------------------------------------------------------
#  Shapes (abstract argument classes for calling contexts)
# ---------------------------------------------------------------------------

BOTTOM = "bottom"
NZNAT = "nonzero-nat"
NAT = "nat"
INT = "int"
NIL_S = "nil"
PAIR = "pair"
LIST = "list"
OPAQUE = "opaque"
ANY = "any"

_SHAPE_NAMES = {
    "natural": NAT, "nat": NAT, "nonzero-natural": NZNAT, "positive": NZNAT,
    "integer": INT, "int": INT, "list": LIST, "pair": PAIR, "any": ANY,
}

_UP = {NZNAT: NAT, NAT: INT, INT: ANY, NIL_S: LIST, PAIR: LIST, LIST: ANY, OPAQUE: ANY}


def _chain(s):
    out = [s]
    while s in _UP:
        s = _UP[s]
        out.append(s)
    return out


def join_shape(a, b):
    if a == b:
        return a
    if a == BOTTOM:
        return b
    if b == BOTTOM:
        return a
    if isinstance(a, tuple):
        a = OPAQUE
    if isinstance(b, tuple):
        b = OPAQUE
    if a == b:
        return a
    ca = _chain(a)
    for s in _chain(b):
        if s in ca:
            return s
    return ANY


def shape_of(v, phi: PathCond):
    t = type(v)
    if t is int:
        return NZNAT if v > 0 else NAT if v == 0 else INT
    if t is NilType:
        return NIL_S
    if t is Pair:
        return PAIR
    if t in (Clo, TermClo):
        inner = v.inner if t is TermClo else v
        if not inner.lam.free:
            return ("closure", v)
        return OPAQUE
    if t is Prim:
        return ("closure", v)
    if t is Opaque:
        return OPAQUE
    if t is Lin or t is Atom or t is Op:
        if phi.is_int(v):
            lo, _ = phi.interval(v)
            if lo is not None and lo >= 1:
                return NZNAT
            if lo is not None and lo >= 0:
                return NAT
            return INT
        tag = phi.info(v).tag
        if tag == "pair":
            return PAIR
        if tag == "nil":
            return NIL_S
        if tag == "list":
            return LIST
        return ANY
    return ANY


def _shape_str(s) -> str:
    if isinstance(s, tuple):
        return f"closure:{getattr(s[1], 'label', getattr(s[1], 'name', '?'))}"
    return s


# ---------------------------------------------------------------------------
#  Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CallSite:
    target: str
    args: tuple
    phi: PathCond
    graph: SCGraph
    caller_args: tuple = ()

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "args": [repr(a) for a in self.args],
            "caller_args": [repr(a) for a in self.caller_args],
            "path_condition": self.phi.propositions(),
            "graph": self.graph.to_json(),
        }


@dataclass(frozen=True)
class Verified:
    graphs: dict  # label -> frozenset of collected graphs
    closure: dict  # label -> graphs closed under composition
    result = "verified"

    def graph_set(self, label: Optional[str] = None) -> frozenset:
        if label is not None:
            return self.graphs.get(label, frozenset())
        return frozenset().union(*self.graphs.values()) if self.graphs else frozenset()


@dataclass(frozen=True)
class Refuted:
    witness: SCGraph
    site: CallSite
    label: str
    graphs: dict
    result = "refuted"

    def graph_set(self, label: Optional[str] = None) -> frozenset:
        if label is not None:
            return self.graphs.get(label, frozenset())
        return frozenset().union(*self.graphs.values()) if self.graphs else frozenset()


@dataclass(frozen=True)
class Unknown:
    reason: str  # "fuel" | "unsupported-feature" | "entailment-gap"
    detail: str = ""
    graphs: dict = field(default_factory=dict)
    result = "unknown"

    def graph_set(self, label: Optional[str] = None) -> frozenset:
        if label is not None:
            return self.graphs.get(label, frozenset())
        return frozenset().union(*self.graphs.values()) if self.graphs else frozenset()


VerifyResult = Union[Verified, Refuted, Unknown]


def result_to_json(res: VerifyResult) -> dict:
    graphs = []
    for label in sorted(res.graphs):
        for g in sorted(res.graphs[label]):
            d = g.to_json()
            d["closure"] = label
            graphs.append(d)
    out = {"result": res.result, "graphs": graphs, "witness": None, "reason": None}
    if isinstance(res, Refuted):
        w = res.witness.to_json()
        w["closure"] = res.label
        out["witness"] = w
        out["call_site"] = res.site.to_json()
    elif isinstance(res, Unknown):
        out["reason"] = res.reason
        if res.detail:
            out["detail"] = res.detail
    return out


# ---------------------------------------------------------------------------
#  Symbolic evaluation
# ---------------------------------------------------------------------------


class _Abort(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.reason = reason
        self.detail = detail


@dataclass
class SymResult:
    graphs: dict  # label -> set of SCGraph
    sites: dict  # label -> list of CallSite
    complete: bool
    reason: str = ""
    detail: str = ""
    contexts: int = 0
    steps: int = 0


TRUE, FALSE = 0, 1
DEFAULT_FUEL = 2
DEFAULT_BUDGET = 200_000


class _Explorer:
    def __init__(self, program: Program, globals_: dict, fuel: int, budget: int):
        self.program = program
        self.globals = globals_
        self.fuel = max(1, fuel)
        self.budget = budget
        self.steps = 0
        self.ids = itertools.count(1)
        self.summaries: dict = {}
        self.contexts_by_label: dict = {}
        self.queue: list = []
        self.changed = False
        self.graphs: dict = {}
        self.sites: dict = {}

    # -- fresh values -----------------------------------------------------

    def fresh(self, shape, phi: PathCond):
        if shape == NZNAT:
            a = Atom(next(self.ids), "int")
            return a, phi.bound(a, lo=1)
        if shape == NAT:
            a = Atom(next(self.ids), "int")
            return a, phi.bound(a, lo=0)
        if shape == INT:
            return Atom(next(self.ids), "int"), phi
        if shape == NIL_S:
            return NIL, phi
        if shape == PAIR:
            a = Atom(next(self.ids), "list")
            return a, phi.tagged(a, "pair")
        if shape == LIST:
            return Atom(next(self.ids), "list"), phi
        if shape == OPAQUE:
            return Opaque(), phi
        if isinstance(shape, tuple):
            return shape[1], phi
        return Atom(next(self.ids), "any"), phi

    # -- contexts -----------------------------------------------------------

    def request(self, label: str, env_shapes: tuple, arg_shapes: tuple):
        ctx = (label, env_shapes, arg_shapes)
        if ctx in self.summaries:
            return ctx
        known = self.contexts_by_label.setdefault(label, [])
        if len(known) >= self.fuel:
            envs = list(env_shapes)
            args = list(arg_shapes)
            for _, e, a in known:
                envs = [join_shape(x, y) for x, y in zip(envs, e)]
                args = [join_shape(x, y) for x, y in zip(args, a)]
            ctx = (label, tuple(envs), tuple(args))
            if ctx in self.summaries:
                return ctx
        known.append(ctx)
        self.summaries[ctx] = BOTTOM
        self.queue.append(ctx)
        self.changed = True
        return ctx

    def analyze(self, lam: Lam, env: dict, args: list, phi: PathCond):
        """Run ``lam``'s body as the root activation; returns the joined
        result shape."""
        stack = ((lam.label, tuple(args)),)
        local = dict(env)
        local.update(zip(lam.params, args))
        result = BOTTOM
        for v, phi2 in self.ev(lam.body, local, phi, stack):
            result = join_shape(result, shape_of(v, phi2))
        return result

    def analyze_context(self, ctx):
        label, env_shapes, arg_shapes = ctx
        lam = self.program.lambdas[label]
        phi = PathCond()
        env = {}
        for name, s in zip(lam.free, env_shapes):
            env[name], phi = self.fresh(s, phi)
        args = []
        for s in arg_shapes:
            v, phi = self.fresh(s, phi)
            args.append(v)
        return self.analyze(lam, env, args, phi)

    # -- evaluation -----------------------------------------------------------

    def tick(self):
        self.steps += 1
        if self.steps > self.budget:
            raise _Abort("fuel", f"symbolic step budget of {self.budget} exhausted")

    def lookup(self, name, env):
        if name in env:
            return env[name]
        if name in self.globals:
            return self.globals[name]
        raise _Abort("unsupported-feature", f"global {name} has no value")

    def ev(self, e, env, phi, stack):
        """All (value, path condition) outcomes of ``e``; failing paths are
        dropped."""
        self.tick()
        t = type(e)
        if t is Lit:
            return [(e.value, phi)]
        if t is Var:
            return [(self.lookup(e.name, env), phi)]
        if t is Lam:
            return [(Clo(e, {v: env[v] for v in e.free}), phi)]
        if t is PrimRef:
            return [(Prim(e.name), phi)]
        if t is If0:
            out = []
            for v, phi1 in self.ev(e.test, env, phi, stack):
                for branch, phi2 in self.branch(v, phi1):
                    out.extend(self.ev(e.then if branch else e.orelse, env, phi2, stack))
            return out
        if t is TermC:
            out = []
            for v, phi1 in self.ev(e.body, env, phi, stack):
                if type(v) is Clo:
                    v = TermClo(v, e.blame)
                out.append((v, phi1))
            return out
        if t is App:
            partial = [((), phi)]
            for part in (e.fn,) + e.args:
                nxt = []
                for vals, p in partial:
                    for v, p2 in self.ev(part, env, p, stack):
                        nxt.append((vals + (v,), p2))
                partial = nxt
                if not partial:
                    return []
            out = []
            for vals, p in partial:
                out.extend(self.apply(vals[0], list(vals[1:]), p, stack))
            return out
        raise AssertionError(f"unknown expression {e!r}")

    def branch(self, v, phi):
        """(took_then, phi) pairs for an if0 test value."""
        lin = _linear(v)
        if lin is None:
            return [(False, phi)]
        base, off = lin
        if base is None:
            return [(off == 0, phi)]
        out = []
        try:
            out.append((True, _assert(phi, ("=", v, 0))))
        except Infeasible:
            pass
        try:
            # a non-integer also takes the else branch, so only record
            # (!= v 0) when v is known to be an integer
            out.append((False, _assert(phi, ("!=", v, 0)) if phi.is_int(v) else phi))
        except Infeasible:
            pass
        return out

    def apply(self, f, args, phi, stack):
        t = type(f)
        if t is Prim:
            return self.prim(f.name, args, phi)
        if t is TermClo:
            f = f.inner
            t = Clo
        if t is not Clo:
            if t in (Atom, Opaque, Op):
                raise _Abort("unsupported-feature", f"call through an unknown value {f!r}")
            return []  # applying a number or list: run-time error path
        lam = f.lam
        if len(args) != len(lam.params):
            return []
        for label, old_args in reversed(stack):
            if label == lam.label:
                return self.loop_call(f, args, old_args, phi)
        local = dict(f.env)
        local.update(zip(lam.params, args))
        return self.ev(lam.body, local, phi, stack + ((lam.label, tuple(args)),))

    def loop_call(self, f: Clo, args, old_args, phi):
        lam = f.lam
        g = build_graph(old_args, args, _comparator(phi))
        label = lam.label
        self.graphs.setdefault(label, set()).add(g)
        self.sites.setdefault(label, []).append(CallSite(label, tuple(args), phi, g, old_args))
        env_shapes = tuple(shape_of(f.env[v], phi) for v in lam.free)
        arg_shapes = tuple(shape_of(a, phi) for a in args)
        ctx = self.request(label, env_shapes, arg_shapes)
        summary = self.summaries[ctx]
        if summary == BOTTOM:
            return []
        v, phi2 = self.fresh(summary, phi)
        return [(v, phi2)]

    # -- primitives -----------------------------------------------------------

    def prim(self, name, args, phi):
        arity, fn = PRIMITIVES[name]
        if len(args) != arity:
            return []
        if not any(_has_symbolic(a) for a in args):
            try:
                return [(fn(*args), phi)]
            except Exception:
                return []
        handler = _SYM_PRIMS.get(name)
        if handler is None:
            return [(Atom(next(self.ids), "any"), phi)]
        return handler(self, args, phi)

    def need_int(self, v, phi):
        """phi extended with "v is an integer", or None when impossible."""
        lin = _linear(v)
        if lin is None:
            return None
        base, _ = lin
        if base is None:
            return phi
        try:
            return phi.tagged(base, "int")
        except Infeasible:
            return None

    def arith(self, name, args, phi):
        a, b = args
        phi = self.need_int(a, phi)
        phi = phi and self.need_int(b, phi)
        if phi is None:
            return []
        (ba, oa), (bb, ob) = _linear(a), _linear(b)
        if name == "+":
            if ba is None or bb is None:
                return [(_mk_lin(ba if ba is not None else bb, oa + ob), phi)]
        elif name == "-":
            if bb is None:
                return [(_mk_lin(ba, oa - ob), phi)]
            if ba == bb:
                return [(oa - ob, phi)]
        fresh = Op(name, (a, b))
        return [(fresh, phi.tagged(fresh, "int"))]

    def compare(self, name, args, phi):
        a, b = args
        phi = self.need_int(a, phi)
        phi = phi and self.need_int(b, phi)
        if phi is None:
            return []
        if name == ">":
            name, a, b = "<", b, a
        elif name == ">=":
            name, a, b = "<=", b, a
        (ba, oa), (bb, ob) = _linear(a), _linear(b)
        if ba == bb:
            d = oa - ob
            res = {"=": d == 0, "<": d < 0, "<=": d <= 0}[name]
            return [(TRUE if res else FALSE, phi)]
        if ba is not None and bb is not None:
            return [(TRUE, phi), (FALSE, phi)]
        # exactly one side symbolic: turn into an interval fact
        if ba is not None:
            base, c = ba, ob - oa  # base (op) c
            facts = {
                "=": (("=", base, c), ("!=", base, c)),
                "<": (("<", base, c), (">=", base, c)),
                "<=": (("<=", base, c), (">", base, c)),
            }[name]
        else:
            base, c = bb, oa - ob  # c (op) base
            facts = {
                "=": (("=", base, c), ("!=", base, c)),
                "<": ((">", base, c), ("<=", base, c)),
                "<=": ((">=", base, c), ("<", base, c)),
            }[name]
        out = []
        for val, prop in ((TRUE, facts[0]), (FALSE, facts[1])):
            try:
                out.append((val, _assert(phi, prop)))
            except Infeasible:
                pass
        return out

    def zero(self, args, phi):
        return self.compare("=", [args[0], 0], phi)

    def not_(self, args, phi):
        (v,) = args
        if phi.is_int(v):
            # (not v) is true exactly when v is a non-zero integer
            return [(FALSE if r == TRUE else TRUE, p) for r, p in self.compare("=", [v, 0], phi)]
        return [(TRUE, phi), (FALSE, phi)]

    def field(self, name, args, phi):
        (v,) = args
        t = type(v)
        if t is Pair:
            return [(v.car if name in ("car", "first") else v.cdr, phi)]
        if not _is_base(v):
            return []
        try:
            phi = phi.tagged(v, "pair")
        except Infeasible:
            return []
        return [(Op("car" if name in ("car", "first") else "cdr", (v,)), phi)]

    def test_tag(self, tag, args, phi):
        (v,) = args
        t = type(v)
        if t in (Pair, NilType):
            actual = "pair" if t is Pair else "nil"
            return [(TRUE if actual == tag else FALSE, phi)]
        if not _is_base(v):
            return [(FALSE, phi)]
        out = []
        try:
            out.append((TRUE, phi.tagged(v, tag)))
        except Infeasible:
            pass
        try:
            out.append((FALSE, phi.not_tagged(v, tag)))
        except Infeasible:
            pass
        return out

    def cons(self, args, phi):
        return [(Pair(args[0], args[1]), phi)]

    def equal(self, args, phi):
        a, b = args
        if a == b:
            return [(TRUE, phi)]
        if _linear(a) is not None and _linear(b) is not None:
            return self.compare("=", args, phi)
        return [(TRUE, phi), (FALSE, phi)]


_SYM_PRIMS = {
    "+": lambda x, a, p: x.arith("+", a, p),
    "-": lambda x, a, p: x.arith("-", a, p),
    "*": lambda x, a, p: x.arith("*", a, p),
    "quotient": lambda x, a, p: x.arith("quotient", a, p),
    "remainder": lambda x, a, p: x.arith("remainder", a, p),
    "=": lambda x, a, p: x.compare("=", a, p),
    "char=?": lambda x, a, p: x.compare("=", a, p),
    "<": lambda x, a, p: x.compare("<", a, p),
    ">": lambda x, a, p: x.compare(">", a, p),
    "<=": lambda x, a, p: x.compare("<=", a, p),
    ">=": lambda x, a, p: x.compare(">=", a, p),
    "zero?": lambda x, a, p: x.zero(a, p),
    "not": lambda x, a, p: x.not_(a, p),
    "car": lambda x, a, p: x.field("car", a, p),
    "first": lambda x, a, p: x.field("car", a, p),
    "cdr": lambda x, a, p: x.field("cdr", a, p),
    "rest": lambda x, a, p: x.field("cdr", a, p),
    "empty?": lambda x, a, p: x.test_tag("nil", a, p),
    "null?": lambda x, a, p: x.test_tag("nil", a, p),
    "cons?": lambda x, a, p: x.test_tag("pair", a, p),
    "pair?": lambda x, a, p: x.test_tag("pair", a, p),
    "cons": lambda x, a, p: x.cons(a, p),
    "equal?": lambda x, a, p: x.equal(a, p),
}


def _global_values(program: Program) -> dict:
    from .interp import Machine

    m = Machine(program.with_main([]), "plain", max_steps=10 ** 6)
    out = m.run()
    if out.answer is not None and type(out.answer) is not Val:
        raise _Abort("unsupported-feature", "top-level definitions did not evaluate")
    return m.globals


def _entry_shapes(program: Program, entry: str, lam: Lam) -> tuple:
    """Argument shapes from an ``assume`` form for the entry (or for the
    function it wraps); unconstrained otherwise."""
    a = program.assumptions.get(entry)
    if a is None or len(a.shapes) != len(lam.params):
        a = next((a for name, a in program.assumptions.items() if program.globals.get(name) is lam), None)
    if a is None:
        return tuple(ANY for _ in lam.params)
    return tuple(_SHAPE_NAMES[s] for s in a.shapes)


MAX_ROUNDS = 50


def sym_eval(p: Program, entry: str, fuel: int = DEFAULT_FUEL, budget: int = DEFAULT_BUDGET) -> SymResult:
    """Collect size-change graphs for every loop reachable from ``entry``.

    Returns the graphs per lambda label, and whether exploration was
    complete (no unsupported feature hit and the budget sufficed).
    """
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 20000))
    x = None
    try:
        globals_ = _global_values(p)
        f = globals_.get(entry)
        if f is None:
            raise KeyError(f"no top-level definition named {entry}")
        if type(f) is TermClo:
            f = f.inner
        if type(f) is not Clo:
            raise _Abort("unsupported-feature", f"{entry} is not a function")
        x = _Explorer(p, globals_, fuel, budget)
        shapes = _entry_shapes(p, entry, f.lam)
        for _ in range(MAX_ROUNDS):
            x.changed = False
            x.graphs = {}
            x.sites = {}
            x.queue = []
            phi = PathCond()
            args = []
            for s in shapes:
                v, phi = x.fresh(s, phi)
                args.append(v)
            x.analyze(f.lam, f.env, args, phi)
            done = set()
            for ctx in list(x.summaries):
                if ctx not in x.queue:
                    x.queue.append(ctx)
            i = 0
            while i < len(x.queue):
                ctx = x.queue[i]
                i += 1
                if ctx in done:
                    continue
                done.add(ctx)
                r = x.analyze_context(ctx)
                old = x.summaries[ctx]
                new = join_shape(old, r)
                if new != old:
                    x.summaries[ctx] = new
                    x.changed = True
            if not x.changed:
                return SymResult(
                    {k: set(v) for k, v in x.graphs.items()}, x.sites, True,
                    contexts=len(x.summaries), steps=x.steps,
                )
        raise _Abort("fuel", "summaries did not stabilise")
    except _Abort as exc:
        graphs = {k: set(v) for k, v in x.graphs.items()} if x is not None else {}
        sites = x.sites if x is not None else {}
        return SymResult(graphs, sites, False, exc.reason, exc.detail,
                         contexts=len(x.summaries) if x else 0, steps=x.steps if x else 0)
    finally:
        sys.setrecursionlimit(old_limit)


def verify_termination(p: Program, entry: str, fuel: int = DEFAULT_FUEL,
                       budget: int = DEFAULT_BUDGET) -> VerifyResult:
    res = sym_eval(p, entry, fuel, budget)
    graphs = {k: frozenset(v) for k, v in res.graphs.items()}
    if not res.complete:
        return Unknown(res.reason, res.detail, graphs)
    closures = {}
    for label in sorted(graphs):
        closed = close_under_composition(graphs[label])
        closures[label] = closed
        bad = sorted(g for g in closed if not is_descending(g))
        if bad:
            witness = bad[0]
            sites = res.sites[label]
            site = next((s for s in sites if s.graph == witness), sites[0])
            return Refuted(witness, site, label, graphs)
    return Verified(graphs, closures)
