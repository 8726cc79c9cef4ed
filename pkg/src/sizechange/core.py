"""Core syntax, runtime values, answers and the default well-founded order.

Integers are plain Python ``int`` values (arbitrary precision).  Lists are
chains of :class:`Pair` ending in :data:`NIL`.  Everything here is immutable
once built, so values and expressions can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union


# ---------------------------------------------------------------------------
#  Expressions
# ---------------------------------------------------------------------------


class Expr:
    """Base class for core expressions.

    ``simple`` marks expressions the machine may evaluate in one go without
    touching the size-change table (literals, variables, lambdas, and
    primitive applications whose operands are simple).  ``size`` is the
    node count, used so that inline evaluation still charges one step per
    node.
    """

    __slots__ = ()
    simple: bool
    size: int


@dataclass(frozen=True, eq=False, slots=True)
class PrimRef(Expr):
    name: str
    simple: bool = True
    size: int = 1


@dataclass(frozen=True, eq=False, slots=True)
class Lit(Expr):
    value: Any
    simple: bool = True
    size: int = 1


@dataclass(frozen=True, eq=False, slots=True)
class Var(Expr):
    name: str
    simple: bool = True
    size: int = 1


@dataclass(frozen=True, eq=False, slots=True)
class Lam(Expr):
    label: str
    params: tuple[str, ...]
    body: Expr
    # local (non-global) free variables, in first-occurrence order
    free: tuple[str, ...] = ()
    simple: bool = True
    size: int = 1


@dataclass(frozen=True, eq=False, slots=True)
class App(Expr):
    fn: Expr
    args: tuple[Expr, ...]
    # False for applications introduced by `let`; those never touch the table
    monitored: bool = True
    simple: bool = False
    size: int = 1


@dataclass(frozen=True, eq=False, slots=True)
class If0(Expr):
    test: Expr
    then: Expr
    orelse: Expr
    simple: bool = False
    size: int = 1


@dataclass(frozen=True, eq=False, slots=True)
class TermC(Expr):
    body: Expr
    blame: "BlameLabel"
    simple: bool = False
    size: int = 1


def make_app(fn: Expr, args: tuple[Expr, ...], monitored: bool = True) -> App:
    simple = isinstance(fn, PrimRef) and all(a.simple for a in args)
    size = 1 + fn.size + sum(a.size for a in args)
    return App(fn, args, monitored, simple, size)


def make_if0(test: Expr, then: Expr, orelse: Expr) -> If0:
    return If0(test, then, orelse, False, 1 + test.size + then.size + orelse.size)


def make_termc(body: Expr, blame: "BlameLabel") -> TermC:
    return TermC(body, blame, False, 1 + body.size)


# ---------------------------------------------------------------------------
#  Values
# ---------------------------------------------------------------------------


class NilType:
    __slots__ = ()

    def __repr__(self):
        return "()"

    def __reduce__(self):
        return (_nil, ())


def _nil():
    return NIL


NIL = NilType()


@dataclass(frozen=True, slots=True)
class Prim:
    name: str

    def __repr__(self):
        return f"#<primitive:{self.name}>"


class Pair:
    """Immutable cons cell with a cached structural hash.

    Equality walks the cdr spine iteratively so long lists do not hit the
    recursion limit.
    """

    __slots__ = ("car", "cdr", "_hash")

    def __init__(self, car, cdr):
        object.__setattr__(self, "car", car)
        object.__setattr__(self, "cdr", cdr)
        object.__setattr__(self, "_hash", hash((_h(car), _h(cdr), 0x5C7)))

    def __setattr__(self, name, value):
        raise AttributeError("Pair is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        a, b = self, other
        while True:
            if a is b:
                return True
            if type(a) is not Pair or type(b) is not Pair:
                return value_eq(a, b)
            if a._hash != b._hash:
                return False
            if not value_eq(a.car, b.car):
                return False
            a, b = a.cdr, b.cdr

    def __ne__(self, other):
        return not self == other

    def __iter__(self):
        """Iterate the elements of a proper list (stops at the first non-pair)."""
        p = self
        while type(p) is Pair:
            yield p.car
            p = p.cdr

    def __repr__(self):
        return f"Pair({self.car!r}, {self.cdr!r})"


def _h(v):
    return hash(v)


def value_eq(a, b) -> bool:
    """Structural equality on runtime values."""
    if a is b:
        return True
    ta = type(a)
    if ta is not type(b):
        return False
    if ta is Pair:
        return Pair.__eq__(a, b)
    return a == b


class Env(dict):
    """Mapping from names to values.  Treated as immutable once built."""

    __slots__ = ()


class Clo:
    """A closure: lambda plus its captured environment.

    The environment is restricted to the lambda's local free variables;
    top-level definitions are resolved by name when the body runs.
    """

    __slots__ = ("lam", "env", "_key", "_hash")

    def __init__(self, lam: Lam, env: dict):
        self.lam = lam
        self.env = env
        self._key = None
        self._hash = None

    @property
    def label(self) -> str:
        return self.lam.label

    @property
    def params(self) -> tuple[str, ...]:
        return self.lam.params

    @property
    def body(self) -> Expr:
        return self.lam.body

    def key(self) -> "ClosureKey":
        k = self._key
        if k is None:
            env = self.env
            k = ClosureKey(self.lam.label, tuple(env[v] for v in self.lam.free))
            self._key = k
        return k

    def __hash__(self):
        h = self._hash
        if h is None:
            h = self._hash = hash(self.key())
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not Clo:
            return False
        return self.key() == other.key()

    def __repr__(self):
        return f"#<closure:{self.lam.label}>"


@dataclass(frozen=True, slots=True)
class TermClo:
    """A closure guarded by a termination contract."""

    inner: Clo
    blame: "BlameLabel"

    def __repr__(self):
        return f"#<term/c:{self.inner.label}>"


Value = Union[int, Pair, NilType, Prim, Clo, TermClo]


@dataclass(frozen=True, slots=True)
class ClosureKey:
    """Exact structural identity of a closure: lambda label plus the values
    of its captured local variables (in the lambda's free-variable order)."""

    label: str
    env: tuple

    def __repr__(self):
        return f"<{self.label}>"


def closure_key(c: Union[Clo, TermClo]) -> ClosureKey:
    if type(c) is TermClo:
        c = c.inner
    return c.key()


@dataclass(frozen=True, slots=True)
class BlameLabel:
    tag: str
    position: str = ""

    def __str__(self):
        if self.position and self.position != self.tag:
            return f"{self.tag}@{self.position}"
        return self.tag


PROGRAM_BLAME = BlameLabel("program")


# ---------------------------------------------------------------------------
#  Answers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Val:
    value: Any
    kind = "value"


@dataclass(frozen=True)
class RTError:
    kind_of_error: str
    message: str
    kind = "rt-error"


@dataclass(frozen=True)
class SCError:
    blame: Optional[BlameLabel]
    witness: Any  # scgraph.ViolationReport
    kind = "sc-error"


@dataclass(frozen=True)
class Timeout:
    steps: int
    kind = "timeout"


Answer = Union[Val, RTError, SCError, Timeout]


class RuntimeFault(Exception):
    """Raised inside the machine and primitives; becomes an RTError answer."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


# ---------------------------------------------------------------------------
#  The default well-founded partial order
# ---------------------------------------------------------------------------


def _is_int(v) -> bool:
    return type(v) is int


def precedes(a, b) -> bool:
    """Strict order: integers by magnitude, and anything below a pair if it is
    at or below one of the pair's fields.  Nil sits below every pair.
    Closures, primitives and contract-wrapped closures only ever appear as
    (equal) fields of pairs; compared directly they are incomparable.
    """
    tb = type(b)
    if tb is int:
        return type(a) is int and abs(a) < abs(b)
    if tb is not Pair:
        return False
    ta = type(a)
    if ta is NilType:
        return True
    if ta is not int and ta is not Pair:
        # closures etc. can still be equal to a field somewhere inside b
        return _occurs_inside(a, b)
    if a is b.cdr or a is b.car:
        return True
    # walk the proper subterms of b; a ≺ b iff a ⪯ some field reachable in b
    stack = [b.cdr, b.car]
    if ta is int:
        mag = abs(a)
        while stack:
            d = stack.pop()
            td = type(d)
            if td is int:
                if d == a or mag < abs(d):
                    return True
            elif td is Pair:
                stack.append(d.cdr)
                stack.append(d.car)
        return False
    # a is a pair: it must equal a proper subterm of b
    h = a._hash
    while stack:
        d = stack.pop()
        if type(d) is Pair:
            if d is a or (d._hash == h and d == a):
                return True
            stack.append(d.cdr)
            stack.append(d.car)
    return False


def _occurs_inside(a, b) -> bool:
    stack = [b.cdr, b.car]
    while stack:
        d = stack.pop()
        if type(d) is Pair:
            stack.append(d.cdr)
            stack.append(d.car)
        elif value_eq(d, a):
            return True
    return False


def precedes_eq(a, b) -> bool:
    return value_eq(a, b) or precedes(a, b)


# comparator results used when building size-change graphs
LESS = "less"
EQUAL = "equal"
UNKNOWN = None


@dataclass(frozen=True)
class Order:
    """A well-founded partial order on values.

    Users may supply their own ``strict``/``equal`` pair; well-foundedness of
    a replacement order is the caller's obligation and is not checked.
    """

    strict: Callable[[Any, Any], bool] = precedes
    equal: Callable[[Any, Any], bool] = value_eq
    name: str = "default"

    def compare(self, new, old):
        """How ``new`` relates to ``old``: LESS, EQUAL, or None (unknown)."""
        if self.strict(new, old):
            return LESS
        if self.equal(new, old):
            return EQUAL
        return UNKNOWN


DEFAULT_ORDER = Order()


def is_procedure(v) -> bool:
    return type(v) in (Clo, TermClo, Prim)


__all__ = [
    "Expr", "PrimRef", "Lit", "Var", "Lam", "App", "If0", "TermC",
    "make_app", "make_if0", "make_termc",
    "NIL", "NilType", "Prim", "Pair", "Clo", "TermClo", "Env", "Value",
    "ClosureKey", "closure_key", "BlameLabel", "PROGRAM_BLAME",
    "Val", "RTError", "SCError", "Timeout", "Answer", "RuntimeFault",
    "precedes", "precedes_eq", "value_eq", "Order", "DEFAULT_ORDER",
    "LESS", "EQUAL", "UNKNOWN", "is_procedure",
]
