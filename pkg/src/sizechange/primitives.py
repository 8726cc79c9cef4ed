"""The primitive whitelist.

Every primitive here is total on its domain and raises ``RuntimeFault``
outside it; none can loop, so primitive applications never touch the
size-change table.
"""

from __future__ import annotations

from .core import NIL, NilType, Pair, RuntimeFault

TRUE = 0
FALSE = 1


def _int(name, v):
    if type(v) is not int:
        raise RuntimeFault("primitive", f"{name}: expected an integer, got {_show(v)}")
    return v


def _show(v):
    from .reader import print_value
    return print_value(v)


def _bool(b: bool) -> int:
    return TRUE if b else FALSE


def _add(a, b):
    return _int("+", a) + _int("+", b)


def _sub(a, b):
    return _int("-", a) - _int("-", b)


def _mul(a, b):
    return _int("*", a) * _int("*", b)


def _quotient(a, b):
    _int("quotient", a)
    if _int("quotient", b) == 0:
        raise RuntimeFault("primitive", "quotient: division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _remainder(a, b):
    q = _quotient(a, b)
    return a - b * q


def _num_eq(a, b):
    return _bool(_int("=", a) == _int("=", b))


def _lt(a, b):
    return _bool(_int("<", a) < _int("<", b))


def _gt(a, b):
    return _bool(_int(">", a) > _int(">", b))


def _le(a, b):
    return _bool(_int("<=", a) <= _int("<=", b))


def _ge(a, b):
    return _bool(_int(">=", a) >= _int(">=", b))


def _car(p):
    if type(p) is not Pair:
        raise RuntimeFault("primitive", f"car: expected a pair, got {_show(p)}")
    return p.car


def _cdr(p):
    if type(p) is not Pair:
        raise RuntimeFault("primitive", f"cdr: expected a pair, got {_show(p)}")
    return p.cdr


def _empty(v):
    return _bool(v is NIL)


def _consp(v):
    return _bool(type(v) is Pair)


def _zero(v):
    return _bool(_int("zero?", v) == 0)


def _not(v):
    return _bool(type(v) is int and v != 0)


def _no_clause():
    raise RuntimeFault("primitive", "cond: no clause matched")


def _equal(a, b):
    from .core import value_eq
    return _bool(value_eq(a, b))


# name -> (arity, implementation)
PRIMITIVES: dict[str, tuple[int, object]] = {
    "+": (2, _add),
    "-": (2, _sub),
    "*": (2, _mul),
    "quotient": (2, _quotient),
    "remainder": (2, _remainder),
    "=": (2, _num_eq),
    "<": (2, _lt),
    ">": (2, _gt),
    "<=": (2, _le),
    ">=": (2, _ge),
    "cons": (2, Pair),
    "car": (1, _car),
    "cdr": (1, _cdr),
    "first": (1, _car),
    "rest": (1, _cdr),
    "empty?": (1, _empty),
    "null?": (1, _empty),
    "cons?": (1, _consp),
    "pair?": (1, _consp),
    "zero?": (1, _zero),
    "not": (1, _not),
    "char=?": (2, _num_eq),
    "equal?": (2, _equal),
    "void-cond": (0, _no_clause),
}

# primitives whose result is a 0/1 truth value
PREDICATES = frozenset({"=", "<", ">", "<=", ">=", "empty?", "null?", "cons?", "pair?", "zero?", "not", "char=?", "equal?"})


def apply_primitive(name: str, args) -> object:
    arity, fn = PRIMITIVES[name]
    if len(args) != arity:
        raise RuntimeFault("arity", f"{name}: expects {arity} argument(s), got {len(args)}")
    return fn(*args)


def _words(v) -> int:
    if type(v) is int:
        return (abs(v).bit_length() >> 6) + 1
    return 1


def primitive_cost(name: str, args) -> int:
    """Abstract work units for one primitive call: integer arithmetic is
    charged per 64-bit word of its operands, everything else costs 1."""
    if name in ("*", "quotient", "remainder") and len(args) == 2:
        return _words(args[0]) * _words(args[1])
    if name in ("+", "-", "=", "<", ">", "<=", ">=") and len(args) == 2:
        return max(_words(args[0]), _words(args[1]))
    return 1
