from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import magnitude_less
from sizechange.core import NIL, Pair, precedes, precedes_eq, value_eq
from sizechange.interp import ALWAYS, OFF, Policy, wrap_termc
from sizechange.core import BlameLabel, Clo, TermClo
from sizechange.reader import parse_program

values = st.recursive(
    st.integers(-20, 20) | st.just(NIL),
    lambda inner: st.builds(Pair, inner, inner),
    max_leaves=8,
)


def plist(*xs):
    out = NIL
    for x in reversed(xs):
        out = Pair(x, out)
    return out


def test_integer_order_is_by_magnitude():
    assert precedes(-1, 2) and precedes(1, -2)
    assert not precedes(-3, 2)
    assert not precedes(2, 2)


def test_pair_order_examples():
    lst = plist(1, 2, 3)
    assert precedes(lst.cdr, lst)
    assert precedes(lst.car, lst)
    assert precedes(NIL, lst)
    assert precedes(0, lst)  # below a field
    assert not precedes(lst, lst.cdr)
    assert not precedes(7, NIL)


def test_structural_equality():
    assert value_eq(plist(1, 2), plist(1, 2))
    assert not value_eq(plist(1, 2), plist(1, 3))
    assert not value_eq(1, plist(1))
    assert hash(plist(1, 2)) == hash(plist(1, 2))


@given(st.integers(), st.integers())
def test_integers_match_magnitude_oracle(a, b):
    assert precedes(a, b) == magnitude_less(a, b)


@settings(max_examples=300)
@given(values, values, values)
def test_order_is_strict_and_transitive(a, b, c):
    assert not precedes(a, a)
    assert not (precedes(a, b) and precedes(b, a))
    if precedes(a, b) and precedes(b, c):
        assert precedes(a, c)
    assert precedes_eq(a, a)


@given(values, values)
def test_fields_are_below_pair(a, b):
    p = Pair(a, b)
    assert precedes(a, p) and precedes(b, p)


def test_wrap_termc_only_closures_and_idempotent():
    p = parse_program("(define (f x) x)")
    from sizechange.interp import Machine
    clo = Machine(p).run().globals["f"]
    assert isinstance(clo, Clo)
    blame = BlameLabel("here")
    w = wrap_termc(clo, blame)
    assert isinstance(w, TermClo)
    assert wrap_termc(w, blame) is w
    assert wrap_termc(7, blame) == 7


def test_policy_parse_and_checkpoints():
    assert Policy.parse("always") == ALWAYS
    assert Policy.parse("off") == OFF
    b = Policy.parse("backoff:2")
    assert str(b) == "backoff:2"
    assert [n for n in range(1, 20) if b.checks_at(n)] == [2, 4, 8, 16]
    assert [n for n in range(1, 6) if ALWAYS.checks_at(n)] == [2, 3, 4, 5]
