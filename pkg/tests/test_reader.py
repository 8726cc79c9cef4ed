import pytest
from hypothesis import given
from hypothesis import strategies as st

from sizechange import eval_standard, parse_expr, parse_program, print_value
from sizechange.core import NIL, Pair
from sizechange.reader import ReaderError


def run(text):
    return print_value(eval_standard(parse_program(text)).value)


def test_defines_and_main():
    p = parse_program("(define (f x) (+ x 1)) (f 2)", "demo")
    assert list(p.globals) == ["f"]
    assert len(p.main) == 1
    assert run("(define (f x) (+ x 1)) (f 2)") == "3"


def test_quoted_lists_and_chars():
    assert run("'(1 (2 3) ())") == "(1 (2 3) ())"
    assert run("(char=? #\\a (car (list #\\a)))") == "0"


def test_derived_forms():
    assert run("(let ([x 2] [y 3]) (* x y))") == "6"
    assert run("(let* ([x 2] [y (+ x 1)]) y)") == "3"
    assert run("(cond [(= 1 2) 10] [else 20])") == "20"
    assert run("(and 0 0)") == "0"
    assert run("(or 1 0)") == "0"
    assert run("(if (< 1 2) 5 6)") == "5"


def test_truth_encoding():
    assert run("(= 1 1)") == "0"
    assert run("(= 1 2)") == "1"


@pytest.mark.parametrize("text,fragment", [
    ("(f", "unclosed"),
    ("(lambda (x) y)", "unbound"),
    ("'foo", "quoted symbols"),
])
def test_errors_have_positions(text, fragment):
    with pytest.raises(ReaderError) as info:
        parse_program(text, "bad")
    assert fragment in str(info.value)
    assert str(info.value).startswith("bad:1:")


def test_assumptions_recorded():
    p = parse_program("(define (f n) n) (assume (f (natural n)))")
    assert "f" in p.assumptions


def test_parse_expr_replaces_main():
    p = parse_program("(define (f n) (* n 2)) (f 1)")
    q = p.with_main([parse_expr("(f 21)", p)])
    assert print_value(eval_standard(q).value) == "42"


nested = st.recursive(st.integers(-50, 50), lambda inner: st.lists(inner, max_size=4), max_leaves=10)


def _to_value(x):
    if isinstance(x, list):
        out = NIL
        for e in reversed(x):
            out = Pair(_to_value(e), out)
        return out
    return x


def _to_text(x):
    if isinstance(x, list):
        return "(" + " ".join(_to_text(e) for e in x) + ")"
    return str(x)


@given(nested)
def test_quote_print_round_trip(x):
    text = _to_text(x)
    assert print_value(_to_value(x)) == text
    assert run("'" + text) == text
