import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sizechange import (
    ALWAYS, OFF, Counters, Policy, eval_monitored, eval_standard, eval_traced, ext, parse_program,
    print_value, run_program, upd,
)
from sizechange.core import ClosureKey, RTError, SCError, Timeout, Val
from sizechange.interp import answer_to_json, entry_prog
from sizechange.scgraph import ViolationReport, graph

TERMINATING = ["ack", "fact", "sum", "msort", "nfa", "rev", "ho-fold", "gcd", "id", "len-cps",
               "interp-msort", "ho-ack"]
DIVERGING = ["omega", "ack-buggy", "nfa-bug", "interp-omega"]

KEY = ClosureKey("f", ())


def test_upd_first_call_records_args():
    m = upd({}, KEY, (2, 0))
    assert m[KEY].args == (2, 0) and m[KEY].count == 1


def test_upd_is_functional():
    m0 = upd({}, KEY, (2, 0))
    m1 = upd(m0, KEY, (1, 1))
    assert m0[KEY].args == (2, 0)
    assert m1[KEY].args == (1, 1)


def test_upd_reports_violation():
    m = upd(upd({}, KEY, (2, 0)), KEY, (1, 1))
    rep = upd(m, KEY, (1, 2))
    assert isinstance(rep, ViolationReport)
    assert rep.call_index == 3
    assert rep.graph == graph(2, (0, "<=", 0), (1, "<=", 0))


def test_upd_off_never_fails():
    m = {}
    for args in [(1,), (1,), (1,)]:
        m = upd(m, KEY, args, OFF)
    assert isinstance(m, dict)
    assert not OFF.checks_at(3)


def test_countdown_past_zero_is_flagged():
    # 1 -> -1 keeps the magnitude, so the graph is empty
    p = parse_program("(define (f n) (if (< n 0) 0 (f (- n 2)))) (f 1)")
    assert type(eval_monitored(p, whole=True)) is SCError


def test_ext_records_raw_sequence():
    m = ext(ext(ext({}, KEY, (3,)), KEY, (4,)), KEY, (2,))
    e = m[KEY]
    assert e.graphs() == [graph(1), graph(1, (0, "<", 0))]
    assert not entry_prog(e)


@pytest.mark.parametrize("name", TERMINATING)
def test_modes_agree_on_terminating_programs(corpus, name):
    p = corpus(name)
    plain = run_program(p, "plain").answer
    assert type(plain) is Val
    for mode in ("standard", "monitor", "monitor-whole"):
        out = run_program(p, mode, check_extents=True)
        assert print_value(out.answer.value) == print_value(plain.value), mode
    assert print_value(eval_traced(p).answer.value) == print_value(plain.value)


@pytest.mark.parametrize("name", DIVERGING)
@pytest.mark.parametrize("policy", [ALWAYS, Policy("backoff", 1), Policy("backoff", 4)])
def test_diverging_programs_caught_under_every_policy(corpus, name, policy):
    ans = eval_monitored(corpus(name), policy, whole=True, max_steps=10 ** 6)
    assert type(ans) is SCError


def test_lambda_comp_blames_c2_only_in_contract_mode(corpus):
    out = run_program(corpus("lambda-comp"), "monitor")
    first, second = out.answers
    assert type(first) is Val
    assert type(second) is SCError and second.blame.tag == "c2"


def test_standard_mode_runs_past_contract_free_loops():
    p = parse_program("(define (f n) (if (= n 5) 0 (f (+ n 1)))) (f 1)")
    assert eval_standard(p) == Val(0)
    assert type(eval_monitored(p, whole=True)) is SCError
    assert eval_monitored(p) == Val(0)  # no contract, nothing monitored


def test_runtime_error_and_timeout():
    assert type(eval_standard(parse_program("(car 5)"))) is RTError
    loop = parse_program("(define (f n) (f n)) (f 1)")
    assert type(eval_standard(loop, max_steps=1000)) is Timeout
    assert answer_to_json(eval_standard(parse_program("(car 5)")))["kind"] == "rt-error"


def test_backoff_checks_fewer(corpus):
    p = corpus("sum")
    always, backoff = Counters(), Counters()
    a = run_program(p, "monitor-whole", ALWAYS, counters=always).answer
    b = run_program(p, "monitor-whole", Policy("backoff", 1), counters=backoff).answer
    assert a == b
    assert backoff.checks < always.checks


def test_extent_discipline_with_non_tail_calls():
    p = parse_program("""
        (define (g n) (if (= n 0) 0 (+ 1 (g (- n 1)))))
        (define (h n) (+ (g n) (g n)))
        (h 30)""")
    out = run_program(p, "monitor-whole", check_extents=True)
    assert out.answer == Val(60)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3))
def test_ack_monitor_matches_standard(m, n):
    p = parse_program(f"""
        (define (ack m n)
          (cond [(= m 0) (+ n 1)]
                [(= n 0) (ack (- m 1) 1)]
                [else (ack (- m 1) (ack m (- n 1)))]))
        (ack {m} {n})""")
    assert eval_monitored(p, whole=True) == eval_standard(p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 40), st.integers(1, 6))
def test_countdown_never_flagged(n, step):
    p = parse_program(f"(define (f n) (if (< n {step}) 0 (f (- n {step})))) (f {n})")
    assert eval_monitored(p, whole=True) == Val(0)
