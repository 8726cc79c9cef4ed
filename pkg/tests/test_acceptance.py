"""Acceptance criteria 1-12.  Each test prints one PASS/FAIL line; the lines
are also collected into the pytest terminal summary."""

import random
import time
from contextlib import contextmanager

from conftest import CORPUS
from oracles import compose_paths, prog_oracle, rejection_prefix, to_dict
from sizechange import (
    ALWAYS, Counters, Policy, eval_monitored, eval_standard, eval_traced, graph, load_program,
    parse_expr, parse_program, print_value, run_program,
)
from sizechange.bench import run_bench
from sizechange.core import SCError, Val
from sizechange.scgraph import (
    NONASC, STRICT, SCGraph, ViolationReport, compose, first_violation, is_descending, is_idempotent,
    monitor_fold,
)
from sizechange.verify import Refuted, Verified, verify_termination

RESULTS: dict[int, str] = {}


@contextmanager
def criterion(n: int, title: str):
    try:
        yield
    except BaseException:
        RESULTS[n] = f"criterion {n:2d}: FAIL  {title}"
        print(RESULTS[n])
        raise
    RESULTS[n] = f"criterion {n:2d}: PASS  {title}"
    print(RESULTS[n])


def load(name):
    return load_program(CORPUS / f"{name}.sct")


def test_criterion_01_golden_ack():
    with criterion(1, "monitored (ack 2 0) = 3, first graph {(m<m),(m<n)}, < 1 s"):
        t0 = time.perf_counter()
        c = Counters(log_graphs=True)
        out = run_program(load("ack"), "monitor-whole", counters=c)
        elapsed = time.perf_counter() - t0
        assert out.answer == Val(3)
        first = c.graph_log[0][1]
        assert first == graph(2, (0, "<", 0), (0, "<", 1))
        assert elapsed < 1.0


def test_criterion_02_buggy_ack():
    with criterion(2, "buggy ack: idempotent witness without strict self-arc by call 3"):
        ans = eval_monitored(load("ack-buggy"), whole=True)
        assert type(ans) is SCError
        g = ans.witness.graph
        assert is_idempotent(g)
        assert all(g.change(i, i) is not STRICT for i in range(g.arity))
        assert not is_descending(g)
        # calls: (ack 2 0) -> (ack 1 1) -> (ack 1 2)
        assert ans.witness.call_index <= 3


def test_criterion_03_contract_blame():
    with criterion(3, "c1 returns a value, c2 blamed, < 1 s"):
        t0 = time.perf_counter()
        out = run_program(load("lambda-comp"), "monitor")
        elapsed = time.perf_counter() - t0
        ok, bad = out.answers
        assert type(ok) is Val
        assert type(bad) is SCError and bad.blame.tag == "c2"
        assert elapsed < 1.0


def test_criterion_04_cps_len():
    with criterion(4, "CPS len '(2 1) = 2, no violation, >= 2 continuation keys"):
        p = load("len-cps")
        c = Counters(track_keys=True)
        out = run_program(p, "monitor-whole", counters=c)
        assert out.answer == Val(2)
        assert all(type(a) is not SCError for a in out.answers)
        by_label = {}
        for k in c.keys:
            by_label.setdefault(k.label, set()).add(k)
        loop_label = p.globals["loop"].label
        len_label = p.globals["len"].label
        k_keys = [ks for lbl, ks in by_label.items() if lbl not in (loop_label, len_label)]
        assert max(len(ks) for ks in k_keys) >= 2


def test_criterion_05_static_ack():
    with criterion(5, "static ack verified with exactly {{(m<m)}, {(m<=m),(n<n)}}, < 1 s"):
        t0 = time.perf_counter()
        res = verify_termination(load("ack"), "ack")
        elapsed = time.perf_counter() - t0
        assert isinstance(res, Verified)
        assert res.graph_set() == {graph(2, (0, "<", 0)), graph(2, (0, "<=", 0), (1, "<", 1))}
        assert elapsed < 1.0


def test_criterion_06_nfa():
    with criterion(6, "nfa state1 refuted with (input<=input); dynamic SCError within 1e4 steps"):
        res = verify_termination(load("nfa"), "state1")
        assert isinstance(res, Refuted)
        assert res.witness.change(0, 0) is NONASC
        c = Counters()
        out = run_program(load("nfa-bug"), "monitor-whole", max_steps=10 ** 4, counters=c)
        assert type(out.answer) is SCError
        assert c.steps <= 10 ** 4


TERMINATING = ["ack", "fact", "sum", "msort", "nfa", "rev", "ho-fold", "gcd", "id", "len-cps",
               "interp-msort", "ho-ack"]


def test_criterion_07_soundness_suite():
    with criterion(7, "terminating corpus: monitored answers equal standard, < 5 s"):
        t0 = time.perf_counter()
        assert len(TERMINATING) >= 11
        for name in TERMINATING:
            p = load(name)
            std = eval_standard(p)
            assert type(std) is Val, name
            for whole in (False, True):
                mon = eval_monitored(p, whole=whole)
                assert type(mon) is Val, name
                assert print_value(mon.value) == print_value(std.value), name
        assert time.perf_counter() - t0 < 5.0


def test_criterion_08_divergence_suite():
    with criterion(8, "diverging corpus halts with SCError well inside 1e6 steps"):
        cases = [("omega", None), ("ack-buggy", None), ("interp-omega", None), ("nfa-bug", None),
                 ("lambda-comp", "(c2 '())")]
        for name, main in cases:
            p = load(name)
            if main is not None:
                p = p.with_main([parse_expr(main, p)])
            c = Counters()
            out = run_program(p, "monitor-whole", max_steps=10 ** 6, counters=c)
            assert type(out.answer) is SCError, name
            assert c.steps < 10 ** 6, name


def test_criterion_09_completeness_gap():
    with criterion(9, "ascend-then-stop: terminates, trace shows a failing entry, monitor flags"):
        p = load("ascend-then-stop")
        assert eval_standard(p) == Val(0)
        tr = eval_traced(p)
        assert tr.answer == Val(0) and tr.any_failure()
        assert type(eval_monitored(p, whole=True)) is SCError


def _random_graph(rng, n):
    arcs = []
    for i in range(n):
        for j in range(n):
            c = rng.choice((None, None, NONASC, STRICT))
            if c:
                arcs.append((i, c, j))
    return SCGraph(n, arcs)


def test_criterion_10_algebra():
    with criterion(10, "1e4 associativity triples and 1e3 monitor/prog sequences agree with oracles"):
        rng = random.Random(20240601)
        for _ in range(10 ** 4):
            n = rng.randint(1, 4)
            a, b, c = (_random_graph(rng, n) for _ in range(3))
            left = compose(compose(a, b), c)
            assert left == compose(a, compose(b, c))
            assert to_dict(left) == compose_paths(n, [to_dict(a), to_dict(b), to_dict(c)])
        for _ in range(10 ** 3):
            n = rng.randint(1, 4)
            seq = [_random_graph(rng, n) for _ in range(rng.randint(1, 8))]
            dicts = [to_dict(g) for g in seq]
            expected = prog_oracle(n, dicts)
            res, k = monitor_fold(seq, n)
            assert isinstance(res, ViolationReport) == (not expected)
            prefix = rejection_prefix(n, dicts)
            assert first_violation(seq) == prefix
            if prefix is not None:
                assert k == prefix


def test_criterion_11_overhead_order():
    with criterion(11, "work ratio sum > fact >= 1; backoff:1 checks fewer than always on sum"):
        backoff = Policy("backoff", 1)
        rep = run_bench(CORPUS / "bench", [ALWAYS, backoff])
        assert rep.ratio("sum") > rep.ratio("fact") >= 1
        rows = {(r.program, r.policy): r for r in rep.rows}
        a, b = rows[("sum", "always")], rows[("sum", "backoff:1")]
        assert a.answer == b.answer
        assert b.checks < a.checks


def test_criterion_12_tail_calls():
    with criterion(12, "1e6-iteration monitored tail loop with <= 16 frames and bounded table"):
        p = parse_program("(define (loop n) (if (= n 0) 0 (loop (- n 1)))) (loop 1000000)")
        c = Counters()
        out = run_program(p, "monitor-whole", counters=c)
        assert out.answer == Val(0)
        assert c.max_frames <= 16
        assert c.max_table <= 4
