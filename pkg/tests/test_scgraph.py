import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graphs
from oracles import compose_paths, descending, prog_oracle, rejection_prefix, to_dict
from sizechange.core import NIL, Pair
from sizechange.scgraph import (
    NONASC, STRICT, ArityMismatch, SCGraph, ViolationReport, build_graph, compose, first_violation,
    from_json, graph, is_descending, is_idempotent, monitor_fold, monitor_init, monitor_step,
    parse_text, prog, scp_holds,
)


def test_build_graph_ack_first_call():
    # (ack 2 0) -> (ack 1 1)
    g = build_graph((2, 0), (1, 1))
    assert g == graph(2, (0, "<", 0), (0, "<", 1))


def test_build_graph_equal_and_pairs():
    lst = Pair(1, Pair(2, NIL))
    g = build_graph((lst, 5), (lst.cdr, 5))
    assert g == graph(2, (0, "<", 0), (1, "<=", 1))


def test_build_graph_arity_mismatch():
    with pytest.raises(ArityMismatch):
        build_graph((1, 2), (1,))


def test_strict_subsumes_nonascending():
    assert SCGraph(1, [(0, NONASC, 0), (0, STRICT, 0)]) == graph(1, (0, "<", 0))
    assert len(graph(1, (0, "<", 0), (0, "<=", 0))) == 1


def test_compose_strict_if_any_arc_strict():
    a = graph(2, (0, "<=", 1))
    b = graph(2, (1, "<", 0))
    assert compose(a, b) == graph(2, (0, "<", 0))
    assert compose(b, a) == graph(2, (1, "<", 1))


def test_descending_examples():
    assert not is_descending(graph(1, (0, "<=", 0)))
    assert is_descending(graph(1, (0, "<", 0)))
    assert not is_descending(SCGraph(2))  # empty graph is idempotent
    swap = graph(2, (0, "<=", 1), (1, "<=", 0))
    assert not is_idempotent(swap) and is_descending(swap)


def test_text_and_json_round_trip():
    g = graph(3, (0, "<", 1), (2, "<=", 2))
    assert parse_text(g.to_text()) == g
    assert from_json(g.to_json()) == g


def test_monitor_detects_ack_bug():
    # ack(2,0) -> ack(1,1) -> ack(1,2) under the buggy inner call
    g1 = build_graph((2, 0), (1, 1))
    g2 = build_graph((1, 1), (1, 2))
    st = monitor_step(monitor_init(2), g1)
    assert not isinstance(st, ViolationReport)
    rep = monitor_step(st, g2)
    assert isinstance(rep, ViolationReport)
    assert is_idempotent(rep.graph) and not is_descending(rep.graph)
    assert rep.call_index == 2


def test_scp_holds_ack():
    assert scp_holds([graph(2, (0, "<", 0)), graph(2, (0, "<=", 0), (1, "<", 1))]) is True
    bad = scp_holds([graph(1, (0, "<=", 0))])
    assert bad == graph(1, (0, "<=", 0))


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(graphs(n), graphs(n), graphs(n))))
def test_compose_matches_path_oracle(t):
    a, b, c = t
    n = a.arity
    assert to_dict(compose(a, b)) == compose_paths(n, [to_dict(a), to_dict(b)])
    assert compose(compose(a, b), c) == compose(a, compose(b, c))


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_descending_matches_oracle(g):
    assert is_descending(g) == descending(g.arity, to_dict(g))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.lists(graphs(n), min_size=1, max_size=6)))
def test_monitor_agrees_with_prog(seq):
    n = seq[0].arity
    dicts = [to_dict(g) for g in seq]
    expected = prog_oracle(n, dicts)
    assert prog(seq) == expected
    res, k = monitor_fold(seq, n)
    assert isinstance(res, ViolationReport) == (not expected)
    prefix = rejection_prefix(n, dicts)
    assert first_violation(seq) == prefix
    if prefix is not None:
        assert k == prefix == res.call_index


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.lists(graphs(n), min_size=1, max_size=4)))
def test_scp_closure_contains_generators_and_is_closed(gs):
    res = scp_holds(gs)
    ok = all(prog_oracle(gs[0].arity, [to_dict(g) for g in seq]) for seq in _words(gs, 3))
    if res is True:
        assert ok
    else:
        assert not is_descending(res)


def _words(gs, length):
    out = [[g] for g in gs]
    frontier = out
    for _ in range(length - 1):
        frontier = [w + [g] for w in frontier for g in gs]
        out += frontier
    return out


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.lists(graphs(n), min_size=1, max_size=4)))
def test_layer_oracle_matches_path_oracle(seq):
    from oracles import compose_layers
    n = seq[0].arity
    dicts = [to_dict(g) for g in seq]
    assert compose_layers(n, dicts) == compose_paths(n, dicts)
