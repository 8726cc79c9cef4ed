from pathlib import Path

import pytest
from hypothesis import strategies as st

from sizechange import load_program
from sizechange.scgraph import NONASC, STRICT, SCGraph

CORPUS = Path(__file__).resolve().parents[1] / "src" / "sizechange" / "corpus"
SCHEMAS = Path(__file__).resolve().parents[1] / "src" / "sizechange" / "schemas"


@pytest.fixture
def corpus():
    return lambda name: load_program(CORPUS / f"{name}.sct")


@st.composite
def graphs(draw, arity=None, max_arity=4):
    n = draw(st.integers(1, max_arity)) if arity is None else arity
    cells = draw(st.lists(st.sampled_from([None, NONASC, STRICT]), min_size=n * n, max_size=n * n))
    arcs = [(i, c, j) for (i, j), c in zip(((i, j) for i in range(n) for j in range(n)), cells) if c]
    return SCGraph(n, arcs)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
