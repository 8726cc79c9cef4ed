import json

from conftest import CORPUS
from sizechange.bench import bench_program, load_manifest, run_bench
from sizechange.interp import ALWAYS, Policy


def test_manifest_resolves_relative_file():
    path, inputs = load_manifest(CORPUS / "bench" / "sum.json")
    assert path.exists() and inputs


def test_rows_have_matching_answers():
    rep = bench_program(CORPUS / "fact.sct", ["(fact 10)"], [ALWAYS, Policy("backoff", 2)])
    assert [r.answer for r in rep.rows] == ["3628800", "3628800"]
    assert all(r.ratio >= 1 for r in rep.rows)
    assert rep.rows[1].checks < rep.rows[0].checks


def test_non_value_inputs_excluded(tmp_path):
    rep = bench_program(CORPUS / "fact.sct", ["(car 1)"], [ALWAYS])
    assert not rep.rows and rep.excluded[0][2] == "rt-error"


def test_run_bench_directory(tmp_path):
    (tmp_path / "p.sct").write_text("(define (f n) (if (= n 0) 0 (f (- n 1))))")
    (tmp_path / "p.json").write_text(json.dumps({"file": "p.sct", "inputs": ["(f 20)"]}))
    rep = run_bench(tmp_path)
    assert rep.ratio("p") > 1
    assert "p,(f 20),always" in rep.to_csv()
