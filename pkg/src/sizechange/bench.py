"""Benchmark harness: run programs standard and monitored, compare work.

A manifest is a JSON file ``{"file": "sum.sct", "inputs": ["(sum 300)"]}``;
``file`` is relative to the manifest.  Each input expression replaces the
program's top-level expressions.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

from .core import Val
from .interp import ALWAYS, Counters, Policy, run_program
from .reader import load_program, parse_expr, print_value

log = logging.getLogger(__name__)

BENCH_STEPS = 10 ** 7


@dataclass
class BenchRow:
    program: str
    input: str
    policy: str
    answer: str
    steps: int
    work_standard: int
    work_monitored: int
    ratio: float
    wall_standard: float
    wall_monitored: float
    checks: int
    graphs_built: int


@dataclass
class BenchReport:
    rows: list
    excluded: list  # (program, input, reason)

    def ratio(self, program: str, policy: str = "always") -> float:
        for r in self.rows:
            if r.program == program and r.policy == policy:
                return r.ratio
        raise KeyError((program, policy))

    def to_json(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "excluded": [{"program": p, "input": i, "reason": why} for p, i, why in self.excluded],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = list(BenchRow.__dataclass_fields__)
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(asdict(r))
        return buf.getvalue()


class AnswerMismatch(AssertionError):
    pass


def _timed(program, mode, policy=ALWAYS, max_steps=BENCH_STEPS):
    c = Counters()
    t0 = time.perf_counter()
    out = run_program(program, mode, policy, max_steps=max_steps, counters=c, measure_work=True)
    return out.answer, c, time.perf_counter() - t0


def bench_program(path, inputs: Iterable[str], policies: Iterable[Policy],
                  max_steps: int = BENCH_STEPS) -> BenchReport:
    base = load_program(path)
    name = Path(path).stem
    rows, excluded = [], []
    for text in inputs:
        program = base.with_main([parse_expr(text, base)])
        std, c_std, wall_std = _timed(program, "plain", max_steps=max_steps)
        if type(std) is not Val:
            log.warning("excluding %s %s: standard run ended with %s", name, text, std.kind)
            excluded.append((name, text, std.kind))
            continue
        for pol in policies:
            mon, c_mon, wall_mon = _timed(program, "monitor-whole", pol, max_steps=max_steps)
            if type(mon) is not Val:
                log.warning("excluding %s %s under %s: monitored run ended with %s", name, text, pol, mon.kind)
                excluded.append((name, text, mon.kind))
                continue
            if print_value(mon.value) != print_value(std.value):
                raise AnswerMismatch(f"{name} {text}: monitored {print_value(mon.value)} != {print_value(std.value)}")
            rows.append(BenchRow(
                program=name, input=text, policy=str(pol), answer=print_value(std.value),
                steps=c_std.steps, work_standard=c_std.work, work_monitored=c_mon.work,
                ratio=c_mon.work / c_std.work, wall_standard=wall_std, wall_monitored=wall_mon,
                checks=c_mon.checks, graphs_built=c_mon.graphs_built,
            ))
    return BenchReport(rows, excluded)


def load_manifest(path) -> tuple[Path, list[str]]:
    path = Path(path)
    data = json.loads(path.read_text())
    return path.parent / data["file"], list(data["inputs"])


def run_bench(directory, policies: Optional[Iterable[Policy]] = None,
              max_steps: int = BENCH_STEPS) -> BenchReport:
    """Run every ``*.json`` manifest in ``directory``."""
    policies = list(policies or [ALWAYS])
    rows, excluded = [], []
    for manifest in sorted(Path(directory).glob("*.json")):
        program, inputs = load_manifest(manifest)
        rep = bench_program(program, inputs, policies, max_steps)
        rows += rep.rows
        excluded += rep.excluded
    return BenchReport(rows, excluded)
