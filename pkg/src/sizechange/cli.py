"""Command-line front end: ``sct run|verify|trace|bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from .bench import AnswerMismatch, run_bench
from .core import RTError, SCError, Timeout, Val
from .interp import (
    ALWAYS, Counters, Policy, answer_to_json, describe_answer, entry_prog, run_program,
)
from .reader import Program, ReaderError, load_program, print_value
from .verify import DEFAULT_FUEL, Refuted, Unknown, Verified, result_to_json, verify_termination

EXIT_OK = 0
EXIT_IO = 1
EXIT_RT = 2
EXIT_SC = 3
EXIT_REFUTED = 4
EXIT_UNKNOWN = 5
EXIT_TIMEOUT = 6

TRACE_STEPS = 10 ** 6


def exit_code(answer) -> int:
    """Exit status as a function of the answer kind only."""
    t = type(answer)
    if t is Val or answer is None:
        return EXIT_OK
    if t is RTError:
        return EXIT_RT
    if t is SCError:
        return EXIT_SC
    if t is Timeout:
        return EXIT_TIMEOUT
    raise TypeError(f"not an answer: {answer!r}")


def _load(path: str) -> Program:
    return load_program(path)


def _emit(obj, out):
    out.write(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def cmd_run(args, out) -> int:
    if args.mode == "trace":
        return cmd_trace(args, out)
    program = _load(args.file)
    mode = args.mode
    max_steps = args.max_steps
    counters = Counters()
    outcome = run_program(program, mode, args.policy, max_steps=max_steps, counters=counters)
    answer = outcome.answer
    if args.json:
        report = answer_to_json(answer)
        report["answers"] = [answer_to_json(a) for a in outcome.answers]
        if args.counters:
            report["counters"] = counters.to_json()
        _emit(report, out)
    else:
        for a in outcome.answers:
            out.write(describe_answer(a) + "\n")
        if args.counters:
            for k, v in counters.to_json().items():
                out.write(f"; {k}: {v}\n")
    return exit_code(answer)


def _default_entry(program: Program) -> Optional[str]:
    from .core import Lam
    for kind, name, expr in program.order:
        if kind == "define" and isinstance(expr, Lam):
            return name
    return None


def cmd_verify(args, out) -> int:
    program = _load(args.file)
    entry = args.entry or _default_entry(program)
    if entry is None:
        raise ReaderError("no function to verify; pass --entry", 0, 0, program.source)
    res = verify_termination(program, entry, args.fuel)
    if args.json:
        _emit(result_to_json(res), out)
    else:
        out.write(f"{entry}: {res.result}\n")
        for label in sorted(res.graphs):
            for g in sorted(res.graphs[label]):
                out.write(f"  {label}: {g.to_text()}\n")
        if isinstance(res, Refuted):
            out.write(f"  witness: {res.witness.to_text()}\n")
        if isinstance(res, Unknown):
            out.write(f"  reason: {res.reason} {res.detail}\n")
    if isinstance(res, Verified):
        return EXIT_OK
    if isinstance(res, Refuted):
        return EXIT_REFUTED
    return EXIT_UNKNOWN


def trace_report(program: Program, max_steps: int = TRACE_STEPS) -> tuple[dict, object]:
    outcome = run_program(program, "trace", max_steps=max_steps)
    snapshots = []
    any_fail = False
    for snap in outcome.snapshots:
        entries = []
        for key, entry in snap.items():
            ok = entry_prog(entry)
            any_fail |= not ok
            entries.append({
                "closure": key.label,
                "args": [print_value(a) for a in entry.args],
                "graphs": [g.to_json() for g in entry.graphs()],
                "prog": ok,
            })
        snapshots.append({"entries": entries})
    report = answer_to_json(outcome.answer)
    report["answers"] = [answer_to_json(a) for a in outcome.answers]
    report["snapshots"] = snapshots
    report["all_prog"] = not any_fail
    return report, outcome.answer


def cmd_trace(args, out) -> int:
    program = _load(args.file)
    report, answer = trace_report(program, args.max_steps or TRACE_STEPS)
    _emit(report, out)
    return exit_code(answer)


def cmd_bench(args, out) -> int:
    policies = args.policies or [ALWAYS]
    try:
        report = run_bench(args.dir, policies, args.max_steps or 10 ** 7)
    except AnswerMismatch as exc:
        sys.stderr.write(f"sct: {exc}\n")
        return EXIT_RT
    csv_text = report.to_csv()
    if args.csv:
        Path(args.csv).write_text(csv_text)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.to_json(), indent=2) + "\n")
    if args.json:
        _emit(report.to_json(), out)
    else:
        out.write(csv_text)
    return EXIT_OK


def _policy(text: str) -> Policy:
    try:
        return Policy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sct", description="Size-change termination monitor and verifier.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--max-steps", type=int, default=None, metavar="N")

    r = sub.add_parser("run", help="evaluate a program")
    r.add_argument("file")
    r.add_argument("--mode", choices=["standard", "monitor", "monitor-whole", "trace"], default="monitor")
    r.add_argument("--policy", type=_policy, default=ALWAYS, help="always | backoff:<b> | off")
    r.add_argument("--counters", action="store_true", help="report instrumentation counters")
    common(r)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="static size-change verification")
    v.add_argument("file")
    v.add_argument("--entry", metavar="NAME")
    v.add_argument("--fuel", type=int, default=DEFAULT_FUEL, metavar="K")
    common(v)
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("trace", help="record call-sequence snapshots (JSON)")
    t.add_argument("file")
    common(t)
    t.set_defaults(func=cmd_trace)

    b = sub.add_parser("bench", help="monitoring overhead over a directory of manifests")
    b.add_argument("dir")
    b.add_argument("--policy", dest="policies", type=_policy, action="append",
                   help="repeatable; default always")
    b.add_argument("--csv", metavar="PATH", help="also write CSV here")
    b.add_argument("--json-out", metavar="PATH", help="also write JSON here")
    common(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    logging.basicConfig(level=logging.WARNING, format="sct: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except ReaderError as exc:
        sys.stderr.write(f"sct: parse error: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"sct: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
