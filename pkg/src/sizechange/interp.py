"""Abstract machine for the standard, monitored and call-sequence semantics.

The machine keeps an explicit continuation stack so tail calls push nothing.
The size-change table is a dict mutated in place; every continuation frame
records the old entries of keys written while it is the top frame (and the
whole table if it was replaced), and undoes them when it resumes.  That is
the functional threading of the table made iterative: after a non-tail call
returns, its caller sees exactly the table it had before the call.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .core import (
    DEFAULT_ORDER, NIL, PROGRAM_BLAME, App, BlameLabel, Clo, ClosureKey, If0, Lam, Lit, Order,
    Prim, PrimRef, RTError, RuntimeFault, SCError, TermC, TermClo, Timeout, Val, Var,
)
from .primitives import PRIMITIVES, apply_primitive, primitive_cost
from .reader import Program, print_value
from .scgraph import (
    MonitorState, MonitorStats, SCGraph, ViolationReport, build_graph, monitor_fold, monitor_init,
    monitor_step,
)

MODES = ("standard", "monitor", "monitor-whole", "trace", "plain")

DEFAULT_STANDARD_STEPS = 10 ** 8


# ---------------------------------------------------------------------------
#  Policies and table entries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Policy:
    """When to build and check a graph for a closure's n-th call.

    ``always`` checks every call; ``backoff`` with base b checks at calls
    b, 2b, 4b, ... (the first call only records arguments); ``off`` never
    touches the table.
    """

    kind: str = "always"
    base: int = 1

    def __post_init__(self):
        if self.kind not in ("always", "backoff", "off"):
            raise ValueError(f"unknown policy {self.kind}")
        if self.base < 1:
            raise ValueError("backoff base must be >= 1")

    def checks_at(self, count: int) -> bool:
        if count < 2 or self.kind == "off":
            return False
        if self.kind == "always":
            return True
        if count % self.base:
            return False
        q = count // self.base
        return q & (q - 1) == 0

    @classmethod
    def parse(cls, text: str) -> "Policy":
        text = text.strip().lower()
        if text in ("always", "off"):
            return cls(text)
        m = re.fullmatch(r"backoff(?::(\d+))?", text)
        if m:
            return cls("backoff", int(m.group(1) or 1))
        raise ValueError(f"bad policy {text!r}; use always, off or backoff:<b>")

    def __str__(self):
        return f"backoff:{self.base}" if self.kind == "backoff" else self.kind


ALWAYS = Policy("always")
OFF = Policy("off")


class Entry:
    """One size-change table row: latest arguments, monitor state, per-key call
    count, the arguments at the last checkpoint, and (trace mode) the raw graph
    sequence as a linked list ``(graph, rest)`` newest first."""

    __slots__ = ("args", "monitor", "count", "checkpoint", "raw")

    def __init__(self, args, monitor, count, checkpoint, raw=None):
        self.args = args
        self.monitor = monitor
        self.count = count
        self.checkpoint = checkpoint
        self.raw = raw

    def graphs(self) -> list[SCGraph]:
        out = []
        r = self.raw
        while r is not None:
            out.append(r[0])
            r = r[1]
        out.reverse()
        return out

    def __repr__(self):
        return f"Entry(args={[print_value(a) for a in self.args]}, n={self.count})"


def _fresh_entry(args) -> Entry:
    return Entry(args, monitor_init(len(args)), 1, args)


def _updated(entry: Entry, key, args, policy: Policy, order: Order, stats=None):
    """The entry after one more call, or a ViolationReport."""
    if len(args) != len(entry.args):
        raise RuntimeFault("arity", f"{key}: table holds {len(entry.args)} arguments, got {len(args)}")
    count = entry.count + 1
    if not policy.checks_at(count):
        return Entry(args, entry.monitor, count, entry.checkpoint)
    g = build_graph(entry.checkpoint, args, order.compare)
    if stats is not None:
        stats.graph_built(key, g)
    st = monitor_step(entry.monitor, g, stats.monitor if stats is not None else None)
    if type(st) is ViolationReport:
        return ViolationReport(st.graph, key, count)
    return Entry(args, st, count, args)


def upd(m: dict, key: ClosureKey, args, policy: Policy = ALWAYS, order: Order = DEFAULT_ORDER):
    """Functional table update: a new table, or a ViolationReport."""
    args = tuple(args)
    entry = m.get(key)
    if entry is None:
        out = dict(m)
        out[key] = _fresh_entry(args)
        return out
    new = _updated(entry, key, args, policy, order)
    if type(new) is ViolationReport:
        return new
    out = dict(m)
    out[key] = new
    return out


def _extended(entry: Entry, args, order: Order, stats=None) -> Entry:
    if len(args) != len(entry.args):
        raise RuntimeFault("arity", f"table holds {len(entry.args)} arguments, got {len(args)}")
    g = build_graph(entry.args, args, order.compare)
    if stats is not None:
        stats.graph_built(None, g)
    return Entry(args, entry.monitor, entry.count + 1, args, (g, entry.raw))


def ext(m: dict, key: ClosureKey, args, order: Order = DEFAULT_ORDER) -> dict:
    """Like :func:`upd` but never fails; records the raw graph sequence."""
    args = tuple(args)
    out = dict(m)
    entry = m.get(key)
    out[key] = _fresh_entry(args) if entry is None else _extended(entry, args, order)
    return out


def entry_prog(entry: Entry) -> bool:
    """Whether the recorded raw graph sequence satisfies the size-change check."""
    seq = entry.graphs()
    if not seq:
        return True
    res, _ = monitor_fold(seq, len(entry.args))
    return not isinstance(res, ViolationReport)


def wrap_termc(v, blame: BlameLabel):
    """Attach a termination contract.  Only closures are wrapped; wrapping an
    already-wrapped closure changes nothing."""
    if type(v) is Clo:
        return TermClo(v, blame)
    return v


# ---------------------------------------------------------------------------
#  Instrumentation
# ---------------------------------------------------------------------------


class Counters:
    """Deterministic cost accounting.

    ``steps`` counts machine transitions (one per expression node).  ``work``
    adds the cost of primitive arithmetic (per 64-bit word) and of
    monitoring (argument comparisons, graph compositions and descent
    checks), so monitored/standard work ratios reflect what monitoring adds.
    """

    def __init__(self, log_graphs: bool = False, track_keys: bool = False):
        self.steps = 0
        self.prim_work = 0
        self.applications = 0
        self.monitored_calls = 0
        self.checks = 0
        self.graphs_built = 0
        self.max_frames = 0
        self.max_table = 0
        self.monitor = MonitorStats()
        self.compare_work = 0
        self.graph_log: Optional[list] = [] if log_graphs else None
        self.keys: Optional[set] = set() if track_keys else None

    def graph_built(self, key, g: SCGraph):
        self.graphs_built += 1
        self.compare_work += max(1, g.arity * g.arity)
        if self.graph_log is not None:
            self.graph_log.append((key, g))

    @property
    def monitor_work(self) -> int:
        return (
            self.monitored_calls
            + self.compare_work
            + self.monitor.compositions * 4
            + self.monitor.desc_checks * 2
        )

    @property
    def work(self) -> int:
        return self.steps + self.prim_work + self.monitor_work

    def to_json(self) -> dict:
        return {
            "steps": self.steps,
            "work": self.work,
            "applications": self.applications,
            "monitored_calls": self.monitored_calls,
            "checks": self.checks,
            "graphs_built": self.graphs_built,
            "max_frames": self.max_frames,
            "max_table": self.max_table,
        }


# ---------------------------------------------------------------------------
#  Frames
# ---------------------------------------------------------------------------


class Frame:
    __slots__ = ("saved", "table", "flag", "blame", "snap")


class BranchFrame(Frame):
    __slots__ = ("then", "orelse", "env")


class ArgsFrame(Frame):
    __slots__ = ("app", "vals", "idx", "env")


class WrapFrame(Frame):
    __slots__ = ("label",)


_MISSING = object()


@dataclass
class Outcome:
    """Result of running a program: the final answer (of the last top-level
    expression, or of the first form that failed), every top-level answer,
    and instrumentation."""

    answer: Any
    answers: list
    counters: Counters
    snapshots: Optional[list] = None
    globals: dict = field(default_factory=dict)


class StepLimit(Exception):
    pass


class Machine:
    def __init__(
        self,
        program: Program,
        mode: str = "standard",
        policy: Policy = ALWAYS,
        order: Order = DEFAULT_ORDER,
        max_steps: Optional[int] = None,
        counters: Optional[Counters] = None,
        check_extents: bool = False,
        measure_work: bool = False,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.program = program
        self.mode = mode
        self.policy = policy
        self.order = order
        if max_steps is None and mode in ("standard", "plain", "trace"):
            max_steps = DEFAULT_STANDARD_STEPS
        self.max_steps = max_steps
        self.counters = counters or Counters()
        self.check_extents = check_extents
        self.measure_work = measure_work
        self.globals: dict = {}
        self.snapshots: Optional[list] = [] if mode == "trace" else None
        self._prims = {name: Prim(name) for name in PRIMITIVES}
        self._compiled: dict = {}

    def _compile_simple(self, e):
        """Turn a simple expression into a Python function of the environment."""
        t = type(e)
        globals_ = self.globals
        if t is Var:
            name = e.name

            def f(env):
                v = env.get(name, _MISSING)
                if v is _MISSING:
                    v = globals_.get(name, _MISSING)
                    if v is _MISSING:
                        raise RuntimeFault("unbound", f"{name} is not defined yet")
                return v
        elif t is Lit:
            value = e.value

            def f(env):
                return value
        elif t is Lam:
            lam = e
            free = e.free

            def f(env):
                return Clo(lam, {v: env[v] for v in free})
        elif t is PrimRef:
            prim = self._prims[e.name]

            def f(env):
                return prim
        elif t is App:
            name = e.fn.name
            arity, fn = PRIMITIVES[name]
            parts = [self._compile_simple(a) for a in e.args]
            c = self.counters
            if len(parts) != arity:
                n = len(parts)

                def f(env):
                    for p in parts:
                        p(env)
                    raise RuntimeFault("arity", f"{name}: expects {arity} argument(s), got {n}")
            elif self.measure_work:
                def f(env):
                    args = [p(env) for p in parts]
                    c.prim_work += primitive_cost(name, args)
                    return fn(*args)
            elif arity == 2:
                a, b = parts

                def f(env):
                    return fn(a(env), b(env))
            elif arity == 1:
                (a,) = parts

                def f(env):
                    return fn(a(env))
            else:
                def f(env):
                    return fn(*[p(env) for p in parts])
        else:
            raise AssertionError(f"not simple: {e!r}")
        self._compiled[e] = f
        return f

    # -- driver ------------------------------------------------------------

    def run(self) -> Outcome:
        answers = []
        final = None
        for kind, name, expr in self.program.order:
            ans = self.eval_expr(expr)
            if kind == "define":
                if type(ans) is Val:
                    self.globals[name] = ans.value
                    continue
                final = ans
                break
            answers.append(ans)
            final = ans
            if type(ans) is not Val:
                break
        return Outcome(final, answers, self.counters, self.snapshots, self.globals)

    def eval_expr(self, expr, env=None):
        try:
            return self._run(expr, env or {})
        except RuntimeFault as exc:
            return RTError(exc.kind, exc.message)
        except StepLimit:
            return Timeout(self.counters.steps)

    # -- table updates -----------------------------------------------------

    def _log(self, kont, table, key):
        if not kont:
            return
        fr = kont[-1]
        if fr.table is not None:
            return
        s = fr.saved
        if s is None:
            s = fr.saved = {}
        if key not in s:
            s[key] = table.get(key, _MISSING)

    def _monitor_call(self, table, kont, key, args):
        """upd on the live table; returns a ViolationReport or None."""
        c = self.counters
        c.monitored_calls += 1
        if c.keys is not None:
            c.keys.add(key)
        entry = table.get(key)
        if entry is None:
            self._log(kont, table, key)
            table[key] = _fresh_entry(args)
            if len(table) > c.max_table:
                c.max_table = len(table)
            return None
        if self.policy.checks_at(entry.count + 1):
            c.checks += 1
        new = _updated(entry, key, args, self.policy, self.order, c)
        if type(new) is ViolationReport:
            return new
        self._log(kont, table, key)
        table[key] = new
        return None

    def _trace_call(self, table, kont, key, args):
        c = self.counters
        c.monitored_calls += 1
        if c.keys is not None:
            c.keys.add(key)
        entry = table.get(key)
        self._log(kont, table, key)
        table[key] = _fresh_entry(args) if entry is None else _extended(entry, args, self.order, c)
        if len(table) > c.max_table:
            c.max_table = len(table)
        self.snapshots.append(dict(table))

    # -- the machine ---------------------------------------------------------

    def _run(self, expr, env):
        c = self.counters
        mode = self.mode
        whole = mode == "monitor-whole"
        contracts = mode in ("standard", "monitor")
        tracing = mode == "trace"
        plain = mode == "plain"
        if mode == "standard":
            policy_active = True
        else:
            policy_active = self.policy.kind != "off"
        max_steps = self.max_steps if self.max_steps is not None else float("inf")
        globals_ = self.globals
        prims = self._prims
        check_extents = self.check_extents
        monitor_call = self._monitor_call
        trace_call = self._trace_call
        measure = self.measure_work

        table: dict = {}
        flag = False
        blame = PROGRAM_BLAME
        kont: list = []
        if tracing:
            self.snapshots.append({})

        steps = c.steps

        compiled = self._compiled
        compile_simple = self._compile_simple

        def simple(e, env):
            f = compiled.get(e)
            if f is None:
                f = compile_simple(e)
            return f(env)

        def push(fr):
            fr.saved = None
            fr.table = None
            fr.flag = flag
            fr.blame = blame
            if check_extents:
                fr.snap = (dict(table), flag, blame)
            kont.append(fr)
            if len(kont) > c.max_frames:
                c.max_frames = len(kont)

        EVAL, RET, APPLY = 0, 1, 2
        state = EVAL
        ctrl = expr
        val = None
        fval = None
        argv = None
        app_monitored = True

        try:
            while True:
                steps += 1
                if steps >= max_steps:
                    raise StepLimit()
                if state == EVAL:
                    e = ctrl
                    if e.simple:
                        val = simple(e, env)
                        steps += e.size - 1
                        state = RET
                        continue
                    t = type(e)
                    if t is App:
                        fn = e.fn
                        args = e.args
                        vals = []
                        idx = 0
                        parts = (fn,) + args
                        n = len(parts)
                        while idx < n and parts[idx].simple:
                            vals.append(simple(parts[idx], env))
                            steps += parts[idx].size
                            idx += 1
                        if idx == n:
                            fval = vals[0]
                            argv = vals[1:]
                            app_monitored = e.monitored
                            state = APPLY
                            continue
                        fr = ArgsFrame()
                        fr.app = e
                        fr.vals = vals
                        fr.idx = idx
                        fr.env = env
                        push(fr)
                        ctrl = parts[idx]
                        continue
                    if t is If0:
                        test = e.test
                        if test.simple:
                            v = simple(test, env)
                            steps += test.size
                            ctrl = e.then if (type(v) is int and v == 0) else e.orelse
                            continue
                        fr = BranchFrame()
                        fr.then = e.then
                        fr.orelse = e.orelse
                        fr.env = env
                        push(fr)
                        ctrl = test
                        continue
                    if t is TermC:
                        fr = WrapFrame()
                        fr.label = e.blame
                        push(fr)
                        ctrl = e.body
                        continue
                    raise AssertionError(f"unknown expression {e!r}")

                if state == RET:
                    if not kont:
                        return Val(val)
                    fr = kont.pop()
                    if fr.saved is not None or fr.table is not None:
                        t_ = fr.table if fr.table is not None else table
                        saved = fr.saved
                        if saved:
                            for k, old in saved.items():
                                if old is _MISSING:
                                    t_.pop(k, None)
                                else:
                                    t_[k] = old
                        table = t_
                    flag = fr.flag
                    blame = fr.blame
                    if check_extents and fr.snap != (table, flag, blame):
                        raise AssertionError("table extent discipline violated")
                    tf = type(fr)
                    if tf is BranchFrame:
                        ctrl = fr.then if (type(val) is int and val == 0) else fr.orelse
                        env = fr.env
                        state = EVAL
                        continue
                    if tf is ArgsFrame:
                        e = fr.app
                        env = fr.env
                        vals = fr.vals
                        vals.append(val)
                        parts = (e.fn,) + e.args
                        n = len(parts)
                        idx = fr.idx + 1
                        while idx < n and parts[idx].simple:
                            vals.append(simple(parts[idx], env))
                            steps += parts[idx].size
                            idx += 1
                        if idx == n:
                            fval = vals[0]
                            argv = vals[1:]
                            app_monitored = e.monitored
                            state = APPLY
                            continue
                        fr.idx = idx
                        push(fr)
                        ctrl = parts[idx]
                        state = EVAL
                        continue
                    # WrapFrame
                    val = wrap_termc(val, fr.label)
                    continue

                # APPLY
                tf = type(fval)
                if tf is Prim:
                    if measure:
                        c.prim_work += primitive_cost(fval.name, argv)
                    val = apply_primitive(fval.name, argv)
                    state = RET
                    continue
                if tf is Clo:
                    clo = fval
                    guarded = False
                elif tf is TermClo:
                    clo = fval.inner
                    guarded = True
                else:
                    raise RuntimeFault("apply-non-function", f"cannot apply {print_value(fval)}")
                lam = clo.lam
                params = lam.params
                if len(argv) != len(params):
                    raise RuntimeFault(
                        "arity", f"{lam.label} expects {len(params)} argument(s), got {len(argv)}"
                    )
                c.applications += 1
                if app_monitored and not plain:
                    report = None
                    if tracing:
                        trace_call(table, kont, clo.key(), tuple(argv))
                    elif whole:
                        if guarded:
                            blame = fval.blame
                        if policy_active:
                            report = monitor_call(table, kont, clo.key(), tuple(argv))
                    elif contracts:
                        if guarded:
                            if not flag:
                                if kont and kont[-1].table is None:
                                    kont[-1].table = table
                                table = {}
                                flag = True
                            blame = fval.blame
                        if flag and policy_active:
                            report = monitor_call(table, kont, clo.key(), tuple(argv))
                    if report is not None:
                        return SCError(blame, report)
                env = dict(clo.env)
                for p, a in zip(params, argv):
                    env[p] = a
                ctrl = lam.body
                state = EVAL
        finally:
            c.steps = steps


# ---------------------------------------------------------------------------
#  Entry points
# ---------------------------------------------------------------------------


def run_program(program: Program, mode: str = "standard", policy: Policy = ALWAYS,
                order: Order = DEFAULT_ORDER, max_steps: Optional[int] = None,
                counters: Optional[Counters] = None, check_extents: bool = False,
                measure_work: bool = False) -> Outcome:
    return Machine(program, mode, policy, order, max_steps, counters, check_extents, measure_work).run()


def eval_standard(program: Program, max_steps: int = DEFAULT_STANDARD_STEPS, contracts: bool = True):
    """Standard semantics.  Contract-wrapped closures still seed a fresh
    table when applied; ``contracts=False`` erases contracts entirely."""
    mode = "standard" if contracts else "plain"
    return run_program(program, mode, max_steps=max_steps).answer


def eval_monitored(program: Program, policy: Policy = ALWAYS, order: Order = DEFAULT_ORDER,
                   whole: bool = False, max_steps: Optional[int] = None):
    mode = "monitor-whole" if whole else "monitor"
    return run_program(program, mode, policy, order, max_steps).answer


@dataclass
class TraceResult:
    answer: Any
    snapshots: list

    def verdicts(self) -> list[dict]:
        """Per snapshot: key label -> whether its raw sequence passes."""
        return [{k: entry_prog(e) for k, e in snap.items()} for snap in self.snapshots]

    def any_failure(self) -> bool:
        return any(not ok for v in self.verdicts() for ok in v.values())


def eval_traced(program: Program, max_steps: int = DEFAULT_STANDARD_STEPS,
                order: Order = DEFAULT_ORDER) -> TraceResult:
    out = run_program(program, "trace", order=order, max_steps=max_steps)
    return TraceResult(out.answer, out.snapshots)


# ---------------------------------------------------------------------------
#  Reporting
# ---------------------------------------------------------------------------


def answer_to_json(ans) -> dict:
    if type(ans) is Val:
        return {"kind": "value", "value": print_value(ans.value)}
    if type(ans) is RTError:
        return {"kind": "rt-error", "error": ans.kind_of_error, "message": ans.message}
    if type(ans) is SCError:
        rep = ans.witness
        key = rep.closure
        blame = ans.blame
        return {
            "kind": "sc-error",
            "blame": blame.tag if blame is not None else None,
            "blame_position": blame.position if blame is not None else "",
            "closure": getattr(key, "label", key),
            "graph": rep.graph.to_json(),
            "call_index": rep.call_index,
        }
    if type(ans) is Timeout:
        return {"kind": "timeout", "steps": ans.steps}
    if ans is None:
        return {"kind": "value", "value": None}
    raise TypeError(f"not an answer: {ans!r}")


def describe_answer(ans) -> str:
    if type(ans) is Val:
        return print_value(ans.value)
    if type(ans) is RTError:
        return f"run-time error ({ans.kind_of_error}): {ans.message}"
    if type(ans) is SCError:
        rep = ans.witness
        label = getattr(rep.closure, "label", rep.closure)
        return (f"size-change violation: blaming {ans.blame}; closure {label} "
                f"at call {rep.call_index}; graph {rep.graph.to_text()}")
    if type(ans) is Timeout:
        return f"timeout after {ans.steps} steps"
    return ""
