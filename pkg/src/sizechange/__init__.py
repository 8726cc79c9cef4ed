"""Size-change termination: dynamic monitoring and static verification for a
small higher-order language."""

from .core import (
    DEFAULT_ORDER, NIL, BlameLabel, Clo, ClosureKey, Order, Pair, RTError, SCError, TermClo,
    Timeout, Val, precedes,
)
from .interp import (
    ALWAYS, OFF, Counters, Policy, eval_monitored, eval_standard, eval_traced, ext, run_program,
    upd, wrap_termc,
)
from .reader import ReaderError, load_program, parse_expr, parse_program, print_value
from .scgraph import (
    NONASC, STRICT, SCGraph, ViolationReport, build_graph, compose, graph, is_descending,
    is_idempotent, monitor_init, monitor_step, prog, scp_holds,
)

__version__ = "0.1.0"
