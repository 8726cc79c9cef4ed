"""S-expression reader and desugaring into core expressions.

Surface language (``.sct`` files)::

    (define (f x ...) body)      (define name expr)
    (lambda (x ...) body)        also spelled λ
    (let ([x e] ...) body)       (let* ...)
    (if c a b)  (if0 c a b)  (cond [c e] ... [else e])
    (and e ...)  (or e ...)  (list e ...)  'datum  "string"
    (terminating/c e ["label"])  also spelled term/c
    (assume (f (natural m) (list l) ...))    verifier precondition

Booleans follow the core truth encoding: 0 is true, 1 is false.
Characters read as their integer code points and strings as lists of them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .core import (
    NIL, App, BlameLabel, Clo, Expr, If0, Lam, TermC, Lit, NilType, Pair, Prim, PrimRef, TermClo, Var,
    make_app, make_if0, make_termc,
)
from .primitives import PRIMITIVES

TRUE = 0
FALSE = 1


class ReaderError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0, source: str = ""):
        where = f"{source}:{line}:{col}" if source else f"{line}:{col}"
        super().__init__(f"{where}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
#  Surface forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sym:
    name: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Char:
    code: int


@dataclass(frozen=True)
class Str:
    text: str


@dataclass
class SList:
    items: list
    line: int = 0
    col: int = 0

    def __eq__(self, other):
        return isinstance(other, SList) and self.items == other.items

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)

    def __repr__(self):
        return "(" + " ".join(map(repr, self.items)) + ")"


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>;[^\n]*)
  | (?P<open>[(\[])
  | (?P<close>[)\]])
  | (?P<quote>'|`|,@|,)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<char>\#\\(?:[A-Za-z]+|.))
  | (?P<atom>[^\s()\[\]'`,";]+)
    """,
    re.VERBOSE,
)

_CHAR_NAMES = {"space": 32, "newline": 10, "tab": 9, "nul": 0, "null": 0, "return": 13}
_QUOTE_NAMES = {"'": "quote", "`": "quasiquote", ",": "unquote", ",@": "unquote-splicing"}


def _tokenize(text: str, source: str):
    line, line_start = 1, 0
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ReaderError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, source)
        kind = m.lastgroup
        col = pos - line_start + 1
        tok = m.group()
        pos = m.end()
        if kind == "nl":
            line += 1
            line_start = pos
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "string" and "\n" in tok:
            yield kind, tok, line, col
            line += tok.count("\n")
            line_start = m.start() + tok.rfind("\n") + 1
            continue
        yield kind, tok, line, col


def _atom(tok: str, line: int, col: int):
    if re.fullmatch(r"[+-]?\d+", tok):
        return int(tok)
    if tok in ("#t", "#true"):
        return TRUE
    if tok in ("#f", "#false"):
        return FALSE
    return Sym(tok, line, col)


def _char(tok: str, line: int, col: int, source: str) -> Char:
    body = tok[2:]
    if len(body) == 1:
        return Char(ord(body))
    if body.lower() in _CHAR_NAMES:
        return Char(_CHAR_NAMES[body.lower()])
    raise ReaderError(f"unknown character name {tok}", line, col, source)


def _unescape(s: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), s)


def read_program(text: str, source: str = "") -> list:
    """Parse program text into a list of surface forms."""
    root: list = []
    stack: list[tuple[list, str, int, int]] = []
    current = root
    pending_quotes: list[list] = []  # per nesting level: quote prefixes awaiting a datum

    def emit(datum):
        nonlocal current
        prefixes = pending_quotes[-1] if pending_quotes else []
        while prefixes:
            name, ql, qc = prefixes.pop()
            datum = SList([Sym(name, ql, qc), datum], ql, qc)
        current.append(datum)

    pending_quotes.append([])
    for kind, tok, line, col in _tokenize(text, source):
        if kind == "open":
            stack.append((current, tok, line, col))
            current = []
            pending_quotes.append([])
        elif kind == "close":
            if not stack:
                raise ReaderError(f"unexpected {tok!r}", line, col, source)
            if pending_quotes[-1]:
                raise ReaderError("quote prefix without a datum", line, col, source)
            items = current
            current, opener, ol, oc = stack.pop()
            pending_quotes.pop()
            if (opener == "(") != (tok == ")"):
                raise ReaderError(f"mismatched {opener!r} closed by {tok!r}", line, col, source)
            emit(SList(items, ol, oc))
        elif kind == "quote":
            pending_quotes[-1].append((_QUOTE_NAMES[tok], line, col))
        elif kind == "string":
            emit(Str(_unescape(tok[1:-1])))
        elif kind == "char":
            emit(_char(tok, line, col, source))
        else:
            emit(_atom(tok, line, col))
    if stack:
        _, opener, ol, oc = stack[-1]
        raise ReaderError(f"unclosed {opener!r}", ol, oc, source)
    if pending_quotes[-1]:
        raise ReaderError("quote prefix at end of input", 0, 0, source)
    return root


# ---------------------------------------------------------------------------
#  Programs
# ---------------------------------------------------------------------------


@dataclass
class Assumption:
    """Precondition for the verifier: one shape name per parameter."""

    function: str
    shapes: tuple[str, ...]
    params: tuple[str, ...]


@dataclass
class Program:
    globals: dict[str, Expr]
    main: list[Expr]
    source: str = ""
    # top-level evaluation order: ("define", name, expr) or ("expr", None, expr)
    order: list = field(default_factory=list)
    assumptions: dict[str, Assumption] = field(default_factory=dict)
    lambdas: dict[str, Lam] = field(default_factory=dict)

    def with_main(self, mains: list[Expr]) -> "Program":
        order = [item for item in self.order if item[0] == "define"]
        order += [("expr", None, e) for e in mains]
        return Program(dict(self.globals), list(mains), self.source, order, dict(self.assumptions), self.lambdas)


_SHAPES = {"natural", "nat", "integer", "int", "list", "pair", "any", "nonzero-natural", "positive"}

_SPECIAL = {
    "define", "lambda", "λ", "let", "let*", "if", "if0", "cond", "and", "or", "quote", "list",
    "terminating/c", "term/c", "assume", "else",
}


class _Desugarer:
    def __init__(self, source: str):
        self.source = source
        self.globals: dict[str, Expr] = {}
        self.global_names: set[str] = set()
        self.lambdas: dict[str, Lam] = {}
        self.line_counts: dict[int, int] = {}

    def err(self, msg: str, form) -> ReaderError:
        line = getattr(form, "line", 0)
        col = getattr(form, "col", 0)
        return ReaderError(msg, line, col, self.source)

    def fresh_label(self, form) -> str:
        line = getattr(form, "line", 0)
        col = getattr(form, "col", 0)
        seen = self.line_counts.get(line, 0)
        self.line_counts[line] = seen + 1
        base = f"{self.source}:{line}" if self.source else str(line)
        return base if seen == 0 else f"{base}:{col}"

    def position(self, form) -> str:
        base = self.source or "input"
        return f"{base}:{getattr(form, 'line', 0)}:{getattr(form, 'col', 0)}"

    # -- expressions -------------------------------------------------------

    def expr(self, f, scope: frozenset) -> Expr:
        if isinstance(f, bool):
            raise self.err("unexpected boolean", f)
        if isinstance(f, int):
            return Lit(f)
        if isinstance(f, Char):
            return Lit(f.code)
        if isinstance(f, Str):
            return Lit(_string_value(f.text))
        if isinstance(f, Sym):
            return self.var(f, scope)
        if isinstance(f, SList):
            if not f.items:
                raise self.err("empty application", f)
            head = f.items[0]
            if isinstance(head, Sym) and head.name not in scope and head.name in _SPECIAL:
                return self.special(head.name, f, scope)
            fn = self.expr(head, scope)
            args = tuple(self.expr(a, scope) for a in f.items[1:])
            return make_app(fn, args)
        raise self.err(f"unsupported form {f!r}", f)

    def var(self, s: Sym, scope: frozenset) -> Expr:
        name = s.name
        if name in scope or name in self.global_names:
            return Var(name)
        if name in PRIMITIVES:
            return PrimRef(name)
        if name == "else":
            raise self.err("`else` outside cond", s)
        raise self.err(f"unbound variable {name}", s)

    def special(self, name: str, f: SList, scope: frozenset) -> Expr:
        items = f.items
        if name in ("lambda", "λ"):
            if len(items) != 3 or not isinstance(items[1], SList):
                raise self.err("malformed lambda", f)
            return self.lam(items[1], items[2], scope, f)
        if name in ("let", "let*"):
            return self.let(f, scope, sequential=(name == "let*"))
        if name == "if":
            if len(items) != 4:
                raise self.err("if needs test, then and else", f)
            return make_if0(*(self.expr(x, scope) for x in items[1:]))
        if name == "if0":
            if len(items) != 4:
                raise self.err("if0 needs three operands", f)
            return make_if0(*(self.expr(x, scope) for x in items[1:]))
        if name == "cond":
            return self.cond(f, scope)
        if name == "and":
            return self.and_or(items[1:], scope, is_and=True)
        if name == "or":
            return self.and_or(items[1:], scope, is_and=False)
        if name == "quote":
            if len(items) != 2:
                raise self.err("malformed quote", f)
            return Lit(self.datum(items[1]))
        if name == "list":
            out: Expr = Lit(NIL)
            for x in reversed(items[1:]):
                out = make_app(PrimRef("cons"), (self.expr(x, scope), out))
            return out
        if name in ("terminating/c", "term/c"):
            if len(items) not in (2, 3):
                raise self.err("terminating/c takes an expression and an optional label", f)
            pos = self.position(f)
            tag = pos
            if len(items) == 3:
                lab = items[2]
                if isinstance(lab, Str):
                    tag = lab.text
                elif isinstance(lab, Sym):
                    tag = lab.name
                else:
                    raise self.err("terminating/c label must be a string", f)
            return make_termc(self.expr(items[1], scope), BlameLabel(tag, pos))
        if name in ("define", "assume"):
            raise self.err(f"{name} is only allowed at top level", f)
        raise self.err(f"misplaced keyword {name}", f)

    def lam(self, params_form: SList, body_form, scope: frozenset, where) -> Lam:
        params = []
        for p in params_form:
            if not isinstance(p, Sym):
                raise self.err("lambda parameters must be names", p if hasattr(p, "line") else where)
            if p.name in params:
                raise self.err(f"duplicate parameter {p.name}", p)
            params.append(p.name)
        label = self.fresh_label(where)
        body = self.expr(body_form, scope | set(params))
        free = tuple(v for v in _free_vars(body, frozenset(params)) if v in scope)
        lam = Lam(label, tuple(params), body, free)
        self.lambdas[label] = lam
        return lam

    def let(self, f: SList, scope: frozenset, sequential: bool) -> Expr:
        items = f.items
        if len(items) != 3 or not isinstance(items[1], SList):
            raise self.err("malformed let", f)
        bindings = []
        for b in items[1]:
            if not (isinstance(b, SList) and len(b) == 2 and isinstance(b[0], Sym)):
                raise self.err("malformed let binding", b if hasattr(b, "line") else f)
            bindings.append((b[0], b[1]))
        if sequential and len(bindings) > 1:
            inner = SList([Sym("let*", f.line, f.col), SList([SList([a, b]) for a, b in bindings[1:]]), items[2]], f.line, f.col)
            outer = SList([Sym("let", f.line, f.col), SList([SList(list(bindings[0]))]), inner], f.line, f.col)
            return self.let(outer, scope, sequential=False)
        names = [b[0].name for b in bindings]
        if len(set(names)) != len(names):
            raise self.err("duplicate let binding", f)
        args = tuple(self.expr(e, scope) for _, e in bindings)
        lam = self.lam(SList([b[0] for b in bindings]), items[2], scope, f)
        return make_app(lam, args, monitored=False)

    def cond(self, f: SList, scope: frozenset) -> Expr:
        clauses = f.items[1:]
        if not clauses:
            raise self.err("empty cond", f)
        out: Optional[Expr] = None
        for i, cl in enumerate(reversed(clauses)):
            if not (isinstance(cl, SList) and len(cl) == 2):
                raise self.err("cond clause must be [test expr]", cl if hasattr(cl, "line") else f)
            test, rhs = cl.items
            if isinstance(test, Sym) and test.name == "else":
                if i != 0:
                    raise self.err("else must be the last cond clause", cl)
                out = self.expr(rhs, scope)
                continue
            fallthrough = out if out is not None else make_app(PrimRef("void-cond"), ())
            out = make_if0(self.expr(test, scope), self.expr(rhs, scope), fallthrough)
        return out

    def and_or(self, parts: list, scope: frozenset, is_and: bool) -> Expr:
        if not parts:
            return Lit(TRUE if is_and else FALSE)
        exprs = [self.expr(p, scope) for p in parts]
        out = exprs[-1]
        for e in reversed(exprs[:-1]):
            out = make_if0(e, out, Lit(FALSE)) if is_and else make_if0(e, Lit(TRUE), out)
        return out

    def datum(self, d):
        if isinstance(d, bool):
            raise self.err("unexpected boolean", d)
        if isinstance(d, int):
            return d
        if isinstance(d, Char):
            return d.code
        if isinstance(d, Str):
            return _string_value(d.text)
        if isinstance(d, SList):
            items = d.items
            out = NIL
            if len(items) >= 3 and isinstance(items[-2], Sym) and items[-2].name == ".":
                out = self.datum(items[-1])
                items = items[:-2]
            for x in reversed(items):
                out = Pair(self.datum(x), out)
            return out
        raise self.err(f"quoted symbols are not values here: {d!r}", d)

    # -- top level --------------------------------------------------------

    def program(self, forms: list) -> Program:
        # first pass: collect global names so definitions may refer forward
        for f in forms:
            if _is_form(f, "define"):
                name = _define_name(f)
                if name is None:
                    raise self.err("malformed define", f)
                if name.name in self.global_names:
                    raise self.err(f"duplicate define {name.name}", f)
                self.global_names.add(name.name)
        order = []
        mains = []
        assumptions: dict[str, Assumption] = {}
        for f in forms:
            if _is_form(f, "define"):
                name, expr = self.define(f)
                self.globals[name] = expr
                order.append(("define", name, expr))
            elif _is_form(f, "assume"):
                a = self.assume(f)
                assumptions[a.function] = a
            else:
                e = self.expr(f, frozenset())
                mains.append(e)
                order.append(("expr", None, e))
        for fn, a in assumptions.items():
            lam = self.globals.get(fn)
            if not isinstance(lam, Lam):
                raise ReaderError(f"assume names {fn}, which is not a defined function", 0, 0, self.source)
            if len(lam.params) != len(a.shapes):
                raise ReaderError(f"assume for {fn} has {len(a.shapes)} shapes, function takes {len(lam.params)}", 0, 0, self.source)
        return Program(self.globals, mains, self.source, order, assumptions, self.lambdas)

    def define(self, f: SList):
        target = f.items[1]
        if isinstance(target, SList):
            if len(f.items) != 3:
                raise self.err("define body must be a single expression", f)
            name = target.items[0].name
            lam = self.lam(SList(target.items[1:], target.line, target.col), f.items[2], frozenset(), f)
            return name, lam
        if len(f.items) != 3:
            raise self.err("malformed define", f)
        return target.name, self.expr(f.items[2], frozenset())

    def assume(self, f: SList) -> Assumption:
        if len(f.items) != 2 or not isinstance(f.items[1], SList) or not f.items[1].items:
            raise self.err("assume takes (f (shape x) ...)", f)
        spec = f.items[1]
        fn = spec.items[0]
        if not isinstance(fn, Sym):
            raise self.err("assume needs a function name", f)
        shapes, params = [], []
        for p in spec.items[1:]:
            if isinstance(p, SList) and len(p) == 2 and isinstance(p[0], Sym) and isinstance(p[1], Sym):
                if p[0].name not in _SHAPES:
                    raise self.err(f"unknown shape {p[0].name}", p)
                shapes.append(p[0].name)
                params.append(p[1].name)
            elif isinstance(p, Sym):
                shapes.append("any")
                params.append(p.name)
            else:
                raise self.err("malformed assume parameter", f)
        return Assumption(fn.name, tuple(shapes), tuple(params))


def _is_form(f, name: str) -> bool:
    return isinstance(f, SList) and f.items and isinstance(f.items[0], Sym) and f.items[0].name == name


def _define_name(f: SList):
    if len(f.items) < 3:
        return None
    t = f.items[1]
    if isinstance(t, Sym):
        return t
    if isinstance(t, SList) and t.items and isinstance(t.items[0], Sym):
        return t.items[0]
    return None


def _string_value(text: str):
    out = NIL
    for ch in reversed(text):
        out = Pair(ord(ch), out)
    return out


def _free_vars(e: Expr, bound: frozenset) -> list[str]:
    """Free variable names of ``e`` in first-occurrence order."""
    out: list[str] = []
    seen: set[str] = set()
    stack = [(e, bound)]
    while stack:
        x, b = stack.pop()
        t = type(x)
        if t is Var:
            if x.name not in b and x.name not in seen:
                seen.add(x.name)
                out.append(x.name)
        elif t is Lam:
            stack.append((x.body, b | set(x.params)))
        elif t is App:
            for a in reversed(x.args):
                stack.append((a, b))
            stack.append((x.fn, b))
        elif t is If0:
            stack.extend([(x.orelse, b), (x.then, b), (x.test, b)])
        elif t is TermC:
            stack.append((x.body, b))
    return out


def desugar(forms: list, source: str = "") -> Program:
    return _Desugarer(source).program(forms)


def parse_program(text: str, source: str = "") -> Program:
    return desugar(read_program(text, source), source)


def load_program(path) -> Program:
    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), path.stem)


def parse_expr(text: str, program: Optional[Program] = None) -> Expr:
    """Desugar a single expression against an existing program's globals."""
    d = _Desugarer(program.source + "-input" if program else "input")
    if program is not None:
        d.global_names = set(program.globals)
    forms = read_program(text, d.source)
    if len(forms) != 1:
        raise ReaderError("expected exactly one expression", 1, 1, d.source)
    e = d.expr(forms[0], frozenset())
    if program is not None:
        program.lambdas.update(d.lambdas)
    return e


# ---------------------------------------------------------------------------
#  Printing
# ---------------------------------------------------------------------------


def print_value(v) -> str:
    t = type(v)
    if t is int:
        return str(v)
    if t is NilType:
        return "()"
    if t is Pair:
        parts = []
        p = v
        while type(p) is Pair:
            parts.append(print_value(p.car))
            p = p.cdr
        if p is NIL:
            return "(" + " ".join(parts) + ")"
        return "(" + " ".join(parts) + " . " + print_value(p) + ")"
    if t is Clo:
        return f"#<closure:{v.label}>"
    if t is TermClo:
        return f"#<term/c:{v.inner.label}>"
    if t is Prim:
        return f"#<primitive:{v.name}>"
    return repr(v)
