"""Surface language: AST, s-expression parser, printer and desugaring.

Programs are sequences of ``assume``/``observe`` statements over untyped
lambda terms extended with ``dist`` calls and exact rational literals::

    (assume x (flip 3/10))
    (observe (flip (if x 9/10 1/10)) #t)

Booleans are Church-encoded during desugaring so that control flow reduces to
lambda application.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Union

__all__ = [
    "Var", "Lambda", "App", "DistCall", "Literal", "If", "BoolLit", "Flip",
    "Assume", "Observe", "Program", "Expr", "Stmt", "ParseError",
    "parse", "parse_expr", "print_program", "print_expr", "desugar",
    "free_variables", "subst_var", "alpha_key", "is_value_expr",
    "church_true", "church_false", "FRESH_PREFIX", "default_label",
]

# Generated names (beta renaming, extraction) start with this prefix. Source
# identifiers may use it, but are then treated as ordinary names.
FRESH_PREFIX = "%"
THUNK_PARAM = "%_"
KEYWORDS = frozenset({"assume", "observe", "lambda", "dist", "if", "flip"})


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lambda:
    param: str
    body: "Expr"

    @cached_property
    def free_vars(self) -> frozenset:
        return free_variables(self.body) - {self.param}


@dataclass(frozen=True)
class App:
    fn: "Expr"
    arg: "Expr"


@dataclass(frozen=True)
class DistCall:
    dist: str
    param: "Expr"
    label: str | None = None


@dataclass(frozen=True)
class Literal:
    value: Fraction


# Sugar nodes only exist between parsing and desugaring.
@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Flip:
    param: "Expr"
    label: str | None = None


Expr = Union[Var, Lambda, App, DistCall, Literal, If, BoolLit, Flip]


@dataclass(frozen=True)
class Assume:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Observe:
    expr: DistCall
    constrained: Expr


Stmt = Union[Assume, Observe]


@dataclass(frozen=True)
class Program:
    stmts: tuple = ()

    def __iter__(self) -> Iterator[Stmt]:
        return iter(self.stmts)

    def __len__(self) -> int:
        return len(self.stmts)

    def __str__(self) -> str:
        return print_program(self)

    def assumed_names(self) -> list[str]:
        return [s.name for s in self.stmts if isinstance(s, Assume)]


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


# --------------------------------------------------------------------------
# Church encodings and structural helpers

def church_true() -> Lambda:
    return Lambda("t", Lambda("f", Var("t")))


def church_false() -> Lambda:
    return Lambda("t", Lambda("f", Var("f")))


def _is_atomic(e: Expr) -> bool:
    return isinstance(e, (Var, Literal, Lambda, BoolLit))


def desugar(e: Expr) -> Expr:
    """Rewrite ``#t``, ``#f``, ``if`` and ``flip`` into core forms.

    ``(if c a b)`` becomes ``((c a) b)`` when both branches are atomic, and
    ``(((c (lambda (%_) a)) (lambda (%_) b)) 0)`` otherwise, so that only the
    taken branch is evaluated.
    """
    if isinstance(e, BoolLit):
        return church_true() if e.value else church_false()
    if isinstance(e, Flip):
        return DistCall("bernoulli", desugar(e.param), e.label)
    if isinstance(e, If):
        c, a, b = desugar(e.cond), desugar(e.then), desugar(e.orelse)
        if _is_atomic(e.then) and _is_atomic(e.orelse):
            return App(App(c, a), b)
        return App(App(App(c, Lambda(THUNK_PARAM, a)), Lambda(THUNK_PARAM, b)),
                   Literal(Fraction(0)))
    if isinstance(e, Lambda):
        body = desugar(e.body)
        return e if body is e.body else Lambda(e.param, body)
    if isinstance(e, App):
        fn, arg = desugar(e.fn), desugar(e.arg)
        return e if (fn is e.fn and arg is e.arg) else App(fn, arg)
    if isinstance(e, DistCall):
        param = desugar(e.param)
        return e if param is e.param else DistCall(e.dist, param, e.label)
    return e


def free_variables(e: Expr) -> frozenset:
    """Free variables of a core expression.

    For a dist call this is the free variables of its parameter; registered
    support expressions are closed, so they contribute nothing.
    """
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Lambda):
        return e.free_vars
    if isinstance(e, App):
        return free_variables(e.fn) | free_variables(e.arg)
    if isinstance(e, DistCall):
        return free_variables(e.param)
    if isinstance(e, Literal):
        return frozenset()
    return free_variables(desugar(e))


_SUBST_MEMO: dict = {}


def subst_var(e: Expr, old: str, new: str) -> Expr:
    """Replace free occurrences of variable ``old`` by ``Var(new)``.

    ``new`` must be fresh, so no capture check is needed.
    """
    key = (id(e), old, new)
    hit = _SUBST_MEMO.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    out = _subst_var(e, old, new)
    if len(_SUBST_MEMO) > 65536:
        _SUBST_MEMO.clear()
    _SUBST_MEMO[key] = (e, out)
    return out


def _subst_var(e: Expr, old: str, new: str) -> Expr:
    if isinstance(e, Var):
        return Var(new) if e.name == old else e
    if isinstance(e, Lambda):
        if e.param == old or old not in e.free_vars:
            return e
        return Lambda(e.param, subst_var(e.body, old, new))
    if isinstance(e, App):
        fn, arg = subst_var(e.fn, old, new), subst_var(e.arg, old, new)
        return e if (fn is e.fn and arg is e.arg) else App(fn, arg)
    if isinstance(e, DistCall):
        param = subst_var(e.param, old, new)
        return e if param is e.param else DistCall(e.dist, param, e.label)
    return e


def alpha_key(e: Expr, bound: tuple = ()) -> tuple:
    """Structural key identifying ``e`` up to renaming of lambda binders."""
    if isinstance(e, Var):
        for depth, name in enumerate(reversed(bound)):
            if name == e.name:
                return ("b", depth)
        return ("v", e.name)
    if isinstance(e, Lambda):
        return ("l", alpha_key(e.body, bound + (e.param,)))
    if isinstance(e, App):
        return ("a", alpha_key(e.fn, bound), alpha_key(e.arg, bound))
    if isinstance(e, Literal):
        return ("n", e.value)
    if isinstance(e, DistCall):
        return ("d", e.dist, alpha_key(e.param, bound))
    return alpha_key(desugar(e), bound)


def is_value_expr(e: Expr) -> bool:
    if isinstance(e, (Var, Literal)):
        return True
    if isinstance(e, Lambda):
        return is_value_expr(e.body)
    if isinstance(e, App):
        return is_value_expr(e.fn) and is_value_expr(e.arg)
    return False


def default_label(stmt_index: int, path: tuple) -> str:
    return "s%d" % stmt_index + "".join("/%d" % k for k in path)


def _label_expr(e: Expr, stmt_index: int, path: tuple) -> Expr:
    if isinstance(e, DistCall):
        param = _label_expr(e.param, stmt_index, path + (0,))
        label = e.label if e.label is not None else default_label(stmt_index, path)
        if param is e.param and label == e.label:
            return e
        return DistCall(e.dist, param, label)
    if isinstance(e, Lambda):
        body = _label_expr(e.body, stmt_index, path + (0,))
        return e if body is e.body else Lambda(e.param, body)
    if isinstance(e, App):
        fn = _label_expr(e.fn, stmt_index, path + (0,))
        arg = _label_expr(e.arg, stmt_index, path + (1,))
        return e if (fn is e.fn and arg is e.arg) else App(fn, arg)
    return e


def assign_default_labels(program: Program) -> Program:
    """Give every unlabelled dist call its positional default label."""
    out = []
    for i, s in enumerate(program.stmts):
        if isinstance(s, Assume):
            out.append(Assume(s.name, _label_expr(s.expr, i, ())))
        else:
            out.append(Observe(_label_expr(s.expr, i, ()), s.constrained))
    return Program(tuple(out))


# --------------------------------------------------------------------------
# Tokenizer and parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|;[^\n]*)
  | (?P<lp>\()
  | (?P<rp>\))
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<atom>[^\s()";]+)
""", re.VERBOSE)

_RATIONAL_RE = re.compile(r"^[+-]?(\d+(/\d+)?|\d*\.\d+)$")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError("unexpected character %r" % source[pos], line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        for k, ch in enumerate(text):
            if ch == "\n":
                line += 1
                line_start = pos + k + 1
        pos = m.end()
    return toks


@dataclass
class _Parser:
    toks: list
    registry: object = None
    pos: int = 0
    _end: _Tok = field(default=None)

    def peek(self) -> _Tok:
        if self.pos < len(self.toks):
            return self.toks[self.pos]
        if self._end is None:
            last = self.toks[-1] if self.toks else _Tok("eof", "", 1, 0)
            self._end = _Tok("eof", "", last.line, last.col + len(last.text))
        return self._end

    def next(self) -> _Tok:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Tok:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError("expected %s, got %r" % (what, tok.text or "end of input"),
                             tok.line, tok.col)
        return tok

    def ident(self) -> str:
        tok = self.next()
        if tok.kind != "atom" or _RATIONAL_RE.match(tok.text) or tok.text.startswith(("#", ":")):
            raise ParseError("expected identifier, got %r" % (tok.text or "end of input"),
                             tok.line, tok.col)
        if tok.text in KEYWORDS:
            raise ParseError("keyword %r used as identifier" % tok.text, tok.line, tok.col)
        return tok.text

    def program(self) -> Program:
        stmts = []
        while self.peek().kind != "eof":
            stmts.append(self.stmt())
        return Program(tuple(stmts))

    def stmt(self) -> Stmt:
        open_tok = self.expect("lp", "'('")
        head = self.next()
        if head.text == "assume":
            name = self.ident()
            e = self.expr()
            self.expect("rp", "')'")
            return Assume(name, desugar(e))
        if head.text == "observe":
            e = desugar(self.expr())
            v = desugar(self.expr())
            self.expect("rp", "')'")
            if not isinstance(e, DistCall):
                raise ParseError("observed expression must be a stochastic choice",
                                 open_tok.line, open_tok.col)
            if not is_value_expr(v):
                raise ParseError("observed value must be a value expression",
                                 open_tok.line, open_tok.col)
            return Observe(e, v)
        raise ParseError("expected 'assume' or 'observe', got %r" % head.text, head.line, head.col)

    def expr(self) -> Expr:
        tok = self.next()
        if tok.kind == "atom":
            if tok.text == "#t":
                return BoolLit(True)
            if tok.text == "#f":
                return BoolLit(False)
            if _RATIONAL_RE.match(tok.text):
                return Literal(Fraction(tok.text))
            self.pos -= 1
            return Var(self.ident())
        if tok.kind != "lp":
            raise ParseError("unexpected %r" % (tok.text or "end of input"), tok.line, tok.col)
        head = self.peek()
        if head.kind == "atom" and head.text in KEYWORDS:
            self.next()
            return self.form(head)
        items = [self.expr()]
        while self.peek().kind not in ("rp", "eof"):
            items.append(self.expr())
        self.expect("rp", "')'")
        if len(items) < 2:
            raise ParseError("application needs an operator and an argument", tok.line, tok.col)
        e = items[0]
        for arg in items[1:]:
            e = App(e, arg)
        return e

    def form(self, head: _Tok) -> Expr:
        kw = head.text
        if kw == "lambda":
            self.expect("lp", "'(' before lambda parameter")
            param = self.ident()
            self.expect("rp", "')' after lambda parameter")
            body = self.expr()
            self.expect("rp", "')'")
            return Lambda(param, body)
        if kw in ("dist", "flip"):
            if kw == "dist":
                name_tok = self.peek()
                name = self.ident()
                if self.registry is not None and name not in self.registry:
                    raise ParseError("unknown distribution %r" % name, name_tok.line, name_tok.col)
            param = self.expr()
            label = None
            if self.peek().kind == "atom" and self.peek().text == ":label":
                self.next()
                s = self.expect("str", "label string")
                label = _unquote(s.text)
            self.expect("rp", "')'")
            return DistCall(name, param, label) if kw == "dist" else Flip(param, label)
        if kw == "if":
            c, a, b = self.expr(), self.expr(), self.expr()
            self.expect("rp", "')'")
            return If(c, a, b)
        raise ParseError("keyword %r is not an expression" % kw, head.line, head.col)


def _unquote(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text[1:-1])


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def parse(source: str, registry=None) -> Program:
    """Parse program text into a desugared, fully labelled :class:`Program`.

    ``registry`` defaults to the builtin distributions; unknown distribution
    names are rejected.
    """
    if registry is None:
        from .distributions import builtin_distributions
        registry = builtin_distributions()
    program = _Parser(_tokenize(source), registry).program()
    _check_scoping(program)
    return assign_default_labels(program)


def parse_expr(source: str, registry=None) -> Expr:
    """Parse and desugar a single expression (labels are left unset)."""
    if registry is None:
        from .distributions import builtin_distributions
        registry = builtin_distributions()
    p = _Parser(_tokenize(source), registry)
    e = p.expr()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError("trailing input %r" % tok.text, tok.line, tok.col)
    return desugar(e)


def _check_scoping(program: Program) -> None:
    seen = set()
    for i, s in enumerate(program.stmts):
        if isinstance(s, Assume):
            if s.name in seen:
                raise ParseError("duplicate assume name %r (statement %d)" % (s.name, i))
            seen.add(s.name)


# --------------------------------------------------------------------------
# Printer

def print_expr(e: Expr, stmt_index: int | None = None, path: tuple = ()) -> str:
    """Render a core expression; labels equal to the positional default are omitted."""
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Literal):
        v = e.value
        return str(v.numerator) if v.denominator == 1 else "%d/%d" % (v.numerator, v.denominator)
    if isinstance(e, Lambda):
        return "(lambda (%s) %s)" % (e.param, print_expr(e.body, stmt_index, path + (0,)))
    if isinstance(e, App):
        return "(%s %s)" % (print_expr(e.fn, stmt_index, path + (0,)),
                            print_expr(e.arg, stmt_index, path + (1,)))
    if isinstance(e, DistCall):
        text = "(dist %s %s" % (e.dist, print_expr(e.param, stmt_index, path + (0,)))
        if e.label is not None and (stmt_index is None
                                    or e.label != default_label(stmt_index, path)):
            text += " :label " + _quote(e.label)
        return text + ")"
    return print_expr(desugar(e), stmt_index, path)


def print_program(program: Program) -> str:
    lines = []
    for i, s in enumerate(program.stmts):
        if isinstance(s, Assume):
            lines.append("(assume %s %s)" % (s.name, print_expr(s.expr, i)))
        else:
            lines.append("(observe %s %s)" % (print_expr(s.expr, i), print_expr(s.constrained)))
    return "\n".join(lines) + ("\n" if lines else "")
