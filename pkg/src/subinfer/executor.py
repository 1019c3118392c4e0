"""Call-by-value execution of programs into augmented traces.

Every evaluated subexpression becomes a trace node carrying its value and a
unique integer id.  A trace of a program is fully determined by the sequence
of outcomes its stochastic choices took, which is what :func:`replay` uses to
rebuild consistent traces after structural edits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Iterator, Union

import numpy as np

from .distributions import Distribution, DistributionError, builtin_distributions
from .lang import (FRESH_PREFIX, App, Assume, DistCall, Expr, Lambda, Literal,
                   Observe, Program, Var, alpha_key, subst_var)

__all__ = [
    "Symbol", "Rational", "Closure", "StuckApp", "Value",
    "FreeVarNode", "BoundVarNode", "LiteralNode", "LambdaNode", "AppNode",
    "BetaTail", "DistNode", "AugExpr", "AugAssume", "AugObserve", "Trace",
    "ExecutionError", "ReplayError", "Validation",
    "make_rng", "execute", "replay", "rollback", "rollback_expr", "revalidate",
    "trace_equal_mod_ids", "canonical_key", "iter_nodes", "iter_choices", "choice_outcomes",
    "explore", "ForwardSampler", "church_bool", "value_to_expr",
]


# --------------------------------------------------------------------------
# Values

@dataclass(frozen=True)
class Symbol:
    name: str


@dataclass(frozen=True)
class Rational:
    value: Fraction


@dataclass(frozen=True)
class Closure:
    param: str
    body: Expr
    env: tuple       # ((name, Value), ...) sorted by name
    env_ids: tuple   # ((name, node id), ...) same order

    @property
    def source(self) -> Lambda:
        return Lambda(self.param, self.body)


@dataclass(frozen=True)
class StuckApp:
    fn: "Value"
    arg: "Value"


Value = Union[Symbol, Rational, Closure, StuckApp]


def church_bool(v: Value) -> bool | None:
    """Decode a Church boolean closure, or None if ``v`` is not one."""
    if isinstance(v, Closure) and isinstance(v.body, Lambda) and isinstance(v.body.body, Var):
        inner = v.body
        if inner.body.name == v.param and inner.param != v.param:
            return True
        if inner.body.name == inner.param:
            return False
    return None


def value_to_expr(v: Value) -> Expr:
    """Read a value back as an expression (closure environments are dropped)."""
    if isinstance(v, Symbol):
        return Var(v.name)
    if isinstance(v, Rational):
        return Literal(v.value)
    if isinstance(v, Closure):
        return v.source
    return App(value_to_expr(v.fn), value_to_expr(v.arg))


# --------------------------------------------------------------------------
# Trace nodes

@dataclass(frozen=True)
class FreeVarNode:
    id: int
    value: Symbol
    name: str


@dataclass(frozen=True)
class BoundVarNode:
    id: int
    value: Value
    name: str
    binder_id: int


@dataclass(frozen=True)
class LiteralNode:
    id: int
    value: Rational


@dataclass(frozen=True)
class LambdaNode:
    id: int
    value: Closure
    param: str
    body: Expr


@dataclass(frozen=True)
class BetaTail:
    name: str
    body: "AugExpr"


@dataclass(frozen=True)
class AppNode:
    id: int
    value: Value
    fn: "AugExpr"
    arg: "AugExpr"
    tail: BetaTail | None  # None is the opaque (stuck) application


@dataclass(frozen=True)
class DistNode:
    id: int
    value: Value
    dist: str
    label: str
    param: "AugExpr"
    choice_id: int
    result: "AugExpr"


AugExpr = Union[FreeVarNode, BoundVarNode, LiteralNode, LambdaNode, AppNode, DistNode]


@dataclass(frozen=True)
class AugAssume:
    name: str
    expr: AugExpr


@dataclass(frozen=True)
class AugObserve:
    dist: str
    label: str
    param: AugExpr
    obs_id: int
    constrained: Expr


class Trace:
    """Immutable execution record: a tuple of augmented statements."""

    __slots__ = ("stmts", "__dict__")

    def __init__(self, stmts=()):
        self.stmts = tuple(stmts)

    def __iter__(self):
        return iter(self.stmts)

    def __len__(self):
        return len(self.stmts)

    def __eq__(self, other):
        return isinstance(other, Trace) and self.stmts == other.stmts

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return "Trace(%s)" % (", ".join(_short(s) for s in self.stmts))

    @cached_property
    def key(self) -> "CanonicalKey":
        """Identity of the trace up to node ids and generated names."""
        return canonical_key(self)

    @cached_property
    def program(self) -> Program:
        return rollback(self)

    @cached_property
    def density(self) -> Fraction:
        from .transform import density
        return density(self)

    @cached_property
    def graph(self):
        from .depgraph import build_graph
        return build_graph(self)

    @cached_property
    def outcomes(self) -> tuple:
        return tuple(choice_outcomes(self))

    def max_id(self) -> int:
        return max((n for n in _all_ids(self)), default=-1)


def _short(s) -> str:
    if isinstance(s, AugAssume):
        return "assume %s" % s.name
    return "observe %s" % s.dist


# --------------------------------------------------------------------------
# Execution

class ExecutionError(RuntimeError):
    def __init__(self, message: str, node_id: int | None = None):
        self.node_id = node_id
        super().__init__(message if node_id is None else "node %d: %s" % (node_id, message))


class ReplayError(ExecutionError):
    pass


def make_rng(seed=None) -> np.random.Generator:
    """Seedable, splittable random source (``rng.spawn(n)`` splits it)."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class _OutcomeTable:
    outcomes: tuple     # ((expr, prob), ...)
    keys: tuple         # alpha keys of the outcome expressions
    cumulative: tuple   # float CDF for inverse-CDF sampling

    def index_of(self, expr: Expr) -> int:
        key = alpha_key(expr)
        try:
            return self.keys.index(key)
        except ValueError:
            return -1


@lru_cache(maxsize=8192)
def _outcome_table(dist: Distribution, param: Value) -> _OutcomeTable:
    outs = tuple(dist.outcomes(param))
    total = Fraction(0)
    cum = []
    for _, w in outs:
        total += w
        cum.append(float(total))
    return _OutcomeTable(outs, tuple(alpha_key(e) for e, _ in outs), tuple(cum))


_FRESH_RE = re.compile(re.escape(FRESH_PREFIX) + r"(\d+)$")


def _names_in_expr(e: Expr, acc: set) -> None:
    if isinstance(e, Var):
        acc.add(e.name)
    elif isinstance(e, Lambda):
        acc.add(e.param)
        _names_in_expr(e.body, acc)
    elif isinstance(e, App):
        _names_in_expr(e.fn, acc)
        _names_in_expr(e.arg, acc)
    elif isinstance(e, DistCall):
        _names_in_expr(e.param, acc)


_FRESH_MEMO: dict = {}


def _first_fresh_index(program: Program) -> int:
    # Keyed by identity; the stored program pins the id against reuse.
    hit = _FRESH_MEMO.get(id(program))
    if hit is not None and hit[0] is program:
        return hit[1]
    n = _scan_fresh_index(program)
    if len(_FRESH_MEMO) > 4096:
        _FRESH_MEMO.clear()
    _FRESH_MEMO[id(program)] = (program, n)
    return n


def _scan_fresh_index(program: Program) -> int:
    names = set()
    for s in program.stmts:
        if isinstance(s, Assume):
            names.add(s.name)
            _names_in_expr(s.expr, names)
        else:
            _names_in_expr(s.expr, names)
            _names_in_expr(s.constrained, names)
    top = -1
    for n in names:
        m = _FRESH_RE.match(n)
        if m:
            top = max(top, int(m.group(1)))
    return top + 1


# A chooser picks the index of an outcome for a dist call.
Chooser = Callable[[DistCall, Value, _OutcomeTable], int]


class _Executor:
    def __init__(self, registry, chooser: Chooser, fresh_start: int):
        self.registry = registry
        self.chooser = chooser
        self.next_id = 0
        self.next_fresh = fresh_start

    def table(self, call_dist: str, param: Value, node_id: int) -> _OutcomeTable:
        try:
            dist = self.registry[call_dist]
        except KeyError:
            raise ExecutionError("unknown distribution %r" % call_dist, node_id) from None
        try:
            return _outcome_table(dist, param)
        except DistributionError as exc:
            raise ExecutionError(str(exc), node_id) from None

    def eval(self, e: Expr, env: dict, ids: dict) -> AugExpr:
        nid = self.next_id
        self.next_id += 1
        t = type(e)
        if t is Var:
            name = e.name
            if name in env:
                return BoundVarNode(nid, env[name], name, ids[name])
            return FreeVarNode(nid, Symbol(name), name)
        if t is Literal:
            return LiteralNode(nid, Rational(e.value))
        if t is Lambda:
            names = sorted(n for n in e.free_vars if n in env)
            clo = Closure(e.param, e.body, tuple((n, env[n]) for n in names),
                          tuple((n, ids[n]) for n in names))
            return LambdaNode(nid, clo, e.param, e.body)
        if t is App:
            f = self.eval(e.fn, env, ids)
            a = self.eval(e.arg, env, ids)
            fv = f.value
            if type(fv) is Closure:
                x = FRESH_PREFIX + str(self.next_fresh)
                self.next_fresh += 1
                env2 = dict(fv.env)
                env2[x] = a.value
                ids2 = dict(fv.env_ids)
                ids2[x] = a.id
                b = self.eval(subst_var(fv.body, fv.param, x), env2, ids2)
                return AppNode(nid, b.value, f, a, BetaTail(x, b))
            return AppNode(nid, StuckApp(fv, a.value), f, a, None)
        if t is DistCall:
            cid = self.next_id
            self.next_id += 1
            p = self.eval(e.param, env, ids)
            table = self.table(e.dist, p.value, nid)
            k = self.chooser(e, p.value, table)
            r = self.eval(table.outcomes[k][0], env, ids)
            return DistNode(nid, r.value, e.dist, e.label, p, cid, r)
        raise ExecutionError("cannot execute sugar node %r; desugar first" % (e,))

    def run(self, program: Program) -> Trace:
        env: dict = {}
        ids: dict = {}
        out = []
        for s in program.stmts:
            if isinstance(s, Assume):
                ae = self.eval(s.expr, env, ids)
                env[s.name] = ae.value
                ids[s.name] = ae.id
                out.append(AugAssume(s.name, ae))
            else:
                oid = self.next_id
                self.next_id += 1
                call = s.expr
                p = self.eval(call.param, env, ids)
                self.table(call.dist, p.value, oid)
                out.append(AugObserve(call.dist, call.label, p, oid, s.constrained))
        return Trace(out)


def _rng_chooser(rng: np.random.Generator) -> Chooser:
    def choose(call, param, table):
        u = rng.random()
        cum = table.cumulative
        for k, c in enumerate(cum):
            if u < c:
                return k
        return len(cum) - 1
    return choose


def execute(program: Program, rng=None, registry=None) -> Trace:
    """Sample a trace of ``program``; each choice uses one uniform draw (inverse CDF)."""
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = make_rng(rng)
    registry = registry if registry is not None else _default_registry()
    ex = _Executor(registry, _rng_chooser(rng), _first_fresh_index(program))
    return ex.run(program)


def replay(program: Program, outcomes, registry=None) -> Trace:
    """Re-execute ``program`` forcing the given choice outcomes in evaluation order.

    ``outcomes`` holds outcome expressions (compared up to alpha-renaming).
    Raises :class:`ReplayError` if an outcome is outside its support or the
    count does not match.
    """
    registry = registry if registry is not None else _default_registry()
    queue = list(outcomes)
    pos = 0

    def choose(call, param, table):
        nonlocal pos
        if pos >= len(queue):
            raise ReplayError("ran out of recorded outcomes at choice %r" % call.label)
        k = table.index_of(queue[pos])
        if k < 0:
            raise ReplayError("outcome %r not in support of %s at choice %r"
                              % (queue[pos], call.dist, call.label))
        pos += 1
        return k

    trace = _Executor(registry, choose, _first_fresh_index(program)).run(program)
    if pos != len(queue):
        raise ReplayError("%d recorded outcomes left unused" % (len(queue) - pos))
    return trace


class _NeedChoice(Exception):
    def __init__(self, table):
        self.table = table


def _prefix_chooser(prefix):
    pos = 0

    def choose(call, param, table):
        nonlocal pos
        if pos < len(prefix):
            k = prefix[pos]
            pos += 1
            return k
        raise _NeedChoice(table)
    return choose


def explore(program: Program, registry=None, cap: int | None = None) -> Iterator[Trace]:
    """Yield every trace of ``program`` in depth-first order of outcome indices."""
    registry = registry if registry is not None else _default_registry()
    fresh = _first_fresh_index(program)
    stack = [()]
    count = 0
    while stack:
        prefix = stack.pop()
        try:
            trace = _Executor(registry, _prefix_chooser(prefix), fresh).run(program)
        except _NeedChoice as need:
            n = len(need.table.outcomes)
            stack.extend(prefix + (k,) for k in reversed(range(n)))
            continue
        count += 1
        if cap is not None and count > cap:
            raise OverflowError("enumeration cap exceeded (%d traces)" % cap)
        yield trace


class ForwardSampler:
    """Forward simulation of one program with memoized choice structure.

    Draws exactly like :func:`execute` (one uniform per choice, inverse CDF
    over the same ordered support) but reuses previously built traces, which
    keeps long chains cheap.
    """

    def __init__(self, program: Program, registry=None):
        self.program = program
        self.registry = registry if registry is not None else _default_registry()
        self._fresh = _first_fresh_index(program)
        self._nodes: dict = {}

    def _expand(self, prefix: tuple):
        try:
            trace = _Executor(self.registry, _prefix_chooser(prefix), self._fresh).run(self.program)
            node = ("leaf", trace)
        except _NeedChoice as need:
            node = ("choice", need.table.cumulative)
        self._nodes[prefix] = node
        return node

    def sample(self, rng: np.random.Generator) -> Trace:
        prefix = ()
        while True:
            node = self._nodes.get(prefix) or self._expand(prefix)
            if node[0] == "leaf":
                return node[1]
            u = rng.random()
            cum = node[1]
            k = len(cum) - 1
            for i, c in enumerate(cum):
                if u < c:
                    k = i
                    break
            prefix = prefix + (k,)


_REGISTRY = None


def _default_registry():
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = builtin_distributions()
    return _REGISTRY


# --------------------------------------------------------------------------
# Traversal helpers

def iter_nodes(ae: AugExpr) -> Iterator[AugExpr]:
    """Nodes of an augmented expression in evaluation (pre-)order."""
    stack = [ae]
    while stack:
        n = stack.pop()
        yield n
        t = type(n)
        if t is AppNode:
            if n.tail is not None:
                stack.append(n.tail.body)
            stack.append(n.arg)
            stack.append(n.fn)
        elif t is DistNode:
            stack.append(n.result)
            stack.append(n.param)


def _all_ids(trace: Trace) -> Iterator[int]:
    for s in trace.stmts:
        if isinstance(s, AugObserve):
            yield s.obs_id
            roots = (s.param,)
        else:
            roots = (s.expr,)
        for r in roots:
            for n in iter_nodes(r):
                yield n.id
                if type(n) is DistNode:
                    yield n.choice_id


def iter_choices(ae: AugExpr) -> Iterator[DistNode]:
    """Choice nodes in the order their outcomes were drawn (after their parameter)."""
    stack = [(ae, False)]
    while stack:
        n, done = stack.pop()
        t = type(n)
        if t is DistNode:
            if done:
                yield n
            else:
                stack.append((n, True))
                stack.append((n.param, False))
        elif t is AppNode:
            if n.tail is not None:
                stack.append((n.tail.body, False))
            stack.append((n.arg, False))
            stack.append((n.fn, False))


def choice_outcomes(trace: Trace) -> Iterator[Expr]:
    """Outcome expressions of all stochastic choices, in evaluation order."""
    for s in trace.stmts:
        root = s.param if isinstance(s, AugObserve) else s.expr
        for n in iter_choices(root):
            yield rollback_expr(n.result)


# --------------------------------------------------------------------------
# Rollback

def rollback_expr(ae: AugExpr) -> Expr:
    t = type(ae)
    if t is FreeVarNode or t is BoundVarNode:
        return Var(ae.name)
    if t is LiteralNode:
        return Literal(ae.value.value)
    if t is LambdaNode:
        return Lambda(ae.param, ae.body)
    if t is AppNode:
        return App(rollback_expr(ae.fn), rollback_expr(ae.arg))
    if t is DistNode:
        return DistCall(ae.dist, rollback_expr(ae.param), ae.label)
    raise TypeError("not a trace node: %r" % (ae,))


def rollback(trace: Trace) -> Program:
    """Drop values, ids and beta tails, recovering the generating program."""
    out = []
    for s in trace.stmts:
        if isinstance(s, AugAssume):
            out.append(Assume(s.name, rollback_expr(s.expr)))
        elif isinstance(s, AugObserve):
            out.append(Observe(DistCall(s.dist, rollback_expr(s.param), s.label), s.constrained))
        else:
            raise TypeError("malformed trace statement %r" % (s,))
    return Program(tuple(out))


# --------------------------------------------------------------------------
# Revalidation

@dataclass(frozen=True)
class Validation:
    ok: bool
    node_id: int | None = None
    message: str = ""

    def __bool__(self):
        return self.ok


class _Violation(Exception):
    def __init__(self, node_id, message):
        self.node_id = node_id
        self.message = message


class _Checker:
    def __init__(self, registry):
        self.registry = registry
        self.seen: set = set()

    def claim(self, nid: int) -> None:
        if nid in self.seen:
            raise _Violation(nid, "duplicate node id")
        self.seen.add(nid)

    def table(self, dist, param, nid):
        try:
            return _outcome_table(self.registry[dist], param)
        except (KeyError, DistributionError) as exc:
            raise _Violation(nid, "invalid distribution call: %s" % exc) from None

    def check(self, ae: AugExpr, env: dict, ids: dict) -> None:
        t = type(ae)
        self.claim(ae.id)
        if t is FreeVarNode:
            if ae.name in env:
                raise _Violation(ae.id, "variable %r is bound but recorded as free" % ae.name)
            if ae.value != Symbol(ae.name):
                raise _Violation(ae.id, "free variable value mismatch")
        elif t is BoundVarNode:
            if ae.name not in env:
                raise _Violation(ae.id, "variable %r is unbound" % ae.name)
            if ae.binder_id != ids[ae.name]:
                raise _Violation(ae.id, "binder id mismatch for %r" % ae.name)
            if ae.value != env[ae.name]:
                raise _Violation(ae.id, "stale value for %r" % ae.name)
        elif t is LiteralNode:
            if type(ae.value) is not Rational:
                raise _Violation(ae.id, "literal value mismatch")
        elif t is LambdaNode:
            lam = Lambda(ae.param, ae.body)
            names = sorted(n for n in lam.free_vars if n in env)
            expect = Closure(ae.param, ae.body, tuple((n, env[n]) for n in names),
                             tuple((n, ids[n]) for n in names))
            if ae.value != expect:
                raise _Violation(ae.id, "closure mismatch")
        elif t is AppNode:
            self.check(ae.fn, env, ids)
            self.check(ae.arg, env, ids)
            fv = ae.fn.value
            if type(fv) is Closure:
                if ae.tail is None:
                    raise _Violation(ae.id, "lambda application recorded as stuck")
                x = ae.tail.name
                if x in env or x in dict(fv.env):
                    raise _Violation(ae.id, "beta tail name %r is not fresh" % x)
                expect = subst_var(fv.body, fv.param, x)
                if rollback_expr(ae.tail.body) != expect:
                    raise _Violation(ae.id, "beta tail does not match operator body")
                env2 = dict(fv.env)
                env2[x] = ae.arg.value
                ids2 = dict(fv.env_ids)
                ids2[x] = ae.arg.id
                self.check(ae.tail.body, env2, ids2)
                if ae.value != ae.tail.body.value:
                    raise _Violation(ae.id, "application value mismatch")
            else:
                if ae.tail is not None:
                    raise _Violation(ae.id, "beta tail on a stuck application")
                if ae.value != StuckApp(fv, ae.arg.value):
                    raise _Violation(ae.id, "stuck application value mismatch")
        elif t is DistNode:
            self.claim(ae.choice_id)
            self.check(ae.param, env, ids)
            table = self.table(ae.dist, ae.param.value, ae.id)
            if table.index_of(rollback_expr(ae.result)) < 0:
                raise _Violation(ae.id, "outcome outside the support of %s" % ae.dist)
            self.check(ae.result, env, ids)
            if ae.value != ae.result.value:
                raise _Violation(ae.id, "choice value mismatch")
        else:
            raise _Violation(None, "unknown node %r" % (ae,))


def revalidate(trace: Trace, registry=None) -> Validation:
    """Recheck every recorded value and outcome against the execution rules."""
    registry = registry if registry is not None else _default_registry()
    chk = _Checker(registry)
    env: dict = {}
    ids: dict = {}
    try:
        for s in trace.stmts:
            if isinstance(s, AugAssume):
                chk.check(s.expr, env, ids)
                env[s.name] = s.expr.value
                ids[s.name] = s.expr.id
            else:
                chk.claim(s.obs_id)
                chk.check(s.param, env, ids)
                chk.table(s.dist, s.param.value, s.obs_id)
    except _Violation as v:
        return Validation(False, v.node_id, v.message)
    return Validation(True)


# --------------------------------------------------------------------------
# Canonical keys

class CanonicalKey:
    """Hashable id-free structural form of a trace.

    Node ids are replaced by first-encounter positions and beta-generated
    names by positional names, so traces that differ only in those choices
    get equal keys.  Equality compares the full structure.
    """

    __slots__ = ("form", "_hash")

    def __init__(self, form: tuple):
        self.form = form
        self._hash = hash(form)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return (self is other or (isinstance(other, CanonicalKey)
                                  and self._hash == other._hash and self.form == other.form))

    def __repr__(self):
        return "CanonicalKey(%x)" % (self._hash & 0xFFFFFFFF)


class _Canon:
    def __init__(self):
        self.ids: dict = {}
        self.names: dict = {}

    def cid(self, nid: int) -> int:
        c = self.ids.get(nid)
        if c is None:
            c = self.ids[nid] = len(self.ids)
        return c

    def name(self, n: str) -> str:
        return self.names.get(n, n)

    def bind(self, n: str) -> str:
        c = self.names[n] = "%%%d" % len(self.names)
        return c

    def expr(self, e: Expr, bound=()) -> tuple:
        if isinstance(e, Var):
            for depth, b in enumerate(reversed(bound)):
                if b == e.name:
                    return ("b", depth)
            return ("v", self.name(e.name))
        if isinstance(e, Lambda):
            return ("l", self.expr(e.body, bound + (e.param,)))
        if isinstance(e, App):
            return ("a", self.expr(e.fn, bound), self.expr(e.arg, bound))
        if isinstance(e, Literal):
            return ("n", e.value)
        if isinstance(e, DistCall):
            return ("d", e.dist, e.label, self.expr(e.param, bound))
        return ("?", repr(e))

    def value(self, v) -> tuple:
        t = type(v)
        if t is Symbol:
            return ("sym", self.name(v.name))
        if t is Rational:
            return ("rat", v.value)
        if t is StuckApp:
            return ("stuck", self.value(v.fn), self.value(v.arg))
        return ("clo", self.expr(Lambda(v.param, v.body)),
                tuple((self.name(n), self.value(x), self.cid(i))
                      for (n, x), (_, i) in zip(v.env, v.env_ids)))

    def node(self, ae) -> tuple:
        t = type(ae)
        c = self.cid(ae.id)
        if t is FreeVarNode:
            return ("fv", c, self.name(ae.name))
        if t is BoundVarNode:
            return ("bv", c, self.name(ae.name), self.cid(ae.binder_id), self.value(ae.value))
        if t is LiteralNode:
            return ("lit", c, ae.value.value)
        if t is LambdaNode:
            return ("lam", c, self.value(ae.value))
        if t is AppNode:
            fn = self.node(ae.fn)
            arg = self.node(ae.arg)
            if ae.tail is None:
                return ("app", c, fn, arg, None, self.value(ae.value))
            bname = self.bind(ae.tail.name)
            body = self.node(ae.tail.body)
            return ("app", c, fn, arg, (bname, body), self.value(ae.value))
        if t is DistNode:
            cc = self.cid(ae.choice_id)
            param = self.node(ae.param)
            result = self.node(ae.result)
            return ("dist", c, ae.dist, ae.label, cc, param, result, self.value(ae.value))
        raise TypeError("not a trace node: %r" % (ae,))


def canonical_key(trace: Trace) -> CanonicalKey:
    cn = _Canon()
    form = []
    for s in trace.stmts:
        if isinstance(s, AugAssume):
            form.append(("assume", s.name, cn.node(s.expr)))
        else:
            oc = cn.cid(s.obs_id)
            form.append(("observe", s.dist, s.label, oc, cn.node(s.param),
                         alpha_key(s.constrained)))
    return CanonicalKey(tuple(form))


def trace_equal_mod_ids(t1: Trace, t2: Trace) -> bool:
    """Structural equality up to a consistent renumbering of node ids."""
    return t1.key == t2.key
