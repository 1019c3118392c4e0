"""Extraction and stitching of subtraces, trace equivalence, and trace densities.

Extraction turns a trace plus a valid subproblem into a standalone trace of a
smaller program (the subprogram): choices outside the subproblem become
``observe`` statements pinned to their recorded outcomes, and lambda
applications whose operator lies outside the subproblem are split into fresh
``assume`` statements with the body inlined.  Stitching is the inverse: it
walks the original trace as a skeleton and takes the subproblem's choices
from a (possibly different) trace of the subprogram.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from fractions import Fraction

from .depgraph import Subproblem
from .executor import (FRESH_PREFIX, AppNode, AugAssume, AugObserve, BoundVarNode,
                       DistNode, FreeVarNode, LambdaNode, LiteralNode, Trace,
                       _default_registry, _first_fresh_index, _FRESH_RE,
                       _outcome_table, choice_outcomes, iter_choices, iter_nodes, replay,
                       rollback, rollback_expr)
from .lang import (App, Assume, DistCall, Lambda, Observe, Program, Var, alpha_key,
                   print_program)

__all__ = [
    "density", "log_density", "observe_weight", "prior_density",
    "Subtrace", "ExtractionError", "StitchError",
    "extract_trace", "stitch_trace", "equiv",
]


# --------------------------------------------------------------------------
# Densities

def _pdf(dist: str, param, outcome, registry) -> Fraction:
    table = _outcome_table(registry[dist], param)
    k = table.index_of(outcome)
    return table.outcomes[k][1] if k >= 0 else Fraction(0)


def _factors(trace: Trace, registry):
    """Yield (kind, pdf) for every choice ('choice') and observation ('observe')."""
    for s in trace.stmts:
        root = s.param if isinstance(s, AugObserve) else s.expr
        for n in iter_nodes(root):
            if type(n) is DistNode:
                yield "choice", _pdf(n.dist, n.param.value, rollback_expr(n.result), registry)
        if isinstance(s, AugObserve):
            yield "observe", _pdf(s.dist, s.param.value, s.constrained, registry)


def density(trace: Trace, registry=None) -> Fraction:
    """Unnormalized density: product of choice pdfs and observation likelihoods."""
    registry = registry if registry is not None else _default_registry()
    d = Fraction(1)
    for _, w in _factors(trace, registry):
        d *= w
    return d


def prior_density(trace: Trace, registry=None) -> Fraction:
    """Product of the choice pdfs only (the forward-simulation probability)."""
    registry = registry if registry is not None else _default_registry()
    d = Fraction(1)
    for kind, w in _factors(trace, registry):
        if kind == "choice":
            d *= w
    return d


def observe_weight(trace: Trace, registry=None) -> Fraction:
    """Product of the observation likelihoods only."""
    registry = registry if registry is not None else _default_registry()
    d = Fraction(1)
    for kind, w in _factors(trace, registry):
        if kind == "observe":
            d *= w
    return d


def log_density(trace: Trace) -> float:
    d = trace.density
    return math.log(d) if d > 0 else -math.inf


# --------------------------------------------------------------------------
# Extraction

class ExtractionError(ValueError):
    pass


class StitchError(ValueError):
    pass


@dataclass(frozen=True)
class Subtrace:
    """A trace of the subprogram together with its link to the original trace.

    ``origins`` has one entry per subprogram statement: ``("main", i)`` for the
    image of original statement ``i``, ``("fn", app_id)`` / ``("arg", app_id)``
    for the operator and argument split out of application ``app_id``, and
    ``("observe", choice_id)`` for a pinned outside choice.  ``provenance`` maps
    subtrace node ids to original node ids.
    """
    trace: Trace
    provenance: dict
    origins: tuple
    subproblem: Subproblem

    @property
    def program(self) -> Program:
        return self.trace.program

    def source(self) -> str:
        return print_program(self.program)


def _selected(s) -> frozenset:
    return s.selected if isinstance(s, Subproblem) else frozenset(s)


def _max_fresh_in_trace(trace: Trace) -> int:
    top = _first_fresh_index(trace.program) - 1
    for st in trace.stmts:
        root = st.param if isinstance(st, AugObserve) else st.expr
        for n in iter_nodes(root):
            if type(n) is AppNode and n.tail is not None:
                m = _FRESH_RE.match(n.tail.name)
                if m:
                    top = max(top, int(m.group(1)))
    return top


class _Extractor:
    def __init__(self, selected: frozenset, fresh_start: int):
        self.S = selected
        self.next_fresh = fresh_start

    def fresh(self) -> str:
        name = FRESH_PREFIX + str(self.next_fresh)
        self.next_fresh += 1
        return name

    def ex(self, ae):
        t = type(ae)
        if t is AppNode:
            f, h1 = self.ex(ae.fn)
            a, h2 = self.ex(ae.arg)
            if ae.fn.id in self.S or ae.tail is None:
                return replace(ae, fn=f, arg=a), h1 + h2
            b, h3 = self.ex(ae.tail.body)
            hoisted = (h1 + [(AugAssume(self.fresh(), f), ("fn", ae.id))]
                       + h2 + [(AugAssume(ae.tail.name, a), ("arg", ae.id))] + h3)
            return b, hoisted
        if t is DistNode:
            p, h1 = self.ex(ae.param)
            if ae.choice_id in self.S:
                return replace(ae, param=p), h1
            pinned = AugObserve(ae.dist, ae.label, p, ae.choice_id, rollback_expr(ae.result))
            r, h2 = self.ex(ae.result)
            return r, h1 + [(pinned, ("observe", ae.choice_id))] + h2
        return ae, []


def _zip_provenance(proto: Trace, fresh: Trace) -> dict:
    prov = {}
    for a, b in zip(proto.stmts, fresh.stmts):
        if isinstance(a, AugObserve):
            prov[b.obs_id] = a.obs_id
            ra, rb = a.param, b.param
        else:
            ra, rb = a.expr, b.expr
        for na, nb in zip(iter_nodes(ra), iter_nodes(rb)):
            if type(na) is not type(nb):
                raise ExtractionError("replayed subtrace diverges at node %d" % na.id)
            prov[nb.id] = na.id
            if type(na) is DistNode:
                prov[nb.choice_id] = na.choice_id
    return prov


def extract_trace(trace: Trace, s, registry=None) -> Subtrace:
    """Extract the subtrace of ``trace`` for the valid subproblem ``s``."""
    sub = s if isinstance(s, Subproblem) else None
    if sub is None:
        from .depgraph import check_subproblem
        sub = check_subproblem(trace.graph, s)
        if not isinstance(sub, Subproblem):
            raise ExtractionError("invalid subproblem: %s" % sub)
    ex = _Extractor(sub.selected, _max_fresh_in_trace(trace) + 1)
    stmts, origins = [], []
    for i, st in enumerate(trace.stmts):
        if isinstance(st, AugAssume):
            e, hoisted = ex.ex(st.expr)
            main = AugAssume(st.name, e)
        else:
            e, hoisted = ex.ex(st.param)
            main = replace(st, param=e)
        for h, origin in hoisted:
            stmts.append(h)
            origins.append(origin)
        stmts.append(main)
        origins.append(("main", i))
    proto = Trace(stmts)
    program = _canonical_names(rollback(proto), origins)
    fresh = replay(program, list(choice_outcomes(proto)), registry)
    return Subtrace(fresh, _zip_provenance(proto, fresh), tuple(origins), sub)


# Hoisted names are renumbered in hoisting order so that traces differing
# only inside the subproblem extract to literally the same subprogram.
HOIST_PREFIX = FRESH_PREFIX + "h"
_HOIST_RE = re.compile(re.escape(HOIST_PREFIX) + r"(\d+)$")


def _canonical_names(program: Program, origins) -> Program:
    base = 0
    for name in program.assumed_names():
        m = _HOIST_RE.match(name)
        if m:
            base = max(base, int(m.group(1)) + 1)
    names = {}
    for st, origin in zip(program.stmts, origins):
        if origin[0] in ("fn", "arg"):
            names[st.name] = HOIST_PREFIX + str(base + len(names))
    out = []
    for st in program.stmts:
        if isinstance(st, Assume):
            out.append(Assume(names.get(st.name, st.name), _rename_free(st.expr, names)))
        else:
            call = st.expr
            out.append(Observe(DistCall(call.dist, _rename_free(call.param, names), call.label),
                               st.constrained))
    return Program(tuple(out))


# --------------------------------------------------------------------------
# Stitching

_LEAVES = (FreeVarNode, BoundVarNode, LiteralNode, LambdaNode)


def _first_divergence(p1: Program, p2: Program) -> int:
    for i, (a, b) in enumerate(zip(p1.stmts, p2.stmts)):
        if a != b:
            return i
    return min(len(p1), len(p2))


def stitch_trace(trace: Trace, new_sub, s, extracted: Subtrace | None = None,
                 registry=None) -> Trace:
    """Reinsert a trace of the subprogram into ``trace``.

    ``new_sub`` is a :class:`Trace` (or :class:`Subtrace`) of the subprogram
    obtained by extracting ``s`` from ``trace``; pass ``extracted`` to avoid
    recomputing that extraction.
    """
    ext = extracted if extracted is not None else extract_trace(trace, s, registry)
    new = new_sub.trace if isinstance(new_sub, Subtrace) else new_sub
    if new.program != ext.program:
        i = _first_divergence(new.program, ext.program)
        raise StitchError("subtrace is not from the extracted subprogram "
                          "(first divergent statement %d)" % i)
    S = _selected(s)
    where = {origin: k for k, origin in enumerate(ext.origins)}
    stmts = new.stmts
    outs = []

    def sub_root(origin):
        st = stmts[where[origin]]
        return st.param if isinstance(st, AugObserve) else st.expr

    def z(o, n):
        to = type(o)
        if to in _LEAVES:
            if type(n) not in _LEAVES or (to is LiteralNode) != (type(n) is LiteralNode):
                raise StitchError("structure mismatch at node %d" % o.id)
            return
        if to is AppNode:
            if o.fn.id in S:
                if type(n) is not AppNode:
                    raise StitchError("expected an application at node %d" % o.id)
                z(o.fn, n.fn)
                z(o.arg, n.arg)
                if n.tail is not None:
                    outs.extend(_outcomes_of(n.tail.body))
            elif o.tail is None:
                if type(n) is not AppNode or n.tail is not None:
                    raise StitchError("expected a stuck application at node %d" % o.id)
                z(o.fn, n.fn)
                z(o.arg, n.arg)
            else:
                z(o.fn, sub_root(("fn", o.id)))
                z(o.arg, sub_root(("arg", o.id)))
                z(o.tail.body, n)
            return
        if to is DistNode:
            if o.choice_id in S:
                if type(n) is not DistNode:
                    raise StitchError("expected a choice at node %d" % o.id)
                z(o.param, n.param)
                outs.append(rollback_expr(n.result))
            else:
                pinned = stmts[where[("observe", o.choice_id)]]
                z(o.param, pinned.param)
                outs.append(pinned.constrained)
                z(o.result, n)
            return
        raise StitchError("unknown node %r" % (o,))

    for i, st in enumerate(trace.stmts):
        root = st.param if isinstance(st, AugObserve) else st.expr
        z(root, sub_root(("main", i)))
    return replay(trace.program, outs, registry)


def _outcomes_of(ae):
    for n in iter_choices(ae):
        yield rollback_expr(n.result)


# --------------------------------------------------------------------------
# Equivalence

class _Equiv:
    def __init__(self, selected: frozenset):
        self.S = selected
        self.names: dict = {}   # generated names of the first trace -> second

    def lam_key(self, node: LambdaNode, mapped: bool) -> tuple:
        e = Lambda(node.param, node.body)
        if not mapped or not self.names:
            return alpha_key(e)
        return alpha_key(_rename_free(e, self.names))

    def eq(self, a, b) -> bool:
        ta = type(a)
        if ta is not type(b):
            return False
        if ta is FreeVarNode:
            return a.name == b.name
        if ta is BoundVarNode:
            return self.names.get(a.name, a.name) == b.name
        if ta is LiteralNode:
            return a.value == b.value
        if ta is LambdaNode:
            return self.lam_key(a, True) == self.lam_key(b, False)
        if ta is AppNode:
            if not (self.eq(a.fn, b.fn) and self.eq(a.arg, b.arg)):
                return False
            if a.fn.id in self.S:
                return True
            if a.tail is None or b.tail is None:
                return a.tail is None and b.tail is None
            self.names[a.tail.name] = b.tail.name
            return self.eq(a.tail.body, b.tail.body)
        if ta is DistNode:
            if a.dist != b.dist or a.label != b.label or not self.eq(a.param, b.param):
                return False
            if a.choice_id in self.S:
                return True
            return self.eq(a.result, b.result)
        return False


def _rename_free(e, names: dict):
    if not names:
        return e
    if isinstance(e, Var):
        return Var(names.get(e.name, e.name))
    if isinstance(e, Lambda):
        inner = {k: v for k, v in names.items() if k != e.param}
        return Lambda(e.param, _rename_free(e.body, inner))
    if isinstance(e, App):
        return App(_rename_free(e.fn, names), _rename_free(e.arg, names))
    if isinstance(e, DistCall):
        return DistCall(e.dist, _rename_free(e.param, names), e.label)
    return e


def equiv(s, t: Trace, t2: Trace) -> bool:
    """True iff ``t2`` differs from ``t`` only inside the subproblem ``s``.

    Subproblem membership is tested with the node ids of ``t``.
    """
    if len(t.stmts) != len(t2.stmts):
        return False
    chk = _Equiv(_selected(s))
    for a, b in zip(t.stmts, t2.stmts):
        if type(a) is not type(b):
            return False
        if isinstance(a, AugAssume):
            if a.name != b.name or not chk.eq(a.expr, b.expr):
                return False
        else:
            if (a.dist != b.dist or a.label != b.label
                    or alpha_key(a.constrained) != alpha_key(b.constrained)
                    or not chk.eq(a.param, b.param)):
                return False
    return True
