"""Selection strategies, black-box kernels and inference metaprograms."""

from __future__ import annotations

import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .depgraph import Subproblem, complete_subproblem
from .executor import (ForwardSampler, Trace, explore, execute, make_rng,
                       revalidate)
from .lang import Program
from .transform import extract_trace, observe_weight, stitch_trace

__all__ = [
    "ByLabels", "SingleSite", "AllChoices", "Custom", "select",
    "EmptySelectionWarning", "KernelContractError", "MetaprogramError",
    "InitializationError", "EnumGibbs", "PriorMH", "BlackBox", "Mix", "Clause",
    "InferenceCache", "infer_step", "run_chain", "initial_trace",
    "kernel_enum_gibbs", "kernel_prior_mh",
    "parse_metaprogram", "metaprogram_to_json", "strategies_of",
]

DEFAULT_ENUM_CAP = 4096


# --------------------------------------------------------------------------
# Strategies

class EmptySelectionWarning(UserWarning):
    pass


def _matching(t: Trace, labels: frozenset) -> set:
    g = t.graph
    return {c for c, lab in g.choice_labels.items()
            if lab in labels or g.choice_stmt.get(c) in labels}


@dataclass(frozen=True)
class ByLabels:
    """Choices whose label, or enclosing assume name, is in ``labels``."""
    labels: frozenset

    def __init__(self, labels):
        object.__setattr__(self, "labels", frozenset(labels))

    def seeds(self, t: Trace) -> set:
        return _matching(t, self.labels)

    def describe(self):
        return {"by-labels": sorted(self.labels)}


@dataclass(frozen=True)
class SingleSite:
    label: str

    def seeds(self, t: Trace) -> set:
        return _matching(t, frozenset((self.label,)))

    def describe(self):
        return {"single-site": self.label}


@dataclass(frozen=True)
class AllChoices:
    def seeds(self, t: Trace) -> set:
        return set(t.graph.choice_labels)

    def describe(self):
        return {"all-choices": True}


@dataclass(frozen=True, eq=False)
class Custom:
    """Strategy given by a function from a trace to seed choice ids."""
    fn: Callable
    name: str = "custom"

    def seeds(self, t: Trace) -> set:
        return set(self.fn(t))

    def describe(self):
        return {"custom": self.name}


def select(st, t: Trace) -> Subproblem:
    seed = st.seeds(t)
    if not seed:
        warnings.warn("strategy %s matched no choices" % (st.describe(),),
                      EmptySelectionWarning, stacklevel=2)
    return complete_subproblem(t.graph, seed)


# --------------------------------------------------------------------------
# Kernels and metaprograms

class KernelContractError(RuntimeError):
    """A kernel returned a trace that is not a valid trace of its subprogram."""


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumGibbs:
    cap: int = DEFAULT_ENUM_CAP
    name = "enum-gibbs"


@dataclass(frozen=True)
class PriorMH:
    name = "prior-mh"


@dataclass(frozen=True)
class BlackBox:
    kernel: object


@dataclass(frozen=True)
class Clause:
    weight: Fraction
    strategy: object
    sub: object


@dataclass(frozen=True)
class Mix:
    clauses: tuple

    def __post_init__(self):
        cl = tuple(c if isinstance(c, Clause) else Clause(Fraction(c[0]), c[1], c[2])
                   for c in self.clauses)
        object.__setattr__(self, "clauses", cl)
        if not cl:
            raise MetaprogramError("mix", "needs at least one clause")
        for k, c in enumerate(cl):
            if c.weight <= 0:
                raise MetaprogramError("mix[%d].weight" % k, "must be positive")
        if sum(c.weight for c in cl) != 1:
            raise MetaprogramError("mix", "weights must sum to exactly 1")

    @property
    def cumulative(self) -> tuple:
        acc, out = Fraction(0), []
        for c in self.clauses:
            acc += c.weight
            out.append(float(acc))
        return tuple(out)


def strategies_of(mp) -> list:
    """Top-level strategies of a metaprogram (empty for a black box)."""
    return [c.strategy for c in mp.clauses] if isinstance(mp, Mix) else []


# --------------------------------------------------------------------------
# Caching

class _ProgramState:
    """Per-program memo: enumeration, forward sampler, weights, verified traces."""

    def __init__(self, program: Program, registry=None):
        self.program = program
        self.registry = registry
        self._space = None
        self._sampler = None
        self.weights: dict = {}
        self.verified: set = set()

    def space(self, cap: int):
        if self._space is None:
            traces = list(explore(self.program, self.registry, cap))
            dens = [t.density for t in traces]
            total = sum(dens, Fraction(0))
            if total == 0:
                raise ValueError("subprogram has zero total density")
            acc, cum = Fraction(0), []
            for d in dens:
                acc += d
                cum.append(float(acc / total))
            cum[-1] = 1.0
            self._space = (traces, cum)
        return self._space

    @property
    def sampler(self) -> ForwardSampler:
        if self._sampler is None:
            self._sampler = ForwardSampler(self.program, self.registry)
        return self._sampler

    def weight(self, t: Trace) -> Fraction:
        w = self.weights.get(t.key)
        if w is None:
            w = self.weights[t.key] = observe_weight(t, self.registry)
        return w

    def verify(self, t: Trace) -> None:
        if t.key in self.verified:
            return
        if t.program != self.program:
            raise KernelContractError("kernel returned a trace of a different program")
        v = revalidate(t, self.registry)
        if not v:
            raise KernelContractError("kernel returned an invalid trace (node %s: %s)"
                                      % (v.node_id, v.message))
        self.verified.add(t.key)


@dataclass
class InferenceCache:
    """Memo tables shared by the steps of one chain."""
    registry: object = None
    programs: dict = field(default_factory=dict)    # Program -> _ProgramState
    by_trace: dict = field(default_factory=dict)    # trace key -> _ProgramState
    extracted: dict = field(default_factory=dict)   # (strategy, key) -> (t, sub, ext, state)
    stitched: dict = field(default_factory=dict)    # (key, clause id, key') -> Trace

    def state_for_program(self, p: Program) -> _ProgramState:
        st = self.programs.get(p)
        if st is None:
            st = self.programs[p] = _ProgramState(p, self.registry)
        return st

    def state_for_trace(self, t: Trace) -> _ProgramState:
        st = self.by_trace.get(t.key)
        if st is None:
            st = self.by_trace[t.key] = self.state_for_program(t.program)
        return st

    def extract(self, strategy, t: Trace):
        k = (strategy, t.key)
        hit = self.extracted.get(k)
        if hit is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptySelectionWarning)
                sub = select(strategy, t)
            ext = extract_trace(t, sub, self.registry)
            hit = self.extracted[k] = (t, sub, ext, self.state_for_program(ext.program))
        return hit


def _draw(cum, rng) -> int:
    return min(bisect_right(cum, rng.random()), len(cum) - 1)


def _apply_kernel(kernel, t: Trace, state: _ProgramState, rng) -> Trace:
    if isinstance(kernel, EnumGibbs):
        traces, cum = state.space(kernel.cap)
        return traces[_draw(cum, rng)]
    if isinstance(kernel, PriorMH):
        proposal = state.sampler.sample(rng)
        w_old = state.weight(t)
        if w_old == 0:
            return proposal
        ratio = state.weight(proposal) / w_old
        if ratio >= 1 or rng.random() < float(ratio):
            return proposal
        return t
    if callable(kernel):
        return kernel(state.program, t, rng)
    raise TypeError("unknown kernel %r" % (kernel,))


def infer_step(mp, t: Trace, rng, cache: InferenceCache | None = None) -> Trace:
    """One transition of the metaprogram ``mp`` from trace ``t``."""
    cache = cache if cache is not None else InferenceCache()
    if isinstance(mp, BlackBox):
        state = cache.state_for_trace(t)
        out = _apply_kernel(mp.kernel, t, state, rng)
        state.verify(out)
        return out
    if not isinstance(mp, Mix):
        raise TypeError("not a metaprogram: %r" % (mp,))
    n = _draw(mp.cumulative, rng)
    clause = mp.clauses[n]
    base, sub, ext, state = cache.extract(clause.strategy, t)
    new_s = infer_step(clause.sub, ext.trace, rng, cache)
    state.verify(new_s)
    k = (t.key, id(clause), new_s.key)
    out = cache.stitched.get(k)
    if out is None:
        out = cache.stitched[k] = stitch_trace(base, new_s, sub, ext, cache.registry)
    return out


def initial_trace(p: Program, rng, cap: int = 1000, registry=None) -> Trace:
    """First positive-density forward sample."""
    for _ in range(cap):
        t = execute(p, rng, registry)
        if t.density > 0:
            return t
    raise InitializationError("no positive-density trace in %d forward runs" % cap)


def run_chain(mp, p: Program, iters: int, burnin: int = 0, thin: int = 1, rng=None,
              init_cap: int = 1000, cache: InferenceCache | None = None,
              registry=None) -> list:
    """Thinned post-burnin states of the chain started from a forward sample."""
    if iters < burnin or burnin < 0:
        raise ValueError("need iters >= burnin >= 0")
    if thin < 1:
        raise ValueError("thin must be at least 1")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = make_rng(rng)
    cache = cache if cache is not None else InferenceCache(registry=registry)
    t = initial_trace(p, rng, init_cap, registry)
    out = []
    for i in range(iters):
        t = infer_step(mp, t, rng, cache)
        if i >= burnin and (i - burnin) % thin == 0:
            out.append(t)
    return out


def kernel_enum_gibbs(p_s: Program, t_s: Trace, rng, cap: int = DEFAULT_ENUM_CAP) -> Trace:
    """Exact draw from the normalized posterior of ``p_s`` (ignores ``t_s``)."""
    return _apply_kernel(EnumGibbs(cap), t_s, _ProgramState(p_s), rng)


def kernel_prior_mh(p_s: Program, t_s: Trace, rng) -> Trace:
    """Independence MH step with the forward prior of ``p_s`` as proposal."""
    return _apply_kernel(PriorMH(), t_s, _ProgramState(p_s), rng)


# --------------------------------------------------------------------------
# JSON form

class MetaprogramError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__("%s: %s" % (path, message))


_KERNELS = {"enum-gibbs": EnumGibbs, "prior-mh": PriorMH}


def _parse_weight(w, path) -> Fraction:
    if isinstance(w, bool) or not isinstance(w, (str, int)):
        raise MetaprogramError(path, "weight must be a rational string such as \"1/2\"")
    try:
        f = Fraction(w)
    except (ValueError, ZeroDivisionError):
        raise MetaprogramError(path, "not a rational: %r" % (w,)) from None
    if f <= 0:
        raise MetaprogramError(path, "must be positive")
    return f


def _parse_strategy(obj, path):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise MetaprogramError(path, "expected one of by-labels, single-site, all-choices")
    (kind, val), = obj.items()
    if kind == "by-labels":
        if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
            raise MetaprogramError(path + ".by-labels", "expected a list of labels")
        return ByLabels(val)
    if kind == "single-site":
        if not isinstance(val, str):
            raise MetaprogramError(path + ".single-site", "expected a label")
        return SingleSite(val)
    if kind == "all-choices":
        if val is not True:
            raise MetaprogramError(path + ".all-choices", "expected true")
        return AllChoices()
    raise MetaprogramError(path, "unknown strategy %r" % kind)


def parse_metaprogram(obj, path: str = ""):
    """Build a metaprogram from its JSON object form, validating as it goes."""
    here = path or "$"
    if not isinstance(obj, dict) or len(obj) != 1:
        raise MetaprogramError(here, "expected {\"blackbox\": ...} or {\"mix\": [...]}")
    (kind, val), = obj.items()
    if kind == "blackbox":
        if val not in _KERNELS:
            raise MetaprogramError(path + ".blackbox" if path else "blackbox",
                                   "unknown kernel %r" % (val,))
        return BlackBox(_KERNELS[val]())
    if kind != "mix":
        raise MetaprogramError(here, "unknown metaprogram form %r" % kind)
    base = path + ".mix" if path else "mix"
    if not isinstance(val, list) or not val:
        raise MetaprogramError(base, "expected a non-empty list of clauses")
    clauses = []
    for k, c in enumerate(val):
        cp = "%s[%d]" % (base, k)
        if not isinstance(c, dict):
            raise MetaprogramError(cp, "expected an object")
        missing = {"weight", "strategy", "sub"} - c.keys()
        if missing:
            raise MetaprogramError("%s.%s" % (cp, sorted(missing)[0]), "missing")
        extra = c.keys() - {"weight", "strategy", "sub"}
        if extra:
            raise MetaprogramError("%s.%s" % (cp, sorted(extra)[0]), "unknown field")
        clauses.append(Clause(_parse_weight(c["weight"], cp + ".weight"),
                              _parse_strategy(c["strategy"], cp + ".strategy"),
                              parse_metaprogram(c["sub"], cp + ".sub")))
    if sum(c.weight for c in clauses) != 1:
        raise MetaprogramError(base, "weights must sum to exactly 1")
    return Mix(tuple(clauses))


def metaprogram_to_json(mp) -> dict:
    if isinstance(mp, BlackBox):
        return {"blackbox": mp.kernel.name}
    return {"mix": [{"weight": str(c.weight), "strategy": c.strategy.describe(),
                     "sub": metaprogram_to_json(c.sub)} for c in mp.clauses]}
