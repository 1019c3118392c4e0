"""Exact finite-space analysis: enumeration, posteriors, kernel matrices and
convergence diagnostics."""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .executor import Trace, explore
from .inference import (BlackBox, EmptySelectionWarning, EnumGibbs, Mix, PriorMH,
                        select)
from .lang import Program
from .transform import equiv, extract_trace, observe_weight, prior_density, stitch_trace

__all__ = [
    "TraceSpace", "Posterior", "KernelMatrix", "ClassDecomposition",
    "ReversibilityReport", "ConnectivityReport", "OracleError", "ReversibilityError",
    "enumerate_traces", "posterior", "build_kernel_matrix", "clause_matrix",
    "decompose_by_strategy", "check_reversible", "check_connectivity",
    "check_stationary", "check_irreducible", "check_aperiodic",
    "tv_distance", "histogram", "EXACT_CONNECTIVITY_LIMIT",
    "PremiseReport", "check_premises",
]

EXACT_CONNECTIVITY_LIMIT = 16


class OracleError(RuntimeError):
    """The executor or a stitch produced a trace missing from the enumeration."""


class ReversibilityError(ValueError):
    pass


@dataclass
class TraceSpace:
    program: Program
    traces: list
    densities: list
    index: dict = field(repr=False)

    def __len__(self):
        return len(self.traces)

    def position(self, t: Trace) -> int:
        try:
            return self.index[t.key]
        except KeyError:
            raise OracleError("trace not in the enumerated space") from None


def enumerate_traces(p: Program, cap: int = 4096, registry=None) -> TraceSpace:
    traces, index = [], {}
    for t in explore(p, registry, cap):
        if t.key not in index:
            index[t.key] = len(traces)
            traces.append(t)
    return TraceSpace(p, traces, [t.density for t in traces], index)


@dataclass(frozen=True)
class Posterior:
    probs: tuple

    def floats(self) -> np.ndarray:
        return np.array([float(x) for x in self.probs])

    @property
    def support(self) -> list:
        return [i for i, x in enumerate(self.probs) if x > 0]


def posterior(space: TraceSpace) -> Posterior:
    total = sum(space.densities, Fraction(0))
    if total == 0:
        raise ValueError("program has zero total density")
    return Posterior(tuple(d / total for d in space.densities))


# --------------------------------------------------------------------------
# Kernel matrices

@dataclass
class KernelMatrix:
    """Transition matrix over a trace space.

    ``entries`` holds Fractions when ``exact`` is set, floats otherwise.
    """
    entries: list
    exact: bool
    space: TraceSpace = field(repr=False, default=None)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def as_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])

    def max_row_error(self):
        return max(abs(sum(row) - 1) for row in self.entries)

    def scaled(self, w) -> "KernelMatrix":
        return KernelMatrix([[w * x for x in row] for row in self.entries], self.exact, self.space)


def _zeros(n):
    return [[Fraction(0)] * n for _ in range(n)]


def _uses_mh(mp) -> bool:
    if isinstance(mp, BlackBox):
        return isinstance(mp.kernel, PriorMH)
    return any(_uses_mh(c.sub) for c in mp.clauses)


class _MatrixBuilder:
    def __init__(self, cap, registry):
        self.cap = cap
        self.registry = registry
        self.spaces: dict = {}
        self.matrices: dict = {}

    def space(self, p: Program) -> TraceSpace:
        s = self.spaces.get(p)
        if s is None:
            s = self.spaces[p] = enumerate_traces(p, self.cap, self.registry)
        return s

    def matrix(self, mp, space: TraceSpace) -> list:
        k = (id(mp), space.program)
        m = self.matrices.get(k)
        if m is None:
            m = self.matrices[k] = self._build(mp, space)
        return m

    def _build(self, mp, space):
        if isinstance(mp, BlackBox):
            if isinstance(mp.kernel, EnumGibbs):
                if not any(space.densities):
                    # a zero-mass class is never entered; hold still there
                    return [[Fraction(int(i == j)) for j in range(len(space))]
                            for i in range(len(space))]
                row = list(posterior(space).probs)
                return [list(row) for _ in space.traces]
            if isinstance(mp.kernel, PriorMH):
                return _prior_mh_rows(space, self.registry)
            raise TypeError("no analytic matrix for kernel %r" % (mp.kernel,))
        n = len(space)
        out = _zeros(n)
        for c in mp.clauses:
            m = self.clause(c.strategy, c.sub, space)
            for i in range(n):
                for j in range(n):
                    if m[i][j]:
                        out[i][j] += c.weight * m[i][j]
        return out

    def clause(self, strategy, sub_mp, space):
        n = len(space)
        m = _zeros(n)
        for i, t in enumerate(space.traces):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptySelectionWarning)
                sub = select(strategy, t)
            ext = extract_trace(t, sub, self.registry)
            subspace = self.space(ext.program)
            row = self.matrix(sub_mp, subspace)[subspace.position(ext.trace)]
            for j, w in enumerate(row):
                if not w:
                    continue
                target = stitch_trace(t, subspace.traces[j], sub, ext, self.registry)
                m[i][space.position(target)] += w
            self._check_class(strategy, space, i, ext.program, subspace, t, sub, ext)
        return m

    def _check_class(self, strategy, space, i, program, subspace, t, sub, ext):
        # every trace reachable in one move must extract to the same subprogram
        for s2 in subspace.traces:
            target = stitch_trace(t, s2, sub, ext, self.registry)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptySelectionWarning)
                sub2 = select(strategy, target)
            if extract_trace(target, sub2, self.registry).program != program:
                raise ReversibilityError(
                    "strategy %s gives traces %d and %d different subprograms"
                    % (strategy.describe(), i, space.position(target)))


def _prior_mh_rows(space: TraceSpace, registry) -> list:
    q = [prior_density(t, registry) for t in space.traces]
    w = [observe_weight(t, registry) for t in space.traces]
    n = len(space)
    rows = _zeros(n)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            acc = Fraction(1) if w[i] == 0 else min(Fraction(1), w[j] / w[i])
            rows[i][j] = q[j] * acc
        rows[i][i] = 1 - sum(rows[i])
    return rows


def build_kernel_matrix(mp, space: TraceSpace, cap: int = 4096, registry=None) -> KernelMatrix:
    """Transition matrix of one metaprogram step on ``space``.

    Entries are computed in exact arithmetic throughout; metaprograms that
    use the prior-proposal kernel are reported as floats.
    """
    b = _MatrixBuilder(cap, registry)
    b.spaces[space.program] = space
    rows = b.matrix(mp, space)
    if _uses_mh(mp):
        return KernelMatrix([[float(x) for x in r] for r in rows], False, space)
    return KernelMatrix(rows, True, space)


def clause_matrix(strategy, sub_mp, space: TraceSpace, cap: int = 4096,
                  registry=None) -> KernelMatrix:
    """Matrix of a single clause: select, extract, run ``sub_mp``, stitch."""
    b = _MatrixBuilder(cap, registry)
    b.spaces[space.program] = space
    return KernelMatrix(b.clause(strategy, sub_mp, space), not _uses_mh(sub_mp), space)


# --------------------------------------------------------------------------
# Strategy structure

def _relation(strategy, space: TraceSpace) -> list:
    n = len(space)
    rel = [[False] * n for _ in range(n)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySelectionWarning)
        for i, t in enumerate(space.traces):
            sub = select(strategy, t)
            for j, t2 in enumerate(space.traces):
                rel[i][j] = equiv(sub, t, t2)
    return rel


@dataclass(frozen=True)
class ClassDecomposition:
    classes: tuple               # tuple of tuples of indices
    class_of: tuple              # index -> class id
    conditional: tuple           # per class: tuple of Fractions over its members, or None
    symmetric: bool
    transitive: bool


def decompose_by_strategy(strategy, space: TraceSpace, post: Posterior | None = None
                          ) -> ClassDecomposition:
    rel = _relation(strategy, space)
    n = len(space)
    graph = csr_matrix(np.array(rel, dtype=np.int8)) if n else csr_matrix((0, 0))
    _, labels = connected_components(graph, directed=True, connection="weak")
    order = {}
    for i in range(n):
        order.setdefault(int(labels[i]), len(order))
    class_of = tuple(order[int(labels[i])] for i in range(n))
    classes = tuple(tuple(i for i in range(n) if class_of[i] == c) for c in range(len(order)))
    post = post if post is not None else posterior(space)
    cond = []
    for members in classes:
        mass = sum((post.probs[i] for i in members), Fraction(0))
        cond.append(tuple(post.probs[i] / mass for i in members) if mass > 0 else None)
    symmetric = all(rel[i][j] == rel[j][i] for i in range(n) for j in range(n))
    transitive = all(rel[i][k] for i in range(n) for j in range(n) if rel[i][j]
                     for k in range(n) if rel[j][k])
    return ClassDecomposition(classes, class_of, tuple(cond), symmetric, transitive)


@dataclass(frozen=True)
class ReversibilityReport:
    reversible: bool
    witness: tuple = ()   # chain of indices t_1 .. t_n with t_n not leading back to t_1

    def __bool__(self):
        return self.reversible


def check_reversible(strategy, space: TraceSpace) -> ReversibilityReport:
    """Chain condition: whatever a chain of moves reaches must lead back in one move."""
    rel = _relation(strategy, space)
    n = len(space)
    for i in range(n):
        parent = {i: None}
        frontier = [i]
        while frontier:
            nxt = []
            for u in frontier:
                for v in range(n):
                    if rel[u][v] and v not in parent:
                        parent[v] = u
                        nxt.append(v)
            frontier = nxt
        for j in sorted(parent):
            if not rel[j][i]:
                chain = [j]
                while parent[chain[-1]] is not None:
                    chain.append(parent[chain[-1]])
                return ReversibilityReport(False, tuple(reversed(chain)))
    return ReversibilityReport(True)


# --------------------------------------------------------------------------
# Connectivity

@dataclass(frozen=True)
class ConnectivityReport:
    connected: bool
    mode: str                       # "exact" or "sufficient-only"
    witness: tuple | None = None    # violating set A (indices)
    class_aligned: bool | None = None
    literal_pairwise: bool | None = None
    literal_witness: tuple | None = None

    def __bool__(self):
        return self.connected


def _masks(strategies, space):
    out = []
    for st in strategies:
        dec = decompose_by_strategy(st, space)
        cls = [sum(1 << i for i in members) for members in dec.classes]
        out.append([cls[dec.class_of[i]] for i in range(len(space))])
    return out


def _saturate(a: int, cm: list) -> int:
    s, k = 0, 0
    while a:
        if a & 1:
            s |= cm[k]
        a >>= 1
        k += 1
    return s


def _bits(a: int) -> tuple:
    return tuple(i for i in range(a.bit_length()) if a >> i & 1)


def check_connectivity(strategies, space: TraceSpace, post: Posterior | None = None
                       ) -> ConnectivityReport:
    """Exact check over every set of traces (small spaces), else a sufficient test.

    A set A with positive mass violates connectivity when its class
    saturations agree up to null sets for all strategies, yet each of them
    leaves positive mass outside.
    """
    post = post if post is not None else posterior(space)
    n = len(space)
    if n > EXACT_CONNECTIVITY_LIMIT:
        return ConnectivityReport(_sufficient(strategies, space, post), "sufficient-only")
    pos = sum(1 << i for i, x in enumerate(post.probs) if x > 0)
    full = (1 << n) - 1
    cms = _masks(strategies, space)
    witness = aligned = lit_witness = None
    sets = sorted(range(1, full + 1), key=lambda a: (bin(a).count("1"), a))
    for a in sets:
        if not a & pos:
            continue
        sats = [_saturate(a, cm) for cm in cms]
        covered = [not (full & ~s & pos) for s in sats]
        if lit_witness is None:
            for x, sx in enumerate(sats):
                for y, sy in enumerate(sats):
                    prem = not (sx & ~sy & pos) and not (~sx & sy & pos & full)
                    if prem and not covered[x] and not covered[y]:
                        lit_witness = (_bits(a), x, y)
                        break
                if lit_witness is not None:
                    break
        if witness is None and not any(covered):
            if all(s & pos == sats[0] & pos for s in sats):
                witness = _bits(a)
                aligned = all(s == a for s in sats)
        if witness is not None and lit_witness is not None:
            break
    return ConnectivityReport(witness is None, "exact", witness, aligned,
                              lit_witness is None, lit_witness)


def _sufficient(strategies, space, post) -> bool:
    if any(x == 0 for x in post.probs):
        return False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySelectionWarning)
        for t in space.traces:
            covered = set()
            for st in strategies:
                covered |= select(st, t).selected
            if not set(t.graph.choice_labels) <= covered:
                return False
    return True


@dataclass(frozen=True)
class PremiseReport:
    """Whether a metaprogram meets the convergence premises, recursively."""
    holds: bool
    problems: tuple = ()

    def __bool__(self):
        return self.holds


def check_premises(mp, space: TraceSpace, cap: int = 4096, registry=None) -> PremiseReport:
    """Reversible, connecting strategies at every level of ``mp``.

    Black-box kernels are accepted as given.  For a mixture, every clause
    strategy must be reversible, the strategies together must connect the
    space, and each sub-metaprogram must satisfy the same conditions on every
    subprogram it is run on.
    """
    problems = []
    seen = set()
    _premises(mp, space, cap, registry, "$", problems, seen)
    return PremiseReport(not problems, tuple(problems))


def _premises(mp, space, cap, registry, path, problems, seen):
    if isinstance(mp, BlackBox) or not any(space.densities):
        return
    key = (id(mp), space.program)
    if key in seen:
        return
    seen.add(key)
    strategies = [c.strategy for c in mp.clauses]
    for k, st in enumerate(strategies):
        if not check_reversible(st, space):
            problems.append("%s.mix[%d]: strategy is not reversible" % (path, k))
    if not check_connectivity(strategies, space):
        problems.append("%s: strategies do not connect the space" % path)
    for k, c in enumerate(mp.clauses):
        if isinstance(c.sub, BlackBox):
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySelectionWarning)
            programs = {extract_trace(t, select(c.strategy, t), registry).program
                        for t in space.traces}
        for p in programs:
            _premises(c.sub, enumerate_traces(p, cap, registry), cap, registry,
                      "%s.mix[%d].sub" % (path, k), problems, seen)


# --------------------------------------------------------------------------
# Matrix diagnostics

def check_stationary(K: KernelMatrix, post: Posterior):
    """L1 norm of pi K - pi (a Fraction for exact matrices)."""
    n = len(K)
    if K.exact:
        pi = post.probs
        return sum((abs(sum((pi[i] * K.entries[i][j] for i in range(n)), Fraction(0)) - pi[j])
                    for j in range(n)), Fraction(0))
    pi = post.floats()
    return float(np.abs(pi @ K.as_float() - pi).sum())


def _graph(K) -> csr_matrix:
    m = K.as_float() if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
    return csr_matrix((m > 0).astype(np.int8))


def check_irreducible(K: KernelMatrix, post: Posterior) -> bool:
    """Every positive-mass state reaches every other positive-mass state."""
    g = _graph(K)
    support = set(post.support)
    for i in support:
        reach = set(breadth_first_order(g, i, directed=True, return_predecessors=False).tolist())
        if not support <= reach:
            return False
    return True


def _period(g: csr_matrix, members: np.ndarray) -> int:
    inside = set(members.tolist())
    start = int(members[0])
    level = {start: 0}
    frontier = [start]
    p = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.indices[g.indptr[u]:g.indptr[u + 1]]:
                v = int(v)
                if v not in inside:
                    continue
                if v in level:
                    p = gcd(p, level[u] + 1 - level[v])
                else:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    return p


def check_aperiodic(K, post: Posterior | None = None) -> bool:
    """Period 1 on every recurrent class that carries mass (all classes if no posterior)."""
    g = _graph(K)
    n = g.shape[0]
    ncomp, labels = connected_components(g, directed=True, connection="strong")
    support = set(post.support) if post is not None else set(range(n))
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        if not support & set(members.tolist()):
            continue
        if len(members) == 1 and not g[int(members[0]), int(members[0])]:
            continue   # transient singleton without a loop
        if _period(g, members) != 1:
            return False
    return True


def histogram(traces) -> Counter:
    return Counter(t.key for t in traces)


def tv_distance(hist, space: TraceSpace, post: Posterior) -> float:
    """Total variation between an empirical histogram (by trace key) and the posterior."""
    total = sum(hist.values())
    emp = np.zeros(len(space))
    for k, c in hist.items():
        if k not in space.index:
            raise OracleError("sampled trace is missing from the enumerated space")
        emp[space.index[k]] += c
    if total:
        emp /= total
    return float(0.5 * np.abs(emp - post.floats()).sum())
