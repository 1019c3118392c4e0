"""Dependence graphs of traces and valid subproblems.

Nodes are trace node ids, marked deterministic (``DET``) or stochastic
(``SAMPLE``).  Data edges run producer -> consumer; existential edges run
controller -> controlled.  A subproblem is valid when no existential edge
leaves it and every data edge leaving it ends at a sample node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .executor import (AppNode, AugAssume, AugObserve, BoundVarNode, DistNode,
                       Trace, iter_nodes)

__all__ = [
    "DET", "SAMPLE", "DepGraph", "Subproblem", "SubproblemViolation",
    "build_graph", "check_subproblem", "complete_subproblem",
    "brute_force_completion", "to_dot",
]

DET = "det"
SAMPLE = "sample"


@dataclass
class DepGraph:
    kinds: dict = field(default_factory=dict)          # id -> DET | SAMPLE
    data_edges: set = field(default_factory=set)       # (src, dst)
    exist_edges: set = field(default_factory=set)      # (src, dst)
    # bookkeeping used by selection strategies
    choice_labels: dict = field(default_factory=dict)  # choice id -> label
    choice_stmt: dict = field(default_factory=dict)    # choice id -> assume name or None
    observe_ids: set = field(default_factory=set)

    def __post_init__(self):
        self._succ = None

    def _index(self):
        if self._succ is None:
            data, exist = {}, {}
            for a, b in self.data_edges:
                data.setdefault(a, []).append(b)
            for a, b in self.exist_edges:
                exist.setdefault(a, []).append(b)
            self._succ = (data, exist)
        return self._succ

    def data_succ(self, n) -> list:
        return self._index()[0].get(n, [])

    def exist_succ(self, n) -> list:
        return self._index()[1].get(n, [])

    @property
    def sample_nodes(self) -> set:
        return {n for n, k in self.kinds.items() if k == SAMPLE}

    @property
    def choice_nodes(self) -> set:
        """Sample nodes that are stochastic choices (not observations)."""
        return set(self.choice_labels)

    def data_acyclic(self) -> bool:
        succ = self._index()[0]
        state = {}
        for root in self.kinds:
            if root in state:
                continue
            stack = [(root, iter(succ.get(root, ())))]
            state[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    return False
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(succ.get(nxt, ()))))
        return True


class _Builder:
    def __init__(self):
        self.g = DepGraph()

    def node(self, ae, stmt_name) -> int:
        """Add the graph of ``ae`` and return its root id."""
        g = self.g
        t = type(ae)
        g.kinds[ae.id] = DET
        if t is BoundVarNode:
            g.data_edges.add((ae.binder_id, ae.id))
        elif t is AppNode:
            self.node(ae.fn, stmt_name)
            self.node(ae.arg, stmt_name)
            if ae.tail is None:
                g.data_edges.add((ae.fn.id, ae.id))
                g.data_edges.add((ae.arg.id, ae.id))
            else:
                body = ae.tail.body
                self.node(body, stmt_name)
                g.data_edges.add((ae.fn.id, ae.id))
                g.data_edges.add((body.id, ae.id))
                for n in _ids_of(body):
                    g.exist_edges.add((ae.fn.id, n))
        elif t is DistNode:
            self.node(ae.param, stmt_name)
            self.node(ae.result, stmt_name)
            cid = ae.choice_id
            g.kinds[cid] = SAMPLE
            g.choice_labels[cid] = ae.label
            g.choice_stmt[cid] = stmt_name
            g.data_edges.add((ae.param.id, cid))
            for n in _ids_of(ae.result):
                g.exist_edges.add((cid, n))
            g.data_edges.add((ae.result.id, ae.id))
            g.data_edges.add((cid, ae.id))
        return ae.id


def _ids_of(ae) -> list:
    out = []
    for n in iter_nodes(ae):
        out.append(n.id)
        if type(n) is DistNode:
            out.append(n.choice_id)
    return out


def build_graph(trace: Trace) -> DepGraph:
    """Dependence graph of a trace."""
    b = _Builder()
    for s in trace.stmts:
        if isinstance(s, AugAssume):
            b.node(s.expr, s.name)
        elif isinstance(s, AugObserve):
            b.node(s.param, None)
            b.g.kinds[s.obs_id] = SAMPLE
            b.g.observe_ids.add(s.obs_id)
            b.g.data_edges.add((s.param.id, s.obs_id))
    return b.g


@dataclass(frozen=True)
class Subproblem:
    selected: frozenset
    absorbing: frozenset
    boundary: frozenset

    def __contains__(self, node_id) -> bool:
        return node_id in self.selected

    def __len__(self):
        return len(self.selected)


@dataclass(frozen=True)
class SubproblemViolation:
    """Edges that leave a candidate subproblem illegally."""
    exist_edges: tuple   # existential edges leaving the set
    data_edges: tuple    # data edges leaving the set into deterministic nodes

    def __bool__(self):
        return False

    def __str__(self):
        parts = ["existential edge %d->%d leaves the subproblem" % e for e in self.exist_edges]
        parts += ["data edge %d->%d ends at a deterministic node outside" % e
                  for e in self.data_edges]
        return "; ".join(parts)


def _absorbing_and_boundary(g: DepGraph, s: frozenset):
    absorbing = set()
    boundary = set()
    for a, b in g.data_edges:
        if a in s and b not in s and g.kinds.get(b) == SAMPLE:
            absorbing.add(b)
        if b in s and a not in s:
            boundary.add(a)
    return frozenset(absorbing), frozenset(boundary)


def check_subproblem(g: DepGraph, s) -> Subproblem | SubproblemViolation:
    """Validate ``s``; on success return it with its absorbing set and input boundary."""
    s = frozenset(s)
    unknown = s - g.kinds.keys()
    if unknown:
        raise ValueError("ids not in graph: %s" % sorted(unknown))
    bad_exist = sorted((a, b) for a, b in g.exist_edges if a in s and b not in s)
    bad_data = sorted((a, b) for a, b in g.data_edges
                      if a in s and b not in s and g.kinds[b] != SAMPLE)
    if bad_exist or bad_data:
        return SubproblemViolation(tuple(bad_exist), tuple(bad_data))
    absorbing, boundary = _absorbing_and_boundary(g, s)
    return Subproblem(s, absorbing, boundary)


def complete_subproblem(g: DepGraph, seed) -> Subproblem:
    """Least valid subproblem containing ``seed``.

    Closes the seed under existential successors and deterministic data
    successors; every valid superset of the seed contains this closure.
    """
    seed = set(seed)
    for n in seed:
        if g.kinds.get(n) != SAMPLE:
            raise ValueError("seed node %r is not a stochastic choice" % (n,))
    selected = set(seed)
    work = list(seed)
    while work:
        n = work.pop()
        for m in g.exist_succ(n):
            if m not in selected:
                selected.add(m)
                work.append(m)
        for m in g.data_succ(n):
            if m not in selected and g.kinds[m] == DET:
                selected.add(m)
                work.append(m)
    sub = check_subproblem(g, selected)
    assert isinstance(sub, Subproblem), sub
    return sub


def brute_force_completion(g: DepGraph, seed) -> frozenset | None:
    """Smallest valid superset of ``seed`` by exhaustive search (small graphs only).

    Returns None if the minimum is not unique.
    """
    seed = frozenset(seed)
    rest = sorted(set(g.kinds) - seed)
    for size in range(len(rest) + 1):
        found = [seed | frozenset(extra) for extra in combinations(rest, size)
                 if isinstance(check_subproblem(g, seed | frozenset(extra)), Subproblem)]
        if found:
            return found[0] if len(found) == 1 else None
    return None


def to_dot(g: DepGraph, name: str = "trace") -> str:
    """Graphviz rendering: sample nodes shaded, existential edges dashed."""
    lines = ["digraph %s {" % name, "  node [shape=ellipse];"]
    for n in sorted(g.kinds):
        if g.kinds[n] == SAMPLE:
            label = g.choice_labels.get(n, "observe")
            lines.append('  n%d [label="%d\\n%s", style=filled, fillcolor=gray];' % (n, n, label))
        else:
            lines.append('  n%d [label="%d"];' % (n, n))
    for a, b in sorted(g.data_edges):
        lines.append("  n%d -> n%d;" % (a, b))
    for a, b in sorted(g.exist_edges):
        lines.append("  n%d -> n%d [style=dashed];" % (a, b))
    lines.append("}")
    return "\n".join(lines) + "\n"
