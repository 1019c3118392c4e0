import math
from itertools import combinations

import pytest

from subinfer.corpus import CORPUS
from subinfer.depgraph import complete_subproblem
from subinfer.executor import AugObserve, explore, make_rng, execute, revalidate
from subinfer.lang import parse
from subinfer.serialize import trace_label
from subinfer.transform import (ExtractionError, StitchError, density, equiv, extract_trace,
                                log_density, observe_weight, prior_density, stitch_trace)


def _subproblems(t):
    g = t.graph
    nodes = sorted(g.sample_nodes)
    seen = {}
    for k in range(len(nodes) + 1):
        for seed in combinations(nodes, k):
            s = complete_subproblem(g, seed)
            seen.setdefault(s.selected, s)
    return list(seen.values())


def _cases(names=None):
    for name in names or sorted(CORPUS):
        for t in explore(CORPUS[name].program):
            for s in _subproblems(t):
                yield name, t, s


def _two_flip_x():
    t = next(t for t in explore(CORPUS["two_flip"].program) if trace_label(t) == "[#t]")
    (x,) = t.graph.choice_nodes
    return t, complete_subproblem(t.graph, {x})


def test_two_flip_subtrace_shape():
    t, s = _two_flip_x()
    sub = extract_trace(t, s)
    assert len(sub.trace.graph.choice_nodes) == 1
    assert sum(isinstance(st, AugObserve) for st in sub.trace.stmts) == 1
    assert density(sub.trace) == density(t) == pytest.approx(0.27)
    assert revalidate(sub.trace)


def test_everything_selected_keeps_statements():
    p = CORPUS["product_2x2"].program
    t = execute(p, make_rng(0))
    s = complete_subproblem(t.graph, t.graph.sample_nodes)
    sub = extract_trace(t, s)
    assert sub.program == p
    assert density(sub.trace) == density(t)


def test_invalid_set_rejected():
    t, s = _two_flip_x()
    (x,) = t.graph.choice_nodes
    with pytest.raises(ExtractionError):
        extract_trace(t, {x})


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_density_and_round_trip(name):
    for _, t, s in _cases([name]):
        sub = extract_trace(t, s)
        assert density(sub.trace) == density(t)
        assert revalidate(sub.trace)
        assert stitch_trace(t, sub, s).key == t.key
        assert equiv(s, t, t)


@pytest.mark.parametrize("name", ["xor", "dependent", "lambda_beta", "higher_order", "nested_dist"])
def test_soundness_and_completeness(name):
    space = list(explore(CORPUS[name].program))
    for _, t, s in _cases([name]):
        ext = extract_trace(t, s)
        image = set()
        for ts in explore(ext.program):
            t2 = stitch_trace(t, ts, s, extracted=ext)
            assert revalidate(t2)
            assert equiv(s, t, t2)
            image.add(t2.key)
        assert image == {t2.key for t2 in space if equiv(s, t, t2)}


def test_outside_choice_change_breaks_equiv():
    p = parse("(assume x (flip 1/2))\n(assume y (flip 1/2))")
    a = next(u for u in explore(p) if trace_label(u) == "[#t #t]")
    b = next(u for u in explore(p) if trace_label(u) == "[#t #f]")
    xs = complete_subproblem(a.graph, {min(a.graph.choice_nodes)})
    assert not equiv(xs, a, b)


def test_stitch_rejects_foreign_subtrace():
    t, s = _two_flip_x()
    other = execute(CORPUS["fair_coin"].program, make_rng(0))
    with pytest.raises(StitchError, match="first divergent statement"):
        stitch_trace(t, other, s)


def test_provenance_injective_and_total():
    for _, t, s in _cases(["lambda_beta", "higher_order", "opaque"]):
        sub = extract_trace(t, s)
        prov = sub.provenance
        assert len(set(prov.values())) == len(prov)
        assert set(prov.values()) <= set(t.graph.kinds)
        assert set(prov) <= set(sub.trace.graph.kinds)


def test_density_factors():
    for name in sorted(CORPUS):
        for t in explore(CORPUS[name].program):
            assert density(t) == prior_density(t) * observe_weight(t)
            if density(t) > 0:
                assert math.isclose(log_density(t), math.log(density(t)), rel_tol=1e-12, abs_tol=1e-12)
            else:
                assert log_density(t) == -math.inf


def test_two_flip_total_mass():
    assert sum(density(t) for t in explore(CORPUS["two_flip"].program)) * 100 == 34
