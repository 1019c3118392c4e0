import warnings
from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest

import oracles
from subinfer.analysis import build_kernel_matrix, enumerate_traces
from subinfer.corpus import CORPUS
from subinfer.depgraph import complete_subproblem
from subinfer.executor import ForwardSampler, execute, explore, make_rng
from subinfer.inference import (AllChoices, BlackBox, ByLabels, Custom, EmptySelectionWarning,
                                EnumGibbs, InferenceCache, InitializationError,
                                KernelContractError, MetaprogramError, Mix, PriorMH, SingleSite,
                                infer_step, initial_trace, kernel_enum_gibbs, kernel_prior_mh,
                                metaprogram_to_json, parse_metaprogram, run_chain, select)
from subinfer.lang import parse
from subinfer.serialize import trace_label

TWO_FLIP = CORPUS["two_flip"]


def _x_true(t):
    return trace_label(t).startswith("[#t")


def test_by_labels_matches_completion():
    t = execute(TWO_FLIP.program, make_rng(0))
    (x,) = t.graph.choice_nodes
    want = complete_subproblem(t.graph, {x})
    assert select(ByLabels(["x"]), t) == want
    assert select(ByLabels(["s0"]), t) == want      # positional label
    assert select(SingleSite("x"), t) == want


def test_empty_selection_warns():
    t = execute(TWO_FLIP.program, make_rng(0))
    with pytest.warns(EmptySelectionWarning):
        s = select(ByLabels([]), t)
    assert not s.selected


def test_all_choices_absorbs_only_observations():
    for name in ("two_flip", "chain3", "lambda_beta", "higher_order"):
        t = execute(CORPUS[name].program, make_rng(1))
        s = select(AllChoices(), t)
        assert t.graph.choice_nodes <= s.selected
        assert s.absorbing <= t.graph.observe_ids


def test_enum_gibbs_one_step_is_exact():
    p = CORPUS["fair_coin"].program
    rng = make_rng(2)
    t0 = execute(p, rng)
    mp = BlackBox(EnumGibbs())
    cache = InferenceCache()
    n = 10_000
    heads = sum(_x_true(infer_step(mp, t0, rng, cache)) for _ in range(n))
    assert abs(heads / n - 0.5) < 0.02


def test_single_clause_mix_all_choices_equals_black_box():
    for name in ("product_2x2", "chain3", "two_observes"):
        space = enumerate_traces(CORPUS[name].program)
        direct = build_kernel_matrix(BlackBox(EnumGibbs()), space)
        mixed = build_kernel_matrix(Mix(((1, AllChoices(), BlackBox(EnumGibbs())),)), space)
        assert direct.entries == mixed.entries


def test_nested_mix_runs_on_subprogram():
    e = CORPUS["chain3"]
    inner = Mix(((1, ByLabels(["b"]), BlackBox(EnumGibbs())),))
    mp = Mix(((1, ByLabels(["a", "b"]), inner),))
    cache = InferenceCache()
    rng = make_rng(4)
    t = initial_trace(e.program, rng)
    for _ in range(50):
        t = infer_step(mp, t, rng, cache)
    outer_programs = {ext.program for (st, _), (_, _, ext, _) in cache.extracted.items()
                      if st == ByLabels(["a", "b"])}
    inner_bases = {base.program for (st, _), (base, _, _, _) in cache.extracted.items()
                   if st == ByLabels(["b"])}
    assert inner_bases and inner_bases <= outer_programs
    assert e.program not in inner_bases
    # c is pinned in the outer subprogram, so the inner step sees it as an observation
    assert all("(observe" in str(p) for p in inner_bases)


def test_run_chain_bookkeeping():
    p = CORPUS["fair_coin"].program
    mp = BlackBox(EnumGibbs())
    assert run_chain(mp, p, 10, burnin=10, rng=0) == []
    assert len(run_chain(mp, p, 100, burnin=10, thin=3, rng=0)) == 30
    with pytest.raises(ValueError):
        run_chain(mp, p, 5, burnin=6)
    with pytest.raises(ValueError):
        run_chain(mp, p, 5, thin=0)


def test_fair_coin_chain():
    out = run_chain(BlackBox(EnumGibbs()), CORPUS["fair_coin"].program, 10_000, rng=7)
    assert abs(sum(map(_x_true, out)) / len(out) - 0.5) < 0.02


@pytest.mark.slow
def test_two_flip_prior_mh_chain():
    mp = Mix(((1, ByLabels(["x"]), BlackBox(PriorMH())),))
    out = run_chain(mp, TWO_FLIP.program, 100_000, rng=11)
    assert abs(sum(map(_x_true, out)) / len(out) - 27 / 34) < 0.02


def test_prior_mh_without_observations_always_accepts():
    p = CORPUS["product"].program
    t = execute(p, make_rng(0))
    a, b = make_rng(5), make_rng(5)
    sampler = ForwardSampler(p)
    for _ in range(200):
        t = kernel_prior_mh(p, t, a)
        assert t.key == sampler.sample(b).key


def test_enum_gibbs_without_observations_draws_prior():
    p = CORPUS["categorical"].program
    rng = make_rng(8)
    t = execute(p, rng)
    n = 20_000
    counts = Counter(trace_label(kernel_enum_gibbs(p, t, rng)) for _ in range(n))
    prior = oracles.prior("categorical")
    assert sum(abs(counts[k] / n - float(v)) for k, v in prior.items()) < 0.04


@pytest.mark.slow
def test_prior_mh_matrix_matches_monte_carlo():
    space = enumerate_traces(TWO_FLIP.program)
    K = build_kernel_matrix(BlackBox(PriorMH()), space).as_float()
    rng = make_rng(12)
    mp = BlackBox(PriorMH())
    cache = InferenceCache()
    # start each row from each state so every row gets many samples
    counts = np.zeros_like(K)
    per_row = 500_000
    for i, start in enumerate(space.traces):
        t = start
        for _ in range(per_row):
            counts[i, space.position(infer_step(mp, t, rng, cache))] += 1
    assert np.abs(counts / per_row - K).max() < 0.005


def test_initialization_failure():
    with pytest.raises(InitializationError):
        initial_trace(parse("(assume x (flip 1/2))\n(observe (flip 0) #t)"), make_rng(0), cap=20)


def test_kernel_contract_enforced():
    p = CORPUS["fair_coin"].program
    other = execute(CORPUS["two_flip"].program, make_rng(0))
    bad = BlackBox(lambda prog, t, rng: other)
    with pytest.raises(KernelContractError, match="different program"):
        infer_step(bad, execute(p, make_rng(0)), make_rng(0))


def test_custom_strategy():
    st = Custom(lambda t: t.graph.choice_nodes, "everything")
    t = execute(CORPUS["chain3"].program, make_rng(0))
    assert select(st, t) == select(AllChoices(), t)
    assert st.describe() == {"custom": "everything"}


# ------------------------------------------------------------------- JSON form

def test_metaprogram_json_round_trip():
    obj = {"mix": [
        {"weight": "1/3", "strategy": {"by-labels": ["x"]}, "sub": {"blackbox": "prior-mh"}},
        {"weight": "2/3", "strategy": {"all-choices": True},
         "sub": {"mix": [{"weight": "1", "strategy": {"single-site": "y"},
                          "sub": {"blackbox": "enum-gibbs"}}]}},
    ]}
    mp = parse_metaprogram(obj)
    assert metaprogram_to_json(mp) == obj
    assert mp.clauses[0].weight == F(1, 3)


@pytest.mark.parametrize("obj, path", [
    ({"mix": [{"weight": "-1/2", "strategy": {"all-choices": True},
               "sub": {"blackbox": "enum-gibbs"}}]}, "mix[0].weight"),
    ({"mix": [{"weight": 0.5, "strategy": {"all-choices": True},
               "sub": {"blackbox": "enum-gibbs"}}]}, "mix[0].weight"),
    ({"mix": [{"weight": "1", "strategy": {"by-labels": "x"},
               "sub": {"blackbox": "enum-gibbs"}}]}, "mix[0].strategy.by-labels"),
    ({"mix": [{"weight": "1", "strategy": {"all-choices": True},
               "sub": {"blackbox": "gibbs"}}]}, "mix[0].sub.blackbox"),
    ({"mix": [{"weight": "1/2", "strategy": {"all-choices": True},
               "sub": {"blackbox": "enum-gibbs"}}]}, "mix"),
    ({"mix": [{"weight": "1", "strategy": {"all-choices": True}}]}, "mix[0].sub"),
    ({"loop": []}, "$"),
])
def test_metaprogram_errors_carry_paths(obj, path):
    with pytest.raises(MetaprogramError) as info:
        parse_metaprogram(obj)
    assert info.value.path == path


def test_mix_weights_validated():
    with pytest.raises(MetaprogramError):
        Mix(((F(1, 2), AllChoices(), BlackBox(EnumGibbs())),))
    with pytest.raises(MetaprogramError):
        Mix(())
