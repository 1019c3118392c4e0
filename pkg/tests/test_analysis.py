import warnings
from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest

import oracles
from subinfer.analysis import (EXACT_CONNECTIVITY_LIMIT, KernelMatrix, OracleError,
                               ReversibilityError, build_kernel_matrix, check_aperiodic,
                               check_connectivity, check_irreducible, check_premises,
                               check_reversible, check_stationary, clause_matrix,
                               decompose_by_strategy, enumerate_traces, histogram, posterior,
                               tv_distance)
from subinfer.corpus import CORPUS, standard_metaprograms
from subinfer.executor import church_bool, execute, make_rng
from subinfer.inference import (AllChoices, BlackBox, ByLabels, Custom, EmptySelectionWarning,
                                EnumGibbs, Mix, PriorMH)
from subinfer.lang import parse
from subinfer.serialize import trace_label

GIBBS = BlackBox(EnumGibbs())


def _space(name):
    return enumerate_traces(CORPUS[name].program)


def _labels(space, idx):
    return [trace_label(space.traces[i]) for i in idx]


def _xor_split():
    return Mix(((F(1, 2), ByLabels(["x"]), GIBBS), (F(1, 2), ByLabels(["y"]), GIBBS)))


def _xor_joint():
    third = F(1, 3)
    return Mix(((third, ByLabels(["x"]), GIBBS), (third, ByLabels(["y"]), GIBBS),
                (third, ByLabels(["x", "y"]), GIBBS)))


# ------------------------------------------------------------- spaces, posterior

def test_enumerate_small_spaces():
    det = _space("deterministic")
    assert len(det) == 1 and det.densities == [1]
    prod = _space("product")
    assert prod.densities == [F(1, 4)] * 4
    tf = _space("two_flip")
    assert sorted(tf.densities) == [F(7, 100), F(27, 100)]


def test_posteriors_against_oracles():
    for name in sorted(CORPUS):
        space = _space(name)
        got = {trace_label(t): p for t, p in zip(space.traces, posterior(space).probs)}
        assert got == oracles.normalized(name)
    for name, frozen in oracles.FROZEN_POSTERIORS.items():
        assert oracles.normalized(name) == frozen


def test_zero_mass_posterior_rejected():
    space = enumerate_traces(parse("(assume x (flip 1/2))\n(observe (flip 0) #t)"))
    with pytest.raises(ValueError):
        posterior(space)


def test_position_of_foreign_trace():
    with pytest.raises(OracleError):
        _space("fair_coin").position(execute(CORPUS["two_flip"].program, make_rng(0)))


# ----------------------------------------------------------------------- matrices

def test_enum_gibbs_rows_are_posterior():
    space = _space("chain3")
    K = build_kernel_matrix(GIBBS, space)
    post = posterior(space)
    assert K.exact and all(tuple(row) == post.probs for row in K.entries)
    assert check_stationary(K, post) == 0


def test_gibbs_mixture_is_weighted_sum_of_clauses():
    space = _space("product_2x2")
    p = F(1, 3)
    mix = Mix(((p, ByLabels(["x"]), GIBBS), (1 - p, ByLabels(["y"]), GIBBS)))
    K = build_kernel_matrix(mix, space)
    kx = clause_matrix(ByLabels(["x"]), GIBBS, space)
    ky = clause_matrix(ByLabels(["y"]), GIBBS, space)
    n = len(space)
    assert all(K[i, j] == p * kx[i, j] + (1 - p) * ky[i, j] for i in range(n) for j in range(n))


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_corpus_matrices(name):
    e = CORPUS[name]
    space = enumerate_traces(e.program)
    post = posterior(space)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySelectionWarning)
        for mp in standard_metaprograms(e).values():
            K = build_kernel_matrix(mp, space)
            assert K.max_row_error() <= (0 if K.exact else 1e-12)
            r = check_stationary(K, post)
            assert r == 0 if K.exact else r < 1e-9
            assert check_aperiodic(K, post)


def test_corrupted_matrix_is_not_stationary():
    space = _space("product_2x2")
    post = posterior(space)
    K = build_kernel_matrix(_xor_split(), space)
    rows = [list(r) for r in K.entries]
    rows[0] = rows[0][1:] + rows[0][:1]
    assert check_stationary(KernelMatrix(rows, True, space), post) > 0


def test_prior_mh_matrix_analytic_values():
    space = _space("two_flip")
    K = build_kernel_matrix(BlackBox(PriorMH()), space)
    assert not K.exact
    i_t = [trace_label(t) for t in space.traces].index("[#t]")
    i_f = 1 - i_t
    # from x=#t: propose #f w.p. 7/10, accept w.p. (1/10)/(9/10)
    assert K[i_t, i_f] == pytest.approx(7 / 10 * 1 / 9)
    assert K[i_f, i_t] == pytest.approx(3 / 10)


def test_reversibility_violation_aborts_matrix():
    space = _space("dependent")
    st = _adversarial()
    with pytest.raises(ReversibilityError):
        build_kernel_matrix(Mix(((1, st, GIBBS),)), space)


# ------------------------------------------------------------ strategy structure

def test_all_choices_one_class():
    dec = decompose_by_strategy(AllChoices(), _space("product_2x2"))
    assert len(dec.classes) == 1 and dec.symmetric and dec.transitive


def test_fixed_label_classes_group_by_other_site():
    space = _space("product")
    dec = decompose_by_strategy(ByLabels(["x"]), space)
    assert len(dec.classes) == 2
    for members in dec.classes:
        ys = {trace_label(space.traces[i]).split()[1] for i in members}
        assert len(ys) == 1


def test_empty_strategy_singletons():
    space = _space("product")
    dec = decompose_by_strategy(ByLabels([]), space)
    assert len(dec.classes) == len(space)


def test_class_conditional_matches_subprogram_posterior():
    space = _space("product_2x2")
    post = posterior(space)
    dec = decompose_by_strategy(ByLabels(["x"]), space, post)
    for members, cond in zip(dec.classes, dec.conditional):
        z = sum(post.probs[i] for i in members)
        assert cond == tuple(post.probs[i] / z for i in members)


def _adversarial():
    def seeds(t):
        g = t.graph
        by_name = {g.choice_stmt[c]: c for c in g.choice_nodes}
        y = t.stmts[1].expr.value
        return {by_name["x"]} if church_bool(y) else set()
    return Custom(seeds, "x-iff-y")


def test_fixed_labels_reversible_on_corpus():
    for name, e in sorted(CORPUS.items()):
        space = enumerate_traces(e.program)
        for site in e.sites:
            assert check_reversible(ByLabels([site]), space), (name, site)
        assert check_reversible(AllChoices(), space)


def test_adversarial_strategy_not_reversible():
    space = _space("dependent")
    rep = check_reversible(_adversarial(), space)
    assert not rep
    # from x=y=#t the move may land where y is #f, which selects nothing
    assert _labels(space, rep.witness) == ["[#t #t]", "[#t #f]"]


# ---------------------------------------------------------------- connectivity

def test_connectivity_xor():
    space = _space("xor")
    post = posterior(space)
    rep = check_connectivity([ByLabels(["x"]), ByLabels(["y"])], space, post)
    assert not rep and rep.mode == "exact"
    assert _labels(space, rep.witness) == ["[#t #t]"]
    # its x-class also holds the zero-mass trace [#f #t], so A is not a union of classes
    assert rep.class_aligned is False
    joint = check_connectivity([ByLabels(["x"]), ByLabels(["y"]), ByLabels(["x", "y"])], space, post)
    assert joint and joint.mode == "exact"
    # checking ordered strategy pairs one at a time still finds a violating set
    assert joint.literal_pairwise is False


def test_all_choices_connects():
    space = _space("chain3")
    assert check_connectivity([AllChoices()], space)


def test_sufficient_mode_above_limit():
    src = "\n".join("(assume v%d (flip 1/2))" % k for k in range(5))
    space = enumerate_traces(parse(src))
    assert len(space) > EXACT_CONNECTIVITY_LIMIT
    rep = check_connectivity([ByLabels(["v%d" % k]) for k in range(5)], space)
    assert rep and rep.mode == "sufficient-only"
    rep = check_connectivity([ByLabels(["v0"])], space)
    assert not rep and rep.mode == "sufficient-only"


def test_premises_recurse_into_nested_mix():
    e = CORPUS["chain3"]
    space = enumerate_traces(e.program)
    ok = Mix(((1, AllChoices(), Mix(((1, AllChoices(), GIBBS),))),))
    assert check_premises(ok, space)
    # the inner mixture only ever moves a; b and c stay frozen inside the outer step
    stuck = Mix(((1, ByLabels(["a", "b", "c"]), Mix(((1, ByLabels(["a"]), GIBBS),))),))
    rep = check_premises(stuck, space)
    assert not rep and any(".sub" in p for p in rep.problems)
    assert not check_irreducible(build_kernel_matrix(stuck, space), posterior(space))


# ------------------------------------------------------------ matrix diagnostics

def test_irreducibility():
    fair = _space("fair_coin")
    assert check_irreducible(build_kernel_matrix(GIBBS, fair), posterior(fair))
    xor = _space("xor")
    post = posterior(xor)
    assert not check_irreducible(build_kernel_matrix(_xor_split(), xor), post)
    assert check_irreducible(build_kernel_matrix(_xor_joint(), xor), post)


def test_aperiodicity_controls():
    assert not check_aperiodic(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert check_aperiodic(np.array([[0.5, 0.5], [1.0, 0.0]]))
    three = np.roll(np.eye(3), 1, axis=1)
    assert not check_aperiodic(three)


def test_tv_distance():
    space = _space("fair_coin")
    post = posterior(space)
    keys = [t.key for t in space.traces]
    assert tv_distance(Counter({keys[0]: 5, keys[1]: 5}), space, post) == 0
    assert tv_distance(Counter({keys[0]: 7}), space, post) == pytest.approx(0.5)
    other = execute(CORPUS["two_flip"].program, make_rng(0))
    with pytest.raises(OracleError):
        tv_distance(histogram([other]), space, post)
