import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from polycasc import cascade, lattice
from polycasc.cascade import Alphabet, CascadeWeightLaw
from polycasc.env import DisorderLaw, cumulant
from polycasc.errors import TreeTooLarge

BERN = DisorderLaw.bernoulli()
GAUSS = DisorderLaw.gaussian()


def test_alphabet_size_and_parity():
    for m in (1, 2, 3, 5):
        ab = Alphabet.build(m, 1)
        assert ab.size == m + 1
        assert all((p[0] + m) % 2 == 0 for p in ab.points)
    ab2 = Alphabet.build(2, 2)
    assert (0, 0) in ab2.points and (1, 1) in ab2.points
    assert (1, 0) not in ab2.points


def test_block_weights_beta_zero_is_walk_distribution():
    wlaw = CascadeWeightLaw(Alphabet.build(4, 1), 0.0, GAUSS, mean_one=True)
    vec = cascade.block_weights(wlaw, seed=5)
    want = [math.exp(lattice.log_walk_prob(4, [p[0]])[0]) for p in wlaw.alphabet.points]
    assert vec == pytest.approx(want, rel=1e-12)
    assert vec.sum() == pytest.approx(1.0, rel=1e-12)


def test_block_weights_m1_structure():
    # one-step family: ((1/2) e^{b w(1,-1)}, (1/2) e^{b w(1,+1)}), raw mode
    wlaw = CascadeWeightLaw(Alphabet.build(1, 1), 0.9, BERN, mean_one=False)
    vec = cascade.block_weights(wlaw, seed=3)
    assert set(np.round(vec * 2, 10)) <= set(
        np.round([math.exp(0.9), math.exp(-0.9)], 10)
    )


def test_block_weights_m1_coordinates_independent():
    # the two one-step weights live on disjoint sites: correlation ~ 0
    wlaw = CascadeWeightLaw(Alphabet.build(1, 1), 1.0, BERN, mean_one=True)
    from polycasc.rng import stream

    mat = cascade.block_weight_matrix(wlaw, 2 * 10**4, stream(8, "blk"))
    corr = np.corrcoef(mat[:, 0], mat[:, 1])[0, 1]
    assert abs(corr) <= 4 / math.sqrt(mat.shape[0])


def test_block_matrix_matches_single_draw_law():
    # the vectorized family sampler agrees with the field-backed contract op;
    # a continuous law keeps the KS test valid (discrete atoms would shift
    # by float rounding between the two code paths)
    from polycasc.rng import stream

    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.8, GAUSS, mean_one=True)
    mat = cascade.block_weight_matrix(wlaw, 4000, stream(10, "blk2"))
    singles = np.array([cascade.block_weights(wlaw, seed=s) for s in range(600)])
    for col in range(mat.shape[1]):
        assert ks_2samp(mat[:, col], singles[:, col]).pvalue > 0.005


def test_block_matrix_bernoulli_atom_frequencies():
    # discrete case: compare atom probabilities directly
    from polycasc.rng import stream

    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.8, BERN, mean_one=True)
    mat = cascade.block_weight_matrix(wlaw, 4 * 10**4, stream(10, "blk2"))
    edge = np.round(mat[:, 0], 9)
    atoms, counts = np.unique(edge, return_counts=True)
    freqs = counts / edge.size
    assert atoms.size == 3
    # edge column is (1/4) e^{beta(w1+w2) - 2 lam}: probabilities 1/4, 1/2, 1/4
    for f, want in zip(freqs, (0.25, 0.5, 0.25)):
        assert abs(f - want) <= 4 * math.sqrt(want * (1 - want) / edge.size)


def test_mean_one_normalization():
    from polycasc.rng import stream

    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 1.0, GAUSS, mean_one=True)
    mat = cascade.block_weight_matrix(wlaw, 10**5, stream(4, "blk3"))
    s = mat.sum(axis=1)
    assert abs(s.mean() - 1.0) <= 4 * s.std(ddof=1) / math.sqrt(s.size)


def test_degenerate_cascade_is_identically_one():
    zero = DisorderLaw.finite_support([0.0], [1.0])
    wlaw = CascadeWeightLaw(Alphabet.build(1, 1), 0.7, zero, mean_one=True)
    vals = cascade.sample_cascade_batch(wlaw, 3, 50, seed=2)
    assert vals == pytest.approx(np.ones(50), rel=1e-12)


def test_cascade_martingale_means():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.9, BERN, mean_one=True)
    for levels in (1, 2, 3):
        vals = cascade.sample_cascade_batch(wlaw, levels, 10**4, seed=6 + levels)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - 1.0) <= 4 * se


def test_tree_too_large():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.9, BERN)
    with pytest.raises(TreeTooLarge):
        cascade.sample_cascade(wlaw, 20, seed=0, node_cap=1000)


def test_exact_level_one_equals_lattice_point_to_line():
    # one-block tree has the law of the m-step polymer partition
    m, beta = 3, 0.8
    wlaw = CascadeWeightLaw(Alphabet.build(m, 1), beta, GAUSS, mean_one=True)
    tree = cascade.sample_cascade_batch(wlaw, 1, 10**4, seed=12)
    pol = lattice.sample_point_to_line_batch(GAUSS, beta, m, 10**4, seed=13)
    assert ks_2samp(tree, pol).pvalue > 0.01


def test_pool_matches_exact_at_every_level():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.7, GAUSS, mean_one=True)
    pools = dict(cascade.pool_levels(wlaw, 3, 10**4, seed=21))
    for levels in (1, 2, 3):
        exact = cascade.sample_cascade_batch(wlaw, levels, 10**4, seed=30 + levels)
        assert ks_2samp(pools[levels], exact).pvalue > 0.01
        se = pools[levels].std(ddof=1) / math.sqrt(pools[levels].size)
        assert abs(pools[levels].mean() - 1.0) <= 4 * se


def test_pool_level_zero_is_all_ones():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.7, BERN)
    level0 = next(iter(cascade.pool_levels(wlaw, 1, 1000, seed=0)))
    assert level0[0] == 0
    assert np.all(level0[1] == 1.0)


def test_pool_size_validation():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.7, BERN)
    with pytest.raises(ValueError):
        cascade.sample_mtree_pool(wlaw, 2, 10, seed=0)


def test_p2p_tree_row_sums_equal_line_samples():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 1.0, GAUSS, mean_one=True)
    offs, mat = cascade.sample_mtree_p2p_batch(wlaw, 3, 500, seed=14)
    assert offs.tolist() == list(range(-6, 7, 2))
    line = cascade.sample_cascade_batch(wlaw, 3, 500, seed=14)
    # identical seed path is not guaranteed to couple them; compare by law
    assert ks_2samp(mat.sum(axis=1), line).pvalue > 0.005


def test_p2p_tree_beta_zero_deterministic():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.0, GAUSS, mean_one=True)
    offs, vec = cascade.sample_mtree_p2p(wlaw, 2, seed=1)
    want = [math.exp(lattice.log_walk_prob(4, [o])[0]) for o in offs]
    assert vec == pytest.approx(want, rel=1e-12)


def test_p2p_tree_level_one_equals_lattice_p2p_law():
    m, beta = 2, 0.9
    wlaw = CascadeWeightLaw(Alphabet.build(m, 1), beta, GAUSS, mean_one=True)
    offs, mat = cascade.sample_mtree_p2p_batch(wlaw, 1, 10**4, seed=3)
    j = offs.tolist().index(0)
    logp = lattice.log_walk_prob(m, [0])[0]
    tree_norm = mat[:, j] / math.exp(logp)
    lat = lattice.sample_point_to_point_batch(GAUSS, beta, m, 0, 10**4, seed=4)
    assert ks_2samp(tree_norm, lat).pvalue > 0.01


def test_p2p_pool_matches_exact_tree():
    m, levels, beta = 2, 3, 0.9
    wlaw = CascadeWeightLaw(Alphabet.build(m, 1), beta, GAUSS, mean_one=True)
    offs, mat = cascade.sample_mtree_p2p_batch(wlaw, levels, 2 * 10**4, seed=11)
    j = offs.tolist().index(0)
    exact_norm = mat[:, j] / math.exp(lattice.log_walk_prob(m * levels, [0])[0])
    pool = cascade.mtree_p2p_pool_batch(GAUSS, beta, m, levels, 0, 2 * 10**4, seed=12)
    assert ks_2samp(exact_norm, pool).pvalue > 0.01
    se = pool.std(ddof=1) / math.sqrt(pool.size)
    assert abs(pool.mean() - 1.0) <= 4 * se


def test_p2p_pool_off_center_endpoint():
    pool = cascade.mtree_p2p_pool_batch(BERN, 0.8, 2, 4, 4, 2 * 10**4, seed=13)
    se = pool.std(ddof=1) / math.sqrt(pool.size)
    assert abs(pool.mean() - 1.0) <= 4 * se


def test_free_energy_tree_beta_zero():
    wlaw = CascadeWeightLaw(Alphabet.build(2, 1), 0.0, BERN, mean_one=True)
    est = cascade.estimate_free_energy_tree(wlaw, 12, 2000, seed=5)
    assert est.per == "block"
    assert abs(est.value) <= 1e-12
    assert est.converged


def test_free_energy_tree_annealed_bound():
    beta, m = 1.0, 2
    wlaw = CascadeWeightLaw(Alphabet.build(m, 1), beta, BERN, mean_one=True)
    est = cascade.estimate_free_energy_tree(wlaw, 20, 4000, seed=6)
    per_step, se = est.per_step(m)
    assert per_step <= cumulant(BERN, beta) + 3 * se


def test_free_energy_lattice_beta_zero_and_bound():
    est0 = cascade.estimate_free_energy_lattice(BERN, 0.0, 60, 200, seed=7)
    assert abs(est0.value) <= 1e-12
    est = cascade.estimate_free_energy_lattice(BERN, 1.0, 100, 400, seed=8)
    assert est.per == "step"
    assert est.value <= cumulant(BERN, 1.0) + 3 * est.stderr
    with pytest.raises(ValueError):
        cascade.estimate_free_energy_lattice(BERN, 1.0, 20, 100, seed=9)


def test_upper_bound_check_zero_environment():
    zero = DisorderLaw.finite_support([0.0], [1.0])
    rep = cascade.upper_bound_check(zero, 0.7, [1, 2], 60, 100, seed=10,
                                    pool_size=1000, n_levels=10)
    assert rep.consistent
    assert abs(rep.lattice_estimate.value) <= 1e-10
    for m, est in rep.tree_estimates.items():
        assert abs(est.per_step(m)[0]) <= 1e-10


def test_upper_bound_check_beta_zero():
    rep = cascade.upper_bound_check(BERN, 0.0, [1, 2], 60, 100, seed=11,
                                    pool_size=1000, n_levels=10)
    assert rep.consistent


def test_pool_csv_rows():
    wlaw = CascadeWeightLaw(Alphabet.build(1, 1), 0.5, BERN, mean_one=True)
    pool = cascade.sample_mtree_pool(wlaw, 2, 1000, seed=1)
    rows = pool.to_csv_rows()
    assert len(rows) == 1000
    assert rows[0][0] == 2
