import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from polycasc import lattice, orders, scaling
from polycasc.env import DisorderLaw
from polycasc.errors import UnreachableEndpoint
from polycasc.scaling import (
    ScalingPoint,
    lt_domination_scaling,
    mtree_renorm_p2p,
    mtree_renorm_p2p_batch,
    renorm_p2p,
    renorm_p2p_batch,
)

BERN = DisorderLaw.bernoulli()
GAUSS = DisorderLaw.gaussian()


def test_beta_n_values():
    assert ScalingPoint(16, 1.0, 0.0).beta_n == pytest.approx(0.5)
    assert ScalingPoint(256, 1.0, 0.0).beta_n == pytest.approx(0.25)


def test_endpoint_parity_adjustment():
    # horizon 10, x*sqrt(n) = 3.16 -> floor 3, parity of 10 is even -> 4
    pt = ScalingPoint(10, 1.0, 1.0)
    assert pt.horizon == 10
    assert pt.endpoint == 4
    assert abs(pt.endpoint - math.floor(1.0 * math.sqrt(10))) <= 1
    pt2 = ScalingPoint(16, 1.0, 0.0)
    assert pt2.endpoint == 0


def test_unreachable_endpoint():
    with pytest.raises(UnreachableEndpoint):
        ScalingPoint(4, 0.5, 3.0)  # endpoint 6 at horizon 2


def test_renorm_p2p_single_beta_zero_and_mean():
    pt = ScalingPoint(16, 1.0, 0.0)
    assert renorm_p2p(GAUSS, pt, seed=1, beta=0.0) == 1.0
    vals = np.array([renorm_p2p(GAUSS, pt, seed=100 + k) for k in range(300)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) <= 4 * se


def test_renorm_batch_mean_one():
    pt = ScalingPoint(32, 1.0, 0.5)
    v = renorm_p2p_batch(BERN, pt, 2 * 10**4, seed=5)
    se = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - 1.0) <= 4 * se


def test_single_block_tree_equals_lattice_in_law():
    # m = horizon: the one-block tree is the lattice model
    pt = ScalingPoint(8, 1.0, 0.0)
    lat = renorm_p2p_batch(GAUSS, pt, 10**4, seed=6)
    tree = np.array([
        mtree_renorm_p2p(GAUSS, pt, pt.horizon, seed=2000 + k) for k in range(2000)
    ])
    assert ks_2samp(lat, tree).pvalue > 0.01


def test_mtree_renorm_requires_divisibility():
    pt = ScalingPoint(10, 1.0, 0.0)
    with pytest.raises(ValueError):
        mtree_renorm_p2p(GAUSS, pt, 3, seed=1)


def test_mtree_renorm_batch_mean_one():
    pt = ScalingPoint(24, 1.0, 0.0)
    v = mtree_renorm_p2p_batch(BERN, pt, 2, 2 * 10**4, seed=7)
    se = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - 1.0) <= 4 * se


def test_lt_domination_small_horizons():
    rep = lt_domination_scaling(BERN, [16, 32], 1.0, 0.0, 2, 2 * 10**4, seed=8)
    assert rep.consistent
    for v in rep.verdicts:
        assert v.outcome != orders.VIOLATED
    assert all(abs(z) <= 4 for z in rep.lattice_mean_z)
    assert all(abs(z) <= 4 for z in rep.tree_mean_z)
    assert len(rep.ks_successive) == 1


def test_lt_domination_equal_models_when_m_is_horizon():
    # one-block tree: same law, so the verdict cannot be a violation
    rep = lt_domination_scaling(GAUSS, [8], 1.0, 0.0, 8, 10**4, seed=9)
    assert rep.verdicts[0].outcome in (orders.CONSISTENT, orders.INCONCLUSIVE)
