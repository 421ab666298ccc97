import math

import numpy as np
import pytest

from polycasc import gaussian, lattice, orders
from polycasc.errors import LengthMismatch
from polycasc.lattice import PolymerPath


def p(*xs):
    return PolymerPath(tuple((x,) for x in xs))


def test_lattice_covariance_examples():
    a = p(1, 2, 1, 2)
    cov = gaussian.lattice_covariance([a, a])
    assert cov[0, 1] == 4
    b = p(-1, -2, -1, -2)
    assert gaussian.lattice_covariance([a, b])[0, 1] == 0
    c = p(1, 2, 3, 2)
    assert gaussian.lattice_covariance([a, c])[0, 1] == 3
    assert np.all(np.diag(gaussian.lattice_covariance([a, b, c])) == 4)


def test_tree_covariance_examples():
    a = p(1, 0, 1, 0)
    b = p(1, 2, 1, 0)
    assert gaussian.lattice_covariance([a, b])[0, 1] == 3
    assert gaussian.tree_covariance([a, b], 2)[0, 1] == 1
    assert gaussian.tree_covariance([a, a], 2)[0, 1] == 4


def test_tree_covariance_m_at_least_n_equals_lattice():
    paths = lattice.enumerate_paths(4, 1)
    lat = gaussian.lattice_covariance(paths)
    for m in (5, 7):
        assert np.array_equal(gaussian.tree_covariance(paths, m), lat)


def test_tree_covariance_m1_prefix_identity():
    # m=1: overlap counts only until the first divergence of the two paths
    paths = lattice.enumerate_paths(6, 1)
    arr = gaussian._path_array(paths)
    tree = gaussian.tree_covariance(paths, 1)
    n = arr.shape[1]
    for a in range(0, arr.shape[0], 17):
        for b in range(0, arr.shape[0], 11):
            run = 0
            for i in range(n):
                if arr[a, i] == arr[b, i]:
                    run += 1
                else:
                    break
            assert tree[a, b] == run


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        gaussian.lattice_covariance([p(1, 2), p(1, 2, 3)])
    with pytest.raises(LengthMismatch):
        gaussian.lattice_covariance([])


def test_slepian_precondition_small_cases():
    for n, m in ((2, 2), (4, 2), (6, 3), (8, 2)):
        rep = gaussian.slepian_precondition(n, m)
        assert rep.holds, (n, m)
        assert rep.n_paths == 2**n
    # n = m: the two models coincide, diagonals trivially equal
    rep = gaussian.slepian_precondition(4, 4)
    assert rep.holds


def test_covariances_positive_semidefinite():
    for n, m in ((6, 2), (8, 2)):
        pair = gaussian.covariance_pair(n, m)
        for mat in (pair.lattice_cov, pair.tree_cov):
            eig = np.linalg.eigvalsh(mat.astype(float))
            assert eig.min() >= -1e-9


def test_d2_covariance_distinct_coordinates():
    a = PolymerPath(((1, 0), (1, 1)))
    b = PolymerPath(((0, 1), (1, 1)))
    cov = gaussian.lattice_covariance([a, b])
    assert cov[0, 1] == 1
    assert np.all(np.diag(cov) == 2)


def test_sampled_energies_match_exact_covariances():
    # structural sampler realizes the exact covariance matrices
    n, m, reps = 4, 2, 2 * 10**5
    idx_lat, s_lat = gaussian._lattice_site_indices(n)
    idx_tree, s_tree = gaussian._tree_site_indices(n, m)
    from polycasc.rng import stream

    rng = stream(3, "cov-check")
    paths = lattice.enumerate_paths(n, 1)
    lat_cov = gaussian.lattice_covariance(paths).astype(float)
    tree_cov = gaussian.tree_covariance(paths, m).astype(float)
    for idx, s_count, want in ((idx_lat, s_lat, lat_cov), (idx_tree, s_tree, tree_cov)):
        draws = rng.standard_normal((reps, s_count))
        h = gaussian._gather_energy(draws, idx)
        emp = (h.T @ h) / reps
        # entries are sums of n products of unit Gaussians: se ~ sqrt(2n/reps)
        tol = 5 * math.sqrt(2 * n / reps) + 5e-3
        assert np.max(np.abs(emp - want)) <= tol


def test_max_compare_n_equals_m_same_law():
    v = gaussian.max_compare(4, 4, replicas=2 * 10**4, seed=5)
    assert v.outcome != orders.VIOLATED


def test_max_compare_direction_small():
    v = gaussian.max_compare(6, 2, replicas=3 * 10**4, seed=6)
    assert v.outcome == orders.CONSISTENT


def test_elogz_beta_zero_exact_equality():
    rep = gaussian.elogz_compare(4, 2, replicas=2000, beta=0.0, seed=7)
    assert rep.mean_lattice == pytest.approx(0.0, abs=1e-12)
    assert rep.mean_tree == pytest.approx(0.0, abs=1e-12)
    assert rep.consistent


def test_elogz_n_equals_m_small_z():
    rep = gaussian.elogz_compare(5, 5, replicas=2 * 10**4, beta=1.0, seed=8)
    assert abs(rep.z) <= 4.0


def test_st_failure_no_crossing_at_equal_models():
    rep = gaussian.st_failure_experiment(4, 4, beta=1.0, replicas=2 * 10**4, seed=9)
    assert not rep.crossing_found
    assert rep.means_equal
