import itertools
import math

import numpy as np
import pytest

from polycasc import orders, spinglass
from polycasc.errors import BadSpin, SizeMismatch, TooManySpins
from polycasc.rng import stream
from polycasc.spinglass import (
    SpinModelSpec,
    exact_normalized_partition,
    peacock_check_spin,
    sample_disorder,
    spin_hamiltonian,
    w_grid,
    w_grid_batch,
)


def reference_w(spec, disorder, beta):
    """Independent reimplementation: same sums, reversed configuration order."""
    n = spec.n_spins
    num = 0.0
    configs = list(itertools.product((-1, 1), repeat=n))
    for sigma in reversed(configs):
        num += math.exp(beta * spin_hamiltonian(spec, disorder, np.array(sigma)))
    num /= len(configs)
    if spec.kind == "sk":
        den = math.exp(beta**2 * len(spec.pairs()) / (2 * n))
    elif spec.kind == "ea":
        den = math.exp(beta**2 * len(spec.bonds()) / 2)
    else:
        bond_avg = 0.0
        for sigma in reversed(configs):
            s = np.array(sigma)
            bond_avg += math.exp(
                beta * spec.j_coupling * sum(s[a] * s[b] for a, b in spec.bonds())
            )
        bond_avg /= len(configs)
        den = math.exp(n * beta**2 / 2) * bond_avg
    return num / den


def test_hamiltonian_zero_disorder():
    spec = SpinModelSpec.sk(4)
    dis = spinglass.SpinDisorder(np.zeros(len(spec.pairs())), None, 0)
    assert spin_hamiltonian(spec, dis, np.ones(4)) == 0.0


def test_hamiltonian_two_spin_pair():
    spec = SpinModelSpec.sk(2)
    j = 1.7
    dis = spinglass.SpinDisorder(np.array([j]), None, 0)
    for s1, s2 in itertools.product((-1, 1), repeat=2):
        h = spin_hamiltonian(spec, dis, np.array([s1, s2]))
        assert h == pytest.approx(j * s1 * s2 / math.sqrt(2), rel=1e-12)


def test_hamiltonian_rfim_decoupled():
    spec = SpinModelSpec.rfim(side=2, j=0.0)
    dis = sample_disorder(spec, seed=4)
    sigma = np.array([1, -1, 1, 1])
    want = float(np.dot(dis.fields, sigma))
    assert spin_hamiltonian(spec, dis, sigma) == pytest.approx(want, rel=1e-12)


def test_hamiltonian_validation():
    spec = SpinModelSpec.sk(3)
    dis = sample_disorder(spec, seed=1)
    with pytest.raises(SizeMismatch):
        spin_hamiltonian(spec, dis, np.ones(4))
    with pytest.raises(BadSpin):
        spin_hamiltonian(spec, dis, np.array([1, 0, 1]))


def test_ea_torus_bonds():
    spec = SpinModelSpec.ea(side=3)
    assert spec.n_spins == 9
    assert len(spec.bonds()) == 18  # 2 bonds per site on the 2d torus
    counts = {}
    for a, b in spec.bonds():
        counts[a] = counts.get(a, 0) + 1
        counts[b] = counts.get(b, 0) + 1
    assert all(c == 4 for c in counts.values())


def test_spin_cap():
    with pytest.raises(TooManySpins):
        SpinModelSpec.sk(25)


def test_w_beta_zero_is_one():
    for spec in (SpinModelSpec.sk(5), SpinModelSpec.ea(2), SpinModelSpec.rfim(2, 0.5)):
        dis = sample_disorder(spec, seed=3)
        assert exact_normalized_partition(spec, dis, 0.0) == pytest.approx(1.0, rel=1e-12)


def test_sk_two_spin_closed_form():
    # N=2: W = cosh(beta J / sqrt 2) * exp(-beta^2 / 4)
    spec = SpinModelSpec.sk(2)
    dis = sample_disorder(spec, seed=8)
    j = float(dis.couplings[0])
    for beta in (0.3, 1.0, 1.7):
        want = math.cosh(beta * j / math.sqrt(2)) * math.exp(-(beta**2) / 4)
        assert exact_normalized_partition(spec, dis, beta) == pytest.approx(want, rel=1e-12)


def test_exact_matches_reference_reimplementation():
    for spec in (SpinModelSpec.sk(4), SpinModelSpec.ea(2), SpinModelSpec.rfim(2, 0.5)):
        dis = sample_disorder(spec, seed=11)
        for beta in (0.5, 1.5):
            got = exact_normalized_partition(spec, dis, beta)
            want = reference_w(spec, dis, beta)
            assert got == pytest.approx(want, rel=1e-12)


def test_spin_flip_symmetry():
    for spec in (SpinModelSpec.sk(4), SpinModelSpec.ea(2)):
        dis = sample_disorder(spec, seed=13)
        for _ in range(5):
            sigma = 2 * stream(14, "flip").integers(0, 2, spec.n_spins) - 1
            h1 = spin_hamiltonian(spec, dis, sigma)
            h2 = spin_hamiltonian(spec, dis, -sigma)
            assert h1 == pytest.approx(h2, rel=1e-12)


def test_w_batch_mean_one_and_positive():
    spec = SpinModelSpec.sk(6)
    w = w_grid_batch(spec, [0.5, 1.0], 10**4, seed=15)
    assert np.all(w > 0)
    for g in range(2):
        se = w[:, g].std(ddof=1) / math.sqrt(w.shape[0])
        assert abs(w[:, g].mean() - 1.0) <= 4 * se


def test_w_batch_matches_exact_rows():
    # the batched sampler agrees with the contract op law: compare moments
    spec = SpinModelSpec.ea(2)
    w = w_grid_batch(spec, [0.8], 4000, seed=16)[:, 0]
    singles = np.array([
        exact_normalized_partition(spec, sample_disorder(spec, seed=1000 + k), 0.8)
        for k in range(800)
    ])
    se = math.sqrt(w.var(ddof=1) / w.size + singles.var(ddof=1) / singles.size)
    assert abs(w.mean() - singles.mean()) <= 4 * se


def test_peacock_check_small_grid():
    spec = SpinModelSpec.sk(6)
    rep = peacock_check_spin(spec, [0.0, 0.5, 1.0], 4000, seed=17)
    assert rep.consistent
    assert all(v.outcome != orders.VIOLATED for v in rep.verdicts)
    assert all(abs(z) <= 4 for z in rep.mean_z)
    # dispersion grows along the grid
    assert rep.variance == sorted(rep.variance)


def test_peacock_grid_validation():
    spec = SpinModelSpec.sk(4)
    with pytest.raises(ValueError):
        peacock_check_spin(spec, [0.5, 0.5], 1000, seed=1)
    with pytest.raises(ValueError):
        peacock_check_spin(spec, [-0.5, 0.5], 1000, seed=1)
