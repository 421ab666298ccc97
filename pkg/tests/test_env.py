import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polycasc.env import DisorderLaw, DisorderField, cumulant, sample_field
from polycasc.errors import BetaOutOfRange, PathOutsideField
from polycasc.rng import RngPolicy, stream


def test_cumulant_gaussian_closed_form():
    law = DisorderLaw.gaussian()
    assert cumulant(law, 1.0) == 0.5
    assert cumulant(law, -2.0) == 2.0


def test_cumulant_zero_beta_is_zero():
    for law in (DisorderLaw.gaussian(), DisorderLaw.bernoulli(),
                DisorderLaw.finite_support([-1.0, 2.0], [2 / 3, 1 / 3])):
        assert cumulant(law, 0.0) == 0.0


def test_cumulant_finite_support_direct_sum():
    # independent oracle: direct evaluation of log((e^1 + e^-1)/2)
    law = DisorderLaw.finite_support([-1.0, 1.0], [0.5, 0.5])
    expected = math.log((math.e + 1.0 / math.e) / 2.0)
    assert cumulant(law, 1.0) == pytest.approx(expected, abs=1e-14)
    assert cumulant(DisorderLaw.bernoulli(), 1.0) == pytest.approx(expected, abs=1e-14)


def test_cumulant_convexity_on_grid():
    grid = np.linspace(-2, 2, 41)
    for law in (DisorderLaw.gaussian(), DisorderLaw.bernoulli(),
                DisorderLaw.finite_support([-2.0, 0.0, 3.0], [0.3, 0.5, 0.2])):
        vals = np.array([cumulant(law, b) for b in grid])
        second = np.diff(vals, 2)
        assert second.min() >= -1e-9


def test_beta_out_of_range():
    law = DisorderLaw.finite_support([-1.0, 1.0], [0.5, 0.5], beta_max=2.0)
    assert cumulant(law, 2.0) == pytest.approx(math.log(math.cosh(2.0)))
    with pytest.raises(BetaOutOfRange):
        cumulant(law, 2.5)


def test_law_validation():
    with pytest.raises(ValueError):
        DisorderLaw.finite_support([1.0, 2.0], [0.6, 0.5])
    with pytest.raises(ValueError):
        DisorderLaw.finite_support([1.0], [-1.0])
    with pytest.raises(ValueError):
        DisorderLaw("no-such-kind")


def test_law_json_round_trip():
    for law in (DisorderLaw.gaussian(), DisorderLaw.bernoulli(),
                DisorderLaw.finite_support([-1.0, 0.5], [0.25, 0.75], beta_max=3.0)):
        assert DisorderLaw.from_json(law.to_json()) == law


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5, unique=True),
       st.integers(1, 10**6))
@settings(max_examples=25, deadline=None)
def test_cumulant_zero_and_convex_random_laws(values, raw):
    probs = np.arange(1, len(values) + 1, dtype=float)
    probs /= probs.sum()
    law = DisorderLaw.finite_support(values, probs)
    assert cumulant(law, 0.0) == 0.0
    b = (raw % 100) / 25.0 - 2.0
    lam = cumulant(law, b)
    mid = cumulant(law, b / 2)
    # midpoint convexity against the endpoints lambda(0) = 0
    assert mid <= 0.5 * lam + 5e-13 + 0.5 * abs(lam) * 1e-12


def test_field_determinism_and_support():
    law = DisorderLaw.bernoulli()
    f1 = sample_field(law, 5, seed=123)
    f2 = sample_field(law, 5, seed=123)
    f3 = sample_field(law, 5, seed=124)
    sites = f1.cone_sites()
    v1 = [f1.value(i, x) for i, x in sites]
    v2 = [f2.value(i, x) for i, x in sites]
    v3 = [f3.value(i, x) for i, x in sites]
    assert v1 == v2
    assert v1 != v3
    assert set(v1) <= {-1.0, 1.0}


def test_cone_counting_n2_d1():
    f = sample_field(DisorderLaw.gaussian(), 2, seed=0)
    assert len(f.cone_sites()) == 5  # times 1: {-1,+1}; time 2: {-2,0,+2}


def test_field_rejects_off_cone():
    f = sample_field(DisorderLaw.gaussian(), 3, seed=0)
    with pytest.raises(PathOutsideField):
        f.value(1, 0)  # wrong parity
    with pytest.raises(PathOutsideField):
        f.value(2, 4)  # too far
    with pytest.raises(PathOutsideField):
        f.value(4, 0)  # beyond horizon
    assert isinstance(f.value(3, -1), float)


def test_field_origin_shift():
    f = sample_field(DisorderLaw.gaussian(), 2, origin=5, seed=9)
    assert f.reachable(1, 6) and f.reachable(1, 4)
    assert not f.reachable(1, 5)


def test_empirical_moments_match_cumulant():
    rng = stream(777, "moments")
    for law in (DisorderLaw.gaussian(), DisorderLaw.bernoulli()):
        draws = law.sample(rng, 10**6)
        se_mean = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean()) <= 4 * se_mean + 1e-12
        for beta in (0.5, 1.0):
            e = np.exp(beta * draws)
            se = e.std() / math.sqrt(e.size)
            assert abs(e.mean() - math.exp(cumulant(law, beta))) <= 4 * se


def test_stream_paths_are_independent_and_pure():
    a1 = stream(1, "x", 0).standard_normal(4)
    a2 = stream(1, "x", 0).standard_normal(4)
    b = stream(1, "x", 1).standard_normal(4)
    c = stream(1, "y", 0).standard_normal(4)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert not np.array_equal(a1, c)


def test_stream_type_tags_distinguish_int_and_str():
    a = stream(3, 5).standard_normal(3)
    b = stream(3, "5").standard_normal(3)
    assert not np.array_equal(a, b)


def test_policy_subseed_stable():
    pol = RngPolicy(42)
    assert pol.subseed("exp", 1) == pol.subseed("exp", 1)
    assert pol.subseed("exp", 1) != pol.subseed("exp", 2)
