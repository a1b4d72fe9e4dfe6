"""Dyadic multiplier weights: frozen oracles and certified lower bounds."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quintwave.exceptions import ParameterError
from quintwave.multipliers import (
    BoundReport,
    MultiplierProfile,
    a_weight,
    b_weight,
    certify_lower_bounds,
    dyadic_r_grid,
    goodsign_weight,
)


def direct_b_sum(r, gamma, j_max):
    """Independent plain-float oracle for b(r)."""
    total = 0.0
    for j in range(j_max):
        total += 2.0 ** (-j * gamma) * r / (r + 2.0**j)
    return total


def test_b_at_zero_is_zero():
    b, b1, _ = b_weight(MultiplierProfile(), np.array([0.0]))
    assert b[0] == 0.0
    assert b1[0] > 0.0


def test_b_frozen_oracle_r1():
    # direct 200-term summation, and the shipped 400-term default nearby
    prof200 = MultiplierProfile(gamma=0.1, j_max=200)
    b, _, _ = b_weight(prof200, np.array([1.0]))
    oracle = direct_b_sum(1.0, 0.1, 200)
    assert b[0] == pytest.approx(oracle, abs=1e-12)
    assert b[0] == pytest.approx(1.160, abs=1e-3)
    b400, _, _ = b_weight(MultiplierProfile(gamma=0.1, j_max=400), np.array([1.0]))
    assert abs(b400[0] - b[0]) <= prof200.tail_bound(1.0)


def test_b_sup_geometric_oracle():
    # untruncated limit 1/(1 - 2^{-0.1}) ~ 14.933; deep truncation reaches it
    prof = MultiplierProfile(gamma=0.1, j_max=5000)
    target = 1.0 / (1.0 - 2.0**-0.1)
    assert prof.b_sup == pytest.approx(target, abs=1e-10)
    assert prof.b_sup == pytest.approx(14.9327, abs=1e-3)
    # b is bounded by its supremum on any grid
    b, _, _ = b_weight(prof, np.geomspace(1e-3, 1e6, 50))
    assert np.all(b < prof.b_sup)


def test_a_at_zero_geometric_oracle():
    prof = MultiplierProfile(gamma=0.1, j_max=400)
    a, _ = a_weight(prof, np.array([0.0]))
    target = 1.0 / (1.0 - 2.0**-1.1)
    assert a[0] == pytest.approx(target, abs=1e-12)
    assert a[0] == pytest.approx(1.87447, abs=1e-4)


def test_a_consistent_with_b_at_r1():
    prof = MultiplierProfile(gamma=0.1, j_max=200)
    a, _ = a_weight(prof, np.array([1.0]))
    assert a[0] == pytest.approx(1.160, abs=1e-3)


@settings(max_examples=60, deadline=None)
@given(
    gamma=st.floats(min_value=0.05, max_value=1.0),
    j_max=st.integers(min_value=1, max_value=60),
    rexp=st.floats(min_value=-3.0, max_value=3.0),
)
def test_a_times_r_equals_b(gamma, j_max, rexp):
    prof = MultiplierProfile(gamma=gamma, j_max=j_max)
    r = np.array([10.0**rexp])
    a, _ = a_weight(prof, r)
    b, _, _ = b_weight(prof, r)
    assert a[0] * r[0] == pytest.approx(b[0], rel=1e-12)


def test_b_monotone_increasing_a_decreasing():
    prof = MultiplierProfile()
    r = np.geomspace(1e-3, 1e4, 400)
    b, b1, _ = b_weight(prof, r)
    a, _ = a_weight(prof, r)
    assert np.all(np.diff(b) > 0.0)
    assert np.all(b1 > 0.0)
    assert np.all(np.diff(a) < 0.0)


def test_doubling_j_max_within_tail_bound():
    for gamma in (0.05, 0.1, 0.3):
        prof = MultiplierProfile(gamma=gamma, j_max=150)
        deep = MultiplierProfile(gamma=gamma, j_max=300)
        r = dyadic_r_grid(2.0**-4, 2.0**10, per_octave=4)
        b_lo, _, _ = b_weight(prof, r)
        b_hi, _, _ = b_weight(deep, r)
        assert np.all(np.abs(b_hi - b_lo) <= prof.tail_bound(r) + 1e-300)


def test_shipped_default_tail_negligible():
    # tail bound stays below 1e-8 of b(r) across all dyadic scales in range
    prof = MultiplierProfile()
    r = dyadic_r_grid(2.0**-4, 2.0**10, per_octave=8)
    b, _, _ = b_weight(prof, r)
    assert np.all(prof.tail_bound(r) <= 1e-8 * b)


def test_derivatives_match_finite_differences():
    prof = MultiplierProfile(gamma=0.1, j_max=120)
    # second differences need a step large enough to clear cancellation
    for r0, h1, h2 in [(0.5, 1e-5, 1e-2), (3.0, 1e-5, 1e-2), (17.0, 1e-4, 5e-2), (200.0, 1e-3, 1.0)]:
        _, b1, b2 = b_weight(prof, np.array([r0]))
        bp1, bm1 = (b_weight(prof, np.array([r0 + s]))[0][0] for s in (h1, -h1))
        assert (bp1 - bm1) / (2 * h1) == pytest.approx(b1[0], rel=1e-6)
        bp, b0, bm = (b_weight(prof, np.array([r0 + s]))[0][0] for s in (h2, 0.0, -h2))
        assert (bp - 2 * b0 + bm) / h2**2 == pytest.approx(b2[0], rel=1e-3)
        ap, a0v, am = (a_weight(prof, np.array([r0 + s]))[0][0] for s in (h2, 0.0, -h2))
        _, lap = a_weight(prof, np.array([r0]))
        fd_lap = (ap - 2 * a0v + am) / h2**2 + (ap - am) / h2 / r0
        assert fd_lap == pytest.approx(lap[0], rel=1e-3)


def test_goodsign_termwise_identity_random_radii():
    # (2/3) a - (1/6) b' from separate weights vs the positive closed form
    prof = MultiplierProfile(gamma=0.1, j_max=100)
    rng = np.random.default_rng(0)
    r = 10.0 ** rng.uniform(-3.0, 3.01, 10_000)
    a, _ = a_weight(prof, r)
    _, b1, _ = b_weight(prof, r)
    direct = (2.0 / 3.0) * a - b1 / 6.0
    closed = goodsign_weight(prof, r)
    assert np.all(np.abs(direct - closed) <= 1e-12 * np.abs(closed))


def test_goodsign_frozen_value_r1():
    prof = MultiplierProfile(gamma=0.1, j_max=200)
    val = goodsign_weight(prof, np.array([1.0]))[0]
    oracle = sum(
        2.0 ** (-0.1 * j) * (0.5 / (1.0 + 2.0**j) + (1.0 / 6.0) / (1.0 + 2.0**j) ** 2)
        for j in range(200)
    )
    assert val == pytest.approx(oracle, abs=1e-12)
    assert val > 0.25  # exceeds half of its own first term


def test_laplacian_a_negative_and_diverges_at_origin():
    prof = MultiplierProfile()
    _, lap = a_weight(prof, np.array([0.0, 1e-12, 1.0, 100.0]))
    assert lap[0] == -np.inf
    assert np.all(lap[1:] < 0.0)


def test_certify_lower_bounds_default_gammas():
    for gamma in (0.05, 0.1, 0.3):
        prof = MultiplierProfile(gamma=gamma, j_max=400)
        rep = certify_lower_bounds(prof, dyadic_r_grid(2.0**-4, 2.0**10))
        assert isinstance(rep, BoundReport)
        assert rep.certified
        assert all(v > 0.0 for v in rep.infima.values())
        assert set(rep.infima) == {
            "b_prime",
            "b_over_r_minus_half_b_prime",
            "minus_laplacian_a",
            "goodsign_times_r",
        }


def test_certify_single_term_profile():
    # J=1: b = r/(r+1), b' = 1/(r+1)^2 in closed form
    prof = MultiplierProfile(gamma=0.1, j_max=1)
    r = np.geomspace(0.01, 100.0, 200)
    b, b1, _ = b_weight(prof, r)
    assert np.allclose(b, r / (r + 1.0), rtol=1e-14)
    assert np.allclose(b1, 1.0 / (r + 1.0) ** 2, rtol=1e-14)
    assert certify_lower_bounds(prof, r).certified


def test_certify_reports_minimizers():
    rep = certify_lower_bounds(MultiplierProfile(), dyadic_r_grid())
    for name, rmin in rep.minimizers.items():
        assert 2.0**-4 <= rmin <= 2.0**10, name
    js = rep.to_json()
    assert js["certified"] is True


def test_profile_validation():
    with pytest.raises(ParameterError):
        MultiplierProfile(gamma=0.0)
    with pytest.raises(ParameterError):
        MultiplierProfile(j_max=0)
    with pytest.raises(ParameterError):
        MultiplierProfile(c_const=-1.0)
    with pytest.raises(ParameterError):
        certify_lower_bounds(MultiplierProfile(), np.array([]))
    with pytest.raises(ParameterError):
        certify_lower_bounds(MultiplierProfile(), np.array([0.0, 1.0]))
    with pytest.raises(ParameterError):
        b_weight(MultiplierProfile(), np.array([-1.0]))


def test_c_value_default():
    prof = MultiplierProfile(gamma=0.1, j_max=400)
    assert prof.c_value == pytest.approx(4.0 * (1.0 + prof.b_sup), rel=1e-15)
    assert MultiplierProfile(c_const=7.0).c_value == 7.0
