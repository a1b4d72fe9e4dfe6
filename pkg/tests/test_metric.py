"""Metric families: evaluation, signature, null contraction, decay certifier."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quintwave.exceptions import DomainError, ParameterError
from quintwave.metric import (
    MINKOWSKI,
    CallableRadialMetric,
    NullFrame,
    SampleSpec,
    certify_decay,
    decay_weighted_sups,
    eval_metric,
    lorentzian_signature_ok,
    make_metric,
    null_contraction,
)


def test_minkowski_eval_exact():
    m = make_metric("minkowski")
    g, dg, d2g = eval_metric(m, 1.7, np.array([0.3, -2.0, 5.0]))
    assert np.array_equal(g, MINKOWSKI)
    assert np.all(dg == 0.0) and np.all(d2g == 0.0)


def test_static_decay_origin_value():
    # at r = 0 the bracket weight is 1, so g^{00} = -1 - eps exactly
    m = make_metric("static-decay", eps=0.05, gamma=0.1)
    g, _, _ = eval_metric(m, 0.0, np.zeros(3), order=0)
    assert g[0, 0] == pytest.approx(-1.05, abs=1e-15)
    assert np.array_equal(g[1:, 1:], np.eye(3))


def test_static_decay_frozen_value_at_r3():
    # <3> = sqrt(10), <3>^{-1.1} = 10^{-0.55}; frozen arithmetic oracle
    m = make_metric("static-decay", eps=0.05, gamma=0.1)
    g, _, _ = eval_metric(m, 12.3, np.array([0.0, 3.0, 0.0]), order=0)
    expected = -1.0 - 0.05 * 10.0 ** (-0.55)
    assert g[0, 0] == pytest.approx(expected, abs=1e-12)
    assert g[0, 0] == pytest.approx(-1.0140919147, abs=1e-9)


def test_eps_zero_reduces_to_minkowski():
    for family in ("static-decay", "cone-adapted"):
        m = make_metric(family, eps=0.0)
        g, dg, d2g = eval_metric(m, 3.0, np.array([1.0, 2.0, 2.0]))
        assert np.array_equal(g, MINKOWSKI)
        assert np.all(dg == 0.0) and np.all(d2g == 0.0)


@pytest.mark.parametrize(
    "family,params",
    [
        ("minkowski", {}),
        ("static-decay", {"eps": 0.05, "gamma": 0.1}),
        ("cone-adapted", {"eps": 0.05, "gamma": 0.1}),
        ("violating", {"floor": 0.2, "depth": 24.0, "width": 4.0, "t_ramp": 20.0}),
    ],
)
def test_symmetry_and_signature_random_samples(family, params):
    m = make_metric(family, **params)
    rng = np.random.default_rng(12345)
    total = 1_000_000
    chunk = 250_000
    for _ in range(total // chunk):
        t = rng.uniform(0.0, 50.0, chunk)
        x = rng.uniform(-50.0, 50.0, (chunk, 3))
        g, _, _ = m.eval(t, x, order=0)
        assert np.array_equal(g, np.swapaxes(g, 1, 2))
        assert np.all(g[:, 0, 0] < 0.0)
        assert np.all(lorentzian_signature_ok(g))


def test_null_contraction_h00_only_families():
    # with only h^{00} nonzero the contraction is h^{00} itself
    m = make_metric("static-decay", eps=0.05, gamma=0.1)
    x = np.array([1.0, 2.0, -2.0])  # |x| = 3
    val = null_contraction(m, 4.0, x)
    assert val == pytest.approx(-0.05 * 10.0 ** (-0.55), abs=1e-12)


def test_null_contraction_m_proportional_vanishes():
    # h = c*m has radial components (h00, h0r, hrr, hww) = (-c, 0, c, c)
    from quintwave.metric import MetricField, ScalarProfile

    class MScaled(MetricField):
        family_id = "m-scaled"

        def radial_profiles(self, t, r):
            r = np.asarray(r, dtype=float)
            z = np.zeros_like(r)
            c = 0.37
            return {
                "h00": ScalarProfile(z - c, z, z, z, z, z),
                "hrr": ScalarProfile(z + c, z, z, z, z, z),
                "hww": ScalarProfile(z + c, z, z, z, z, z),
            }

    vals = null_contraction(MScaled(), 0.0, np.array([[3.0, 0.0, 4.0], [0.1, 0.0, 0.0]]))
    assert np.all(np.abs(vals) < 1e-15)


def test_null_contraction_rejects_origin():
    m = make_metric("minkowski")
    with pytest.raises(DomainError):
        null_contraction(m, 0.0, np.zeros(3))


def test_null_frame_is_minkowski_null():
    fr = NullFrame(2.0, np.array([1.0, -2.0, 2.0]))
    for vec in (fr.ell_bar, fr.ell):
        assert np.einsum("ab,a,b->", MINKOWSKI, vec, vec) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        NullFrame(0.0, np.zeros(3))


@pytest.mark.parametrize(
    "family,params,t0,x0",
    [
        ("static-decay", {"eps": 0.05, "gamma": 0.1}, 0.0, (0.5, -0.2, 0.4)),
        ("static-decay", {"eps": 0.3, "gamma": 0.3}, 2.0, (3.0, 1.0, -2.0)),
        ("cone-adapted", {"eps": 0.05, "gamma": 0.1}, 1.3, (2.4, -1.0, 0.7)),
        ("cone-adapted", {"eps": 0.05, "gamma": 0.1}, 6.0, (0.0, 4.0, 3.0)),
    ],
)
def test_closed_form_derivatives_match_finite_differences(family, params, t0, x0):
    """Central differences of eval converge to the closed-form blocks at order >= 1.9."""
    m = make_metric(family, **params)
    x0 = np.array(x0)
    _, dg, d2g = m.eval(t0, x0)

    def fd_errors(delta):
        first = np.zeros_like(dg)
        second = np.zeros_like(d2g)
        def gat(t, x):
            return m.eval(t, x, order=0)[0]
        dirs = [None] + [np.eye(3)[k] for k in range(3)]
        for mu in range(4):
            if mu == 0:
                gp = gat(t0 + delta, x0)
                gm = gat(t0 - delta, x0)
            else:
                gp = gat(t0, x0 + delta * dirs[mu])
                gm = gat(t0, x0 - delta * dirs[mu])
            first[mu] = (gp - gm) / (2.0 * delta)
        g0 = gat(t0, x0)
        for mu in range(4):
            for nu in range(4):
                shift = np.zeros(4)
                shift[mu] += 1.0
                shift[nu] += 1.0
                def at(c):
                    return gat(t0 + c[0] * delta, x0 + c[1:] * delta)
                emu = np.zeros(4); emu[mu] = 1.0
                enu = np.zeros(4); enu[nu] = 1.0
                if mu == nu:
                    val = (at(2 * emu) - 2.0 * g0 + at(-2 * emu)) / (4.0 * delta**2)
                else:
                    val = (
                        at(emu + enu) - at(emu - enu) - at(enu - emu) + at(-emu - enu)
                    ) / (4.0 * delta**2)
                second[mu, nu] = val
        return np.max(np.abs(first - dg)), np.max(np.abs(second - d2g))

    e1a, e2a = fd_errors(0.05)
    e1b, e2b = fd_errors(0.025)
    if e1a > 1e-12:
        assert np.log2(e1a / e1b) >= 1.9
    if e2a > 1e-10:
        assert np.log2(e2a / e2b) >= 1.9


def test_eval_batch_matches_single():
    m = make_metric("cone-adapted", eps=0.05, gamma=0.1)
    pts = np.array([[0.1, 0.2, 0.3], [3.0, 0.0, 0.0], [0.0, 0.0, 7.0]])
    ts = np.array([0.5, 2.0, 9.0])
    gb, dgb, d2gb = m.eval(ts, pts)
    for i in range(3):
        g, dg, d2g = m.eval(ts[i], pts[i])
        assert np.allclose(gb[i], g, atol=0, rtol=0)
        assert np.allclose(dgb[i], dg, atol=0, rtol=0)
        assert np.allclose(d2gb[i], d2g, atol=0, rtol=0)


def test_eval_regular_at_origin():
    # derivative blocks at x = 0 use the even-profile limits, no NaN
    for family, params in [
        ("static-decay", {"eps": 0.05, "gamma": 0.1}),
        ("violating", {"floor": 0.2, "depth": 30.0, "width": 4.0}),
    ]:
        m = make_metric(family, **params)
        g, dg, d2g = m.eval(1.0, np.zeros(3))
        assert np.all(np.isfinite(g)) and np.all(np.isfinite(dg))
        assert np.all(np.isfinite(d2g))
        assert np.all(dg == 0.0)  # static family, f_r(0) = 0
        # d_k d_l g^{00} = f_rr(0) delta_kl at the origin
        spatial = d2g[1:, 1:, 0, 0]
        assert np.allclose(spatial, spatial[0, 0] * np.eye(3), atol=1e-12)


def test_char_speeds_flat_and_slow_well():
    m = make_metric("minkowski")
    r = np.linspace(0.0, 10.0, 11)
    assert np.allclose(m.char_speeds(0.0, r), 1.0, atol=1e-15)
    well = make_metric("violating", floor=0.0, depth=24.0, width=4.0)
    c0 = well.char_speeds(0.0, np.array([0.0]))[0]
    assert c0 == pytest.approx(0.2, abs=1e-12)  # 1/sqrt(1+24)


def test_make_metric_validation():
    with pytest.raises(ParameterError):
        make_metric("no-such-family")
    with pytest.raises(ParameterError):
        make_metric("static-decay", eps=0.9)
    with pytest.raises(ParameterError):
        make_metric("static-decay", gamma=-0.1)
    with pytest.raises(ParameterError):
        make_metric("cone-adapted", r_on=2.0, r_off=1.0)
    with pytest.raises(ParameterError):
        make_metric("violating", width=0.0)
    with pytest.raises(ParameterError):
        make_metric("static-decay", bogus=1.0)


def test_callable_metric_matches_closed_form():
    closed = make_metric("cone-adapted", eps=0.05, gamma=0.1)

    def h00(t, r):
        return closed.radial_profiles(np.asarray(t, float), np.asarray(r, float))["h00"].val

    wrapped = CallableRadialMetric({"h00": h00}, static=False, fd_step=1e-2)
    # keep clear of the cutoff junctions at r = 1, 2 where chi is only C^2
    r = np.array([0.4, 1.45, 2.6, 7.0])
    for t in (0.0, 2.7):
        ref = closed.radial_profiles(t, r)["h00"]
        got = wrapped.radial_profiles(t, r)["h00"]
        assert np.allclose(got.val, ref.val, atol=0, rtol=0)
        for name in ("dt", "dr", "dtt", "dtr", "drr"):
            assert np.allclose(
                getattr(got, name), getattr(ref, name), atol=2e-6, rtol=1e-5
            ), name


def test_callable_metric_odd_parity_reflection():
    # h0r must reflect oddly through r = 0 for the FD stencil to stay accurate
    wrapped = CallableRadialMetric(
        {"h0r": lambda t, r: r * np.exp(-(r**2))}, static=True, fd_step=1e-2
    )
    r = np.array([0.0, 0.005, 0.3])
    got = wrapped.radial_profiles(0.0, r)["h0r"]
    expect = (1.0 - 2.0 * r**2) * np.exp(-(r**2))
    assert np.allclose(got.dr, expect, atol=1e-8)


# -- decay certifier ----------------------------------------------------------


def test_certify_minkowski_all_zero():
    rep = certify_decay(make_metric("minkowski"), 0.1)
    assert all(v == 0.0 for v in rep.amplitudes.values())
    assert not any(rep.unbounded.values())


def test_certify_static_decay_amplitudes():
    """Analytic continuum bounds pin the three amplitudes of the decaying family.

    With |h| = eps <r>^{-1-gamma}: the size amplitude has continuum supremum
    eps * max_r sqrt(<r>+r)/<r> ~ 1.1397 eps; the null amplitude approaches
    2 eps on near-cone samples; the derivative amplitude is (1+gamma) eps,
    attained at r = 0.
    """
    eps, gamma = 0.05, 0.1
    rep = certify_decay(make_metric("static-decay", eps=eps, gamma=gamma), gamma)
    assert 1.05 * eps <= rep.amplitudes["h_decay"] <= 1.14 * eps
    assert 1.9 * eps <= rep.amplitudes["null_decay"] <= 2.0 * eps
    assert rep.amplitudes["deriv_decay"] == pytest.approx((1.0 + gamma) * eps, abs=1e-3)
    assert not any(rep.unbounded.values())


def test_certify_cone_adapted_saturates_size_and_fails_null():
    eps = 0.05
    rep = certify_decay(make_metric("cone-adapted", eps=eps, gamma=0.1), 0.1)
    # the weighted size equals eps wherever the cutoff is 1: exact saturation
    assert rep.amplitudes["h_decay"] == pytest.approx(eps, abs=1e-12)
    assert not rep.unbounded["h_decay"]
    # the incoming-null contraction only obeys the weaker size-rate: flagged
    assert rep.unbounded["null_decay"]


def test_certify_violating_constant_floor():
    # pure floor: no derivatives at all, but the size amplitude grows with the box
    rep = certify_decay(make_metric("violating", floor=0.3, depth=0.0), 0.1)
    assert rep.amplitudes["deriv_decay"] == 0.0
    assert rep.unbounded["h_decay"]
    amps = rep.box_amplitudes["h_decay"]
    assert amps[1] > 1.2 * amps[0] and amps[2] > 1.2 * amps[1]


def test_certify_violating_ramped_well_flags_size():
    rep = certify_decay(
        make_metric("violating", floor=0.2, depth=24.0, width=4.0, t_ramp=20.0), 0.1
    )
    assert rep.unbounded["h_decay"]
    amps = rep.box_amplitudes["h_decay"]
    assert amps[2] > amps[1] > amps[0] > 0.0


def test_certify_report_serializes():
    rep = certify_decay(make_metric("static-decay"), 0.1, SampleSpec(n_t=11, n_r=16))
    d = rep.to_json()
    assert set(d["amplitudes"]) == {"h_decay", "null_decay", "deriv_decay"}
    assert isinstance(d["worst_points"]["h_decay"], list)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=40),
    keep=st.integers(min_value=1, max_value=39),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_certified_amplitude_monotone_in_samples(n, keep, seed):
    """Dropping samples never increases a certified amplitude."""
    keep = min(keep, n - 1)
    rng = np.random.default_rng(seed)
    ts = rng.uniform(0.0, 30.0, n)
    rs = rng.uniform(0.0, 30.0, n)
    m = make_metric("cone-adapted", eps=0.05, gamma=0.1)
    full, _ = decay_weighted_sups(m, 0.1, ts, rs)
    part, _ = decay_weighted_sups(m, 0.1, ts[:keep], rs[:keep])
    for k in full:
        assert part[k] <= full[k] + 1e-15


def test_certify_rejects_bad_inputs():
    m = make_metric("minkowski")
    with pytest.raises(ParameterError):
        certify_decay(m, 0.0)
    with pytest.raises(ParameterError):
        decay_weighted_sups(m, 0.1, np.array([]), np.array([]))
    with pytest.raises(ParameterError):
        SampleSpec(n_t=1)
