import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuspwalk.geometry import (
    CuspProfile,
    ball_half_width,
    ball_volume,
    ball_geometry,
    blend_coefficients,
    distance_cusp,
    distance_numeric,
    overlap_threshold,
)


def test_blend_coefficients_default():
    # solving the C^2 matching system at t0 = 1 by hand gives these exactly
    assert blend_coefficients(1.0) == (1.875, -1.25, 0.375)


def test_mu_blend_value():
    p = CuspProfile()
    # (15/4 - 10/16 + 3/64) / 8, all powers of 0.5 exact in binary
    assert p.mu(0.5) == 0.396484375


def test_mu_matches_cusp_at_junction():
    p = CuspProfile()
    assert p.mu(1.0) == 1.0
    assert p.mu1(1.0) == 1.0
    assert p.mu2(1.0) == 0.0
    # same from the blend side: the sextic was built to land there
    eps = 1e-7
    assert abs(p.mu(1.0 - eps) - (1.0 - eps)) < 1e-6
    assert abs(p.mu1(1.0 - eps) - 1.0) < 1e-5


def test_mu_even_and_below_abs():
    p = CuspProfile()
    t = np.linspace(-3.0, 3.0, 601)
    np.testing.assert_allclose(p.mu(t), p.mu(-t), atol=0)
    assert np.all(p.mu(t) <= np.abs(t) + 1e-15)


@given(st.floats(min_value=0.3, max_value=4.0))
@settings(max_examples=30, deadline=None)
def test_mu_below_abs_any_junction(t0):
    p = CuspProfile(t0=t0)
    t = np.linspace(-t0, t0, 201)
    assert np.all(p.mu(t) <= np.abs(t) + 1e-14)


def test_profile_rejects_bad_parameters():
    with pytest.raises(ValueError):
        CuspProfile(ell=-1.0)
    with pytest.raises(ValueError):
        CuspProfile(t0=0.0)


def test_overlap_threshold_value():
    p = CuspProfile()
    assert abs(overlap_threshold(p, 0.1) - 1.60777) < 1e-5
    assert overlap_threshold(p, 0.1) == math.log(1.0 / (2.0 * math.sinh(0.1)))


def test_overlap_threshold_logarithm_law():
    one = CuspProfile(ell=1.0)
    two = CuspProfile(ell=2.0)
    for h in (0.05, 0.1, 0.4):
        assert abs(overlap_threshold(two, h)
                   - overlap_threshold(one, h) - math.log(2.0)) < 1e-14


def test_overlap_threshold_monotone_in_h():
    p = CuspProfile()
    hs = [0.4, 0.2, 0.1, 0.05, 0.025]
    vals = [overlap_threshold(p, h) for h in hs]
    assert all(a < b for a, b in zip(vals, vals[1:]))


# ── half-width ───────────────────────────────────────────────────────────────


def test_half_width_diagonal_identity():
    """Uncapped cusp diagonal is 2 e^{mu} sinh(h/2)."""
    p = CuspProfile()
    got = float(ball_half_width(p, 0.1, 1.3, 1.3))
    want = 2.0 * math.exp(p.mu(1.3)) * math.sinh(0.05)
    assert abs(got - want) < 1e-12 * want


def test_half_width_deep_cap():
    p = CuspProfile()
    # far past the overlap threshold the fiber width saturates at ell/2
    assert float(ball_half_width(p, 0.1, 5.0, 5.0)) == 0.5
    t_deep = overlap_threshold(p, 0.5) + 3.0
    assert float(ball_half_width(p, 0.5, t_deep, t_deep)) == 0.5


def test_half_width_tangency_and_domain():
    p = CuspProfile()
    assert float(ball_half_width(p, 0.1, 5.0, 5.1)) == 0.0
    with pytest.raises(ValueError):
        ball_half_width(p, 0.1, 5.0, 5.2)


def test_half_width_symmetry_random_pairs():
    p = CuspProfile()
    rng = np.random.default_rng(2024)
    h = 0.4
    t = rng.uniform(-3.0, 3.0, 10_000)
    tp = t + rng.uniform(-h, h, 10_000)
    forward = ball_half_width(p, h, t, tp)
    backward = ball_half_width(p, h, tp, t)
    assert float(np.max(np.abs(forward - backward))) < 1e-9


def test_half_width_monotone_until_cap():
    p = CuspProfile()
    h = 0.2
    t = np.linspace(1.3, 4.0, 250)
    vals = ball_half_width(p, h, t, t + 0.3 * h)
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(vals <= 0.5 + 1e-15)


def test_ball_geometry_summary():
    p = CuspProfile()
    g = ball_geometry(p, 0.1, 2.0)
    assert g.alpha_max <= 0.5
    assert g.volume > 0
    assert g.overlapping  # t = 2 is past t_h(0.1) = 1.608
    assert not ball_geometry(p, 0.1, 1.3).overlapping


# ── volumes ──────────────────────────────────────────────────────────────────


@pytest.mark.parametrize("h", [0.05, 0.1, 0.2, 0.4])
def test_volume_closed_form_oracle(h):
    """Non-overlapping ball in an exact cusp has volume 2 pi (cosh h - 1).

    At unit circumference every cusp ball with h >= 0.2 already wraps, so
    the check runs on a circumference sized to leave a one-unit window of
    non-overlap above the junction.
    """
    ell = 2.0 * math.sinh(h) * math.exp(1.0 + 2.0 * h + 1.0)
    p = CuspProfile(ell=ell)
    t = 1.0 + h + 0.5
    want = 2.0 * math.pi * (math.cosh(h) - 1.0)
    assert abs(ball_volume(p, h, t) - want) < 1e-4 * want


def test_volume_overlap_z_integral_oracle():
    """Deep in the overlap the volume reduces to a one-variable integral in
    z = e^{-t} times the wrapped fiber, evaluated here by independent
    quadrature."""
    import scipy.integrate

    p = CuspProfile()
    h = 0.5
    for t in (2.0, 3.0, 5.0):
        z_max = math.exp(-t) * p.ell / 2.0
        val, _ = scipy.integrate.quad(
            lambda z: 2.0 * math.sqrt(math.sinh(h) ** 2 - z * z) / (1.0 + z * z),
            -z_max, z_max, epsabs=1e-14, epsrel=1e-12)
        got = ball_volume(p, h, t)
        assert abs(got - val) < 1e-6 * val


def test_volume_deep_asymptotic():
    p = CuspProfile()
    h = 0.1
    t = overlap_threshold(p, h) + 4.0
    leading = 2.0 * p.ell * math.sinh(h) * math.exp(-t)
    rel = abs(ball_volume(p, h, t) - leading) / leading
    assert rel < 2.0 * math.exp(-2.0 * t) / math.sinh(h) ** 2


def test_volume_deep_lower_bound():
    p = CuspProfile()
    h = 0.1
    t = overlap_threshold(p, h) + 1.0
    assert ball_volume(p, h, t) >= 0.2 * h * math.exp(-t)


# ── distances ────────────────────────────────────────────────────────────────


def test_distance_cusp_basics():
    p = CuspProfile()
    assert distance_cusp(p, (2.0, 0.0), (2.0, 0.0)) == 0.0
    # periodicity: shifting y by a full circumference is the same point
    assert distance_cusp(p, (2.0, 0.3), (2.0, 1.3)) < 1e-12
    assert abs(distance_cusp(p, (2.0, 0.0), (2.2, 0.0)) - 0.2) < 1e-12


def test_distance_cusp_rejects_blend_points():
    p = CuspProfile()
    with pytest.raises(ValueError):
        distance_cusp(p, (0.5, 0.0), (2.0, 0.0))
    with pytest.raises(ValueError):
        distance_cusp(p, (2.0, 0.0), (-2.0, 0.0))


def test_distance_numeric_on_axis():
    p = CuspProfile()
    # the height axis is a geodesic for any even profile
    assert abs(distance_numeric(p, (0.0, 0.0), (0.3, 0.0)) - 0.3) < 1e-8


def test_distance_numeric_first_order_fiber():
    p = CuspProfile()
    dy = 1e-3
    d = distance_numeric(p, (0.0, 0.0), (0.0, dy))
    assert abs(d - dy) < 1e-8  # e^{-mu(0)} = 1


def test_distance_consistency_random_pairs():
    """Shooting and the half-plane formula agree at short range."""
    p = CuspProfile()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        t = rng.uniform(2.0, 4.0)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        pa = (sign * t, rng.uniform(0.0, 1.0))
        pb = (pa[0] + rng.uniform(-0.05, 0.05),
              pa[1] + rng.uniform(-0.02, 0.02) * math.exp(-t))
        a = distance_cusp(p, pa, pb)
        b = distance_numeric(p, pa, pb)
        worst = max(worst, abs(a - b))
    assert worst < 1e-6


@given(st.floats(min_value=0.05, max_value=0.6),
       st.floats(min_value=-2.5, max_value=2.5),
       st.floats(min_value=-1.0, max_value=1.0))
@settings(max_examples=25, deadline=None)
def test_half_width_bounds_property(h, t, frac):
    p = CuspProfile()
    val = float(ball_half_width(p, h, t, t + frac * h))
    assert 0.0 <= val <= 0.5
