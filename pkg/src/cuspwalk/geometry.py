"""Geometry of a finite-volume surface of revolution with two hyperbolic cusps.

The surface is W = R_t x (R/lZ)_y with metric dt^2 + e^{-2 mu(t)} dy^2.
The warp mu equals |t| outside [-t0, t0] (exact cusps) and an even C^2
sextic blend inside.  Everything downstream (walk kernels, spectra,
samplers) reduces to three geometric quantities computed here:

* mu and its derivatives,
* the half-width alpha_h(t, t') of a geodesic ball's fiber over t',
* the ball volume |B_h(t)| and the overlap threshold t_h.

In an exact cusp the half-width has a closed form (the cusp is a quotient
of the hyperbolic half-plane); near the blend it is computed by shooting
geodesics and bisecting on the launch angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "CuspProfile",
    "BallGeometry",
    "blend_coefficients",
    "overlap_threshold",
    "ball_half_width",
    "half_width_envelope",
    "ball_volume",
    "band_integral",
    "ball_geometry",
    "distance_cusp",
    "distance_numeric",
]

# ── warp profile ─────────────────────────────────────────────────────────────


def blend_coefficients(t0: float) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of the even sextic a t^2 + b t^4 + c t^6 that
    matches the value, slope, and curvature of |t| at t = t0.

    Three conditions, three unknowns; the resulting warp is C^2 on all of R
    and stays below |t| (so the fiber length e^{-mu} never drops under
    e^{-|t|}).
    """
    if t0 <= 0:
        raise ValueError(f"t0 must be positive, got {t0}")
    lhs = np.array(
        [
            [t0**2, t0**4, t0**6],
            [2 * t0, 4 * t0**3, 6 * t0**5],
            [2.0, 12 * t0**2, 30 * t0**4],
        ]
    )
    rhs = np.array([t0, 1.0, 0.0])
    a, b, c = np.linalg.solve(lhs, rhs)
    return float(a), float(b), float(c)


@dataclass(frozen=True)
class CuspProfile:
    """Immutable description of the surface W.

    ell is the circumference of the y-circle, t0 the half-width of the
    blended neck, blend_coeffs the sextic coefficients on [-t0, t0], and
    t_max an optional default truncation for grid-based consumers (None
    means "choose per experiment").
    """

    ell: float = 1.0
    t0: float = 1.0
    blend_coeffs: tuple[float, float, float] = field(default=None)  # type: ignore[assignment]
    t_max: float | None = None

    def __post_init__(self):
        if self.ell <= 0:
            raise ValueError(f"ell must be positive, got {self.ell}")
        if self.blend_coeffs is None:
            object.__setattr__(self, "blend_coeffs", blend_coefficients(self.t0))

    # -- warp and derivatives (vectorized; scalars in, floats out) --

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        out = np.abs(t)
        inside = out < self.t0
        if np.any(inside):
            a, b, c = self.blend_coeffs
            ti = t[inside] if t.ndim else t
            val = a * ti**2 + b * ti**4 + c * ti**6
            if t.ndim:
                out[inside] = val
            else:
                out = np.asarray(val)
        return out if out.ndim else float(out)

    def mu1(self, t):
        """First derivative of mu (sign(t) outside the blend)."""
        t = np.asarray(t, dtype=float)
        out = np.sign(t)
        inside = np.abs(t) < self.t0
        if np.any(inside):
            a, b, c = self.blend_coeffs
            ti = t[inside] if t.ndim else t
            val = 2 * a * ti + 4 * b * ti**3 + 6 * c * ti**5
            if t.ndim:
                out[inside] = val
            else:
                out = np.asarray(val)
        return out if out.ndim else float(out)

    def mu2(self, t):
        """Second derivative of mu (zero outside the blend)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = np.abs(t) < self.t0
        if np.any(inside):
            a, b, c = self.blend_coeffs
            ti = t[inside] if t.ndim else t
            val = 2 * a + 12 * b * ti**2 + 30 * c * ti**4
            if t.ndim:
                out[inside] = val
            else:
                out = np.asarray(val)
        return out if out.ndim else float(out)

    def gauss_curvature(self, t):
        """K = mu'' - mu'^2; identically -1 in the exact cusps."""
        return self.mu2(t) - self.mu1(t) ** 2

    def fiber_lower_bound(self) -> float:
        """Largest c0 with e^{-mu(t)} >= c0 e^{-|t|} everywhere.

        The sextic blend sits below |t|, so c0 = 1; verified numerically at
        construction time by callers that care (see tests).
        """
        return 1.0


# ── half-width: closed form in the exact cusps ───────────────────────────────


def _half_width_cusp(ta, tb, h: float):
    """Uncapped half-width for two points at cusp depths ta, tb >= t0.

    Derived from the half-plane distance formula: the fiber endpoint (tb, y)
    at distance exactly h from (ta, 0) satisfies
    y^2 = 2 e^{ta+tb} cosh h - e^{2ta} - e^{2tb},
    clipped at zero for tangency.  Evaluated in the factored form
    e^{(ta+tb)/2} sqrt(2 cosh h - 2 cosh(tb - ta)) so that deep windows
    overflow to inf (harmless: the l/2 cap absorbs it) instead of the
    difference of two overflowing exponentials turning into NaN.
    Symmetric in (ta, tb) by inspection.
    """
    gap = np.maximum(2.0 * np.cosh(h) - 2.0 * np.cosh(np.asarray(tb) - ta), 0.0)
    return np.exp(0.5 * (np.asarray(ta) + tb)) * np.sqrt(gap)


# ── half-width: geodesic shooting in and near the blend ─────────────────────


def _shoot_geodesics(profile: CuspProfile, t_start, theta, h: float, n_steps: int):
    """Integrate unit-speed geodesics for arclength h, vectorized.

    State (t, phi, y) with t' = cos(phi), phi' = mu'(t) sin(phi),
    y' = e^{mu(t)} sin(phi); y is the fiber coordinate in the universal
    cover.  theta is the launch angle from the +t axis, in (0, pi).
    Classical RK4 with a fixed step; returns (t_end, y_end).
    """
    mu, mu1 = profile.mu, profile.mu1
    t = np.array(t_start, dtype=float, copy=True)
    phi = np.array(theta, dtype=float, copy=True)
    y = np.zeros_like(t)
    ds = h / n_steps
    for _ in range(n_steps):
        s1 = np.sin(phi)
        k1t, k1p, k1y = np.cos(phi), mu1(t) * s1, np.exp(mu(t)) * s1
        t2, p2 = t + 0.5 * ds * k1t, phi + 0.5 * ds * k1p
        s2 = np.sin(p2)
        k2t, k2p, k2y = np.cos(p2), mu1(t2) * s2, np.exp(mu(t2)) * s2
        t3, p3 = t + 0.5 * ds * k2t, phi + 0.5 * ds * k2p
        s3 = np.sin(p3)
        k3t, k3p, k3y = np.cos(p3), mu1(t3) * s3, np.exp(mu(t3)) * s3
        t4, p4 = t + ds * k3t, phi + ds * k3p
        s4 = np.sin(p4)
        k4t, k4p, k4y = np.cos(p4), mu1(t4) * s4, np.exp(mu(t4)) * s4
        t = t + ds * (k1t + 2 * k2t + 2 * k3t + k4t) / 6.0
        phi = phi + ds * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
        y = y + ds * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
    return t, y


def _shoot_steps(h: float) -> int:
    # keeps the accumulated RK4 error ~ h^4 / n^3 below 1e-9 for desk-scale h
    return max(32, int(math.ceil(h / 0.004)))


def _half_width_shoot(profile: CuspProfile, t_start, t_target, h: float, n_iter: int = 55):
    """Uncapped half-width by bisection on the launch angle.

    The arclength-h endpoint height t_end(theta) decreases monotonically from
    t+h (theta=0) to t-h (theta=pi) as long as sqrt(max curvature) * h < pi,
    which holds for every admissible profile at desk-scale h; the fiber
    coordinate at the matched angle is alpha.  Vectorized over pairs.
    """
    t_start = np.asarray(t_start, dtype=float)
    t_target = np.asarray(t_target, dtype=float)
    n_steps = _shoot_steps(h)
    lo = np.zeros_like(t_start)
    hi = np.full_like(t_start, np.pi)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        t_end, _ = _shoot_geodesics(profile, t_start, mid, h, n_steps)
        go_deeper = t_end >= t_target
        lo = np.where(go_deeper, mid, lo)
        hi = np.where(go_deeper, hi, mid)
    _, y_end = _shoot_geodesics(profile, t_start, 0.5 * (lo + hi), h, n_steps)
    return y_end


def _closed_form_mask(profile: CuspProfile, ta, tb):
    """True where the exact-cusp closed form is valid for the pair (ta, tb):
    both beyond t0 on the same side, so the joining geodesic never enters the
    blend (half-plane arcs never dip below the lower endpoint).
    """
    same_side = np.sign(ta) == np.sign(tb)
    return (np.minimum(np.abs(ta), np.abs(tb)) >= profile.t0) & same_side


def _half_width_uncapped(profile: CuspProfile, h: float, ta, tb):
    ta = np.asarray(ta, dtype=float)
    tb = np.asarray(tb, dtype=float)
    out = np.zeros(np.broadcast(ta, tb).shape)
    ta_b, tb_b = np.broadcast_arrays(ta, tb)
    near = np.abs(ta_b - tb_b) <= h
    cusp = _closed_form_mask(profile, ta_b, tb_b) & near
    if np.any(cusp):
        out[cusp] = _half_width_cusp(np.abs(ta_b[cusp]), np.abs(tb_b[cusp]), h)
    blend = near & ~cusp
    if np.any(blend):
        out[blend] = _half_width_shoot(profile, ta_b[blend], tb_b[blend], h)
    return out


def ball_half_width(profile: CuspProfile, h: float, t, t_prime):
    """alpha_h(t, t'): half-width of the fiber of the geodesic ball B_h(t, 0)
    over the circle at height t', capped at ell/2 (a fiber can cover at most
    the whole circle; the cap is exact because the self-overlapping fiber is a
    union of wrapped intervals of total length min(2 alpha, ell)).

    Symmetric in (t, t'); zero at |t - t'| = h; raises outside the band.
    """
    t = np.asarray(t, dtype=float)
    tp = np.asarray(t_prime, dtype=float)
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if np.any(np.abs(t - tp) > h * (1 + 1e-12)):
        raise ValueError("ball_half_width needs |t - t'| <= h")
    out = np.minimum(_half_width_uncapped(profile, h, t, tp), profile.ell / 2.0)
    return out if out.ndim else float(out)


def half_width_envelope(profile: CuspProfile, h: float, t):
    """A provable upper bound for alpha_h(t, .) over the whole band.

    Any path from (t, 0) to (t', y) has length >= e^{-max mu} |y| where the
    max is over the band [t-h, t+h]; mu is unimodal so the max sits at an
    endpoint.  Hence alpha <= h e^{max(mu(t-h), mu(t+h))}, capped at ell/2.
    Used as the rejection-sampling envelope.
    """
    t = np.asarray(t, dtype=float)
    mu_hi = np.maximum(profile.mu(t - h), profile.mu(t + h))
    out = np.minimum(h * np.exp(mu_hi), profile.ell / 2.0)
    return out if out.ndim else float(out)


# ── overlap threshold ────────────────────────────────────────────────────────


def overlap_threshold(profile: CuspProfile, h: float) -> float:
    """Depth t_h = log(ell / (2 sinh h)) past which the ball wraps around the
    cusp circle (the half-width cap starts to bind at the ball's equator).
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    return math.log(profile.ell / (2.0 * math.sinh(h)))


# ── band quadrature: segments, edge substitution, adaptive Simpson ──────────


def _adaptive_simpson_batch(g: Callable, a: float, b: float, rel_tol: float,
                            max_depth: int = 24) -> float:
    """Adaptive Simpson on [a, b] for a vectorized integrand g.

    Work-list formulation: all pending midpoint evaluations happen in one
    batched call per refinement level, which matters when g hides geodesic
    shooting.  Interval error accepted when |S_fine - S| / 15 is below the
    proportional share of rel_tol * |integral estimate|.
    """
    if b <= a:
        return 0.0
    xs = np.array([a, 0.5 * (a + b), b])
    fa, fm, fb = g(xs)
    total = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stack = [(a, b, fa, fm, fb, total, 0)]
    result = 0.0
    scale = max(abs(total), 1e-300)
    while stack:
        # evaluate both child midpoints for every pending interval at once
        mids = []
        for (ia, ib, *_rest) in stack:
            im = 0.5 * (ia + ib)
            mids.append(0.5 * (ia + im))
            mids.append(0.5 * (im + ib))
        fmids = g(np.array(mids))
        new_stack = []
        for idx, (ia, ib, ifa, ifm, ifb, iS, depth) in enumerate(stack):
            im = 0.5 * (ia + ib)
            flm, frm = fmids[2 * idx], fmids[2 * idx + 1]
            s_left = (im - ia) / 6.0 * (ifa + 4.0 * flm + ifm)
            s_right = (ib - im) / 6.0 * (ifm + 4.0 * frm + ifb)
            err = (s_left + s_right - iS) / 15.0
            budget = rel_tol * scale * (ib - ia) / (b - a)
            if abs(err) <= budget or depth >= max_depth:
                result += s_left + s_right + err  # Richardson-corrected
            else:
                new_stack.append((ia, im, ifa, flm, ifm, s_left, depth + 1))
                new_stack.append((im, ib, ifm, frm, ifb, s_right, depth + 1))
        stack = new_stack
        scale = max(scale, abs(result))
    return result


def _cap_crossings(profile: CuspProfile, h: float, t: float, a: float, b: float) -> list[float]:
    """Points in (a, b) where the uncapped half-width crosses ell/2."""
    probe = np.linspace(a, b, 129)
    vals = _half_width_uncapped(profile, h, np.full_like(probe, t), probe)
    over = vals > profile.ell / 2.0
    flips = np.nonzero(over[1:] != over[:-1])[0]
    crossings = []
    for i in flips:
        lo, hi = probe[i], probe[i + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            v = _half_width_uncapped(profile, h, np.array([t]), np.array([mid]))[0]
            if (v > profile.ell / 2.0) == over[i]:
                lo = mid
            else:
                hi = mid
        crossings.append(0.5 * (lo + hi))
    return crossings


def band_integral(profile: CuspProfile, h: float, t: float,
                  f: Callable, rel_tol: float = 1e-8) -> float:
    """Integral over the band [t-h, t+h] of f(t', alpha_h(t, t')).

    f must be vectorized in both arguments.  The integrand vanishes like a
    square root at both band edges (alpha^2 has simple zeros there), so the
    outer zones are integrated in the substituted variable u = sqrt(offset),
    which makes them smooth; the interior is split at the blend boundaries
    +-t0 and at half-width cap crossings, where the integrand is only C^0.
    """
    a, b = t - h, t + h

    def alpha_of(tp):
        return np.minimum(
            _half_width_uncapped(profile, h, np.full_like(tp, t), tp),
            profile.ell / 2.0,
        )

    # interior breakpoints: blend boundaries and cap crossings
    cuts = [c for c in (-profile.t0, profile.t0) if a < c < b]
    cuts += _cap_crossings(profile, h, t, a, b)
    cuts = sorted(set(cuts))

    # edge-zone width: a third of the gap to the first breakpoint (or of the band)
    first = cuts[0] if cuts else b
    last = cuts[-1] if cuts else a
    w_left = min(0.35 * h, (first - a) / 2.0)
    w_right = min(0.35 * h, (b - last) / 2.0)

    total = 0.0
    # left edge, t' = a + u^2
    ul = math.sqrt(w_left)

    def g_left(u):
        tp = a + u * u
        return 2.0 * u * f(tp, alpha_of(tp))

    total += _adaptive_simpson_batch(g_left, 0.0, ul, rel_tol)

    # right edge, t' = b - u^2
    ur = math.sqrt(w_right)

    def g_right(u):
        tp = b - u * u
        return 2.0 * u * f(tp, alpha_of(tp))

    total += _adaptive_simpson_batch(g_right, 0.0, ur, rel_tol)

    # interior pieces
    points = [a + w_left] + cuts + [b - w_right]
    for lo, hi in zip(points[:-1], points[1:]):
        if hi > lo:
            total += _adaptive_simpson_batch(
                lambda tp: f(tp, alpha_of(tp)), lo, hi, rel_tol
            )
    return total


# ── ball volume and summary ──────────────────────────────────────────────────


def ball_volume(profile: CuspProfile, h: float, t: float, rel_tol: float = 1e-8) -> float:
    """|B_h(t)| = integral over the band of 2 alpha_h(t, t') e^{-mu(t')} dt'."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    return band_integral(
        profile, h, t, lambda tp, alpha: 2.0 * alpha * np.exp(-profile.mu(tp)), rel_tol
    )


@dataclass(frozen=True)
class BallGeometry:
    """Summary of one geodesic ball: step h, center height, the maximal fiber
    half-width, the volume, and whether the ball wraps around the circle."""

    h: float
    t_center: float
    alpha_max: float
    volume: float
    overlapping: bool


def ball_geometry(profile: CuspProfile, h: float, t: float) -> BallGeometry:
    """Assemble the BallGeometry summary at center (t, 0).

    In an exact cusp the uncapped maximum over t' is e^{mu(t)} sinh h (attained
    where e^{t'-t} = cosh h); through the blend it is found numerically on a
    fine probe of the band.
    """
    mu_t = profile.mu(t)
    ball_in_cusp = abs(t) - h >= profile.t0
    if ball_in_cusp:
        raw_max = math.inf if mu_t > 690 else math.sinh(h) * math.exp(mu_t)
    else:
        probe = np.linspace(t - h, t + h, 513)
        raw_max = float(
            np.max(_half_width_uncapped(profile, h, np.full_like(probe, t), probe))
        )
    overlapping = mu_t + math.log(math.sinh(h)) >= math.log(profile.ell / 2.0)
    return BallGeometry(
        h=h,
        t_center=t,
        alpha_max=min(raw_max, profile.ell / 2.0),
        volume=ball_volume(profile, h, t),
        overlapping=overlapping,
    )


# ── distances ────────────────────────────────────────────────────────────────


def distance_cusp(profile: CuspProfile, p: Sequence[float], q: Sequence[float]) -> float:
    """Geodesic distance between two points of the same exact cusp.

    Uses the half-plane model x = e^{|t|}: cosh d = 1 + ((x-x')^2 +
    (dy + j ell)^2) / (2 x x'), minimized over wrap counts j; the loop stops
    once the wrap offset alone forces a larger distance than the current best.
    Raises if either point lies in the blend or the points sit in opposite
    cusps (no single half-plane chart covers that; use distance_numeric).
    """
    t, y = float(p[0]), float(p[1])
    tq, yq = float(q[0]), float(q[1])
    if min(abs(t), abs(tq)) < profile.t0:
        raise ValueError("distance_cusp needs both points beyond t0; use distance_numeric")
    if np.sign(t) != np.sign(tq):
        raise ValueError("points lie in opposite cusps; use distance_numeric")
    x, xq = math.exp(abs(t)), math.exp(abs(tq))
    dy = (y - yq) % profile.ell
    best = math.inf
    j = 0
    while True:
        improved = False
        for off in ({0} if j == 0 else {j * profile.ell, -j * profile.ell}):
            num = (x - xq) ** 2 + (dy + off) ** 2
            d = math.acosh(1.0 + num / (2.0 * x * xq))
            if d < best:
                best = d
                improved = True
        # once |j ell - dy| alone exceeds the chord of the current best, stop
        j += 1
        min_dy = j * profile.ell - dy
        if min_dy > 0 and 1.0 + min_dy**2 / (2.0 * x * xq) >= math.cosh(best) and not improved:
            break
        if j > 1000:  # unreachable for sane inputs; avoids a silent spin
            raise RuntimeError("wrap search failed to terminate")
    return best


def _mu_s(profile: CuspProfile, t: float) -> float:
    at = abs(t)
    if at >= profile.t0:
        return at
    a, b, c = profile.blend_coeffs
    return a * t * t + b * t**4 + c * t**6


def _mu1_s(profile: CuspProfile, t: float) -> float:
    at = abs(t)
    if at >= profile.t0:
        return math.copysign(1.0, t)
    a, b, c = profile.blend_coeffs
    return 2 * a * t + 4 * b * t**3 + 6 * c * t**5


def _rk4_geo_step(profile: CuspProfile, t: float, phi: float, y: float, ds: float):
    """One classical RK4 step of the geodesic system (scalar, cheap)."""
    s1 = math.sin(phi)
    k1t, k1p, k1y = math.cos(phi), _mu1_s(profile, t) * s1, math.exp(_mu_s(profile, t)) * s1
    t2, p2 = t + 0.5 * ds * k1t, phi + 0.5 * ds * k1p
    s2 = math.sin(p2)
    k2t, k2p, k2y = math.cos(p2), _mu1_s(profile, t2) * s2, math.exp(_mu_s(profile, t2)) * s2
    t3, p3 = t + 0.5 * ds * k2t, phi + 0.5 * ds * k2p
    s3 = math.sin(p3)
    k3t, k3p, k3y = math.cos(p3), _mu1_s(profile, t3) * s3, math.exp(_mu_s(profile, t3)) * s3
    t4, p4 = t + ds * k3t, phi + ds * k3p
    s4 = math.sin(p4)
    k4t, k4p, k4y = math.cos(p4), _mu1_s(profile, t4) * s4, math.exp(_mu_s(profile, t4)) * s4
    return (
        t + ds * (k1t + 2 * k2t + 2 * k3t + k4t) / 6.0,
        phi + ds * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0,
        y + ds * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0,
    )


def _shoot_to_height(profile: CuspProfile, t_launch: float, theta: float,
                     t_target: float, s_max: float, ds: float,
                     skip: int = 0):
    """Follow one geodesic until it crosses t = t_target (the trivial
    crossing at the launch point excluded); return (arclength, fiber) there,
    or None if no crossing happens within s_max.

    With skip > 0 that many crossings are passed over first, which lets a
    caller ask for the descending leg of an arc that grazes over the target
    height.  The reported crossing is refined by bisecting the final partial
    step, so its accuracy matches the integrator rather than the step grid.
    """
    t, phi, y, s = t_launch, theta, 0.0, 0.0
    side = t - t_target
    started = abs(side) > 1e-14
    while s < s_max:
        t_new, phi_new, y_new = _rk4_geo_step(profile, t, phi, y, ds)
        side_new = t_new - t_target
        if started and side * side_new <= 0.0:
            if skip > 0:
                skip -= 1
            else:
                lo_s, hi_s = 0.0, ds
                for _ in range(50):
                    mid_s = 0.5 * (lo_s + hi_s)
                    tm, _, _ = _rk4_geo_step(profile, t, phi, y, mid_s)
                    if (tm - t_target) * side > 0.0:
                        lo_s = mid_s
                    else:
                        hi_s = mid_s
                mid_s = 0.5 * (lo_s + hi_s)
                _, _, ym = _rk4_geo_step(profile, t, phi, y, mid_s)
                return s + mid_s, ym
        if not started and abs(side_new) > 1e-14:
            started = True
        t, phi, y, s, side = t_new, phi_new, y_new, s + ds, side_new
    return None


def _bisect_shot(profile: CuspProfile, t_p: float, t_q: float, tau: float,
                 ds: float, s_cap: float, tol: float, max_iter: int,
                 lo: float, hi: float, increasing: bool, skip: int = 0):
    """Bisect the launch angle on (lo, hi) until the reported crossing of
    t = t_q lands at fiber coordinate tau; None when the bracket misses.

    A shot with no crossing in range counts as arbitrarily wide, which keeps
    the steering consistent when the cap truncates long arcs.
    """
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        hit = _shoot_to_height(profile, t_p, mid, t_q, s_cap, ds, skip)
        y_mid = hit[1] if hit else math.inf
        if hit and abs(y_mid - tau) < tol:
            return hit[0]
        over = y_mid > tau
        if increasing:
            lo, hi = (lo, mid) if over else (mid, hi)
        else:
            lo, hi = (mid, hi) if over else (lo, mid)
    hit = _shoot_to_height(profile, t_p, 0.5 * (lo + hi), t_q, s_cap, ds, skip)
    if hit is not None and abs(hit[1] - tau) < 1e-6:
        return hit[0]
    return None


def _matched_shot(profile: CuspProfile, t_p: float, t_q: float, tau: float,
                  ds: float, s_cap: float, tol: float, max_iter: int):
    """Arclength of the geodesic from (t_p, 0) that crosses t = t_q at fiber
    coordinate tau > 0, or None if no such shot exists within arclength
    s_cap.

    Assumes t_q >= t_p (callers reflect through t -> -t otherwise; mu is even
    so the reflected surface is the same).  For t_q == t_p the crossing fiber
    shrinks from arbitrarily wide arcs near theta = 0 to hairpins near
    theta = pi/2.  For t_q > t_p the primary family is rising shots, whose
    first crossing grows monotonically with the launch angle; two further
    families escape it and are searched when it misses: arcs that graze over
    t_q and land on the descending leg (target barely above the launch), and
    arcs that dip below the launch before rising (launch deeper in a cusp
    than the target).
    """
    if abs(t_q - t_p) < 1e-12:
        return _bisect_shot(profile, t_p, t_q, tau, ds, s_cap, tol, max_iter,
                            1e-7, math.pi / 2 - 1e-9, False)
    d = _bisect_shot(profile, t_p, t_q, tau, ds, s_cap, tol, max_iter,
                     1e-9, math.pi / 2, True)
    if d is not None:
        return d
    # graze-over pass: the launch angle must keep the turning height beyond
    # t_q, which pins it below asin(exp(mu(t_p) - max mu on the way); the
    # descending-leg fiber shrinks as the launch steepens
    mu_p = _mu_s(profile, t_p)
    hi_a = math.asin(min(1.0 - 1e-12,
                         math.exp(mu_p - max(mu_p, _mu_s(profile, t_q)))))
    if hi_a - 1e-9 > 1e-7:
        ds_a = min(ds, max(tau / 10.0, 1e-5))
        cap_a = min(s_cap, 2.0 * tau + 20.0 * ds_a + 2.0 * (t_q - t_p))
        d = _bisect_shot(profile, t_p, t_q, tau, ds_a, cap_a, tol, max_iter,
                         1e-7, hi_a - 1e-9, False, skip=1)
        if d is not None:
            return d
    # dip pass: launch downward; deeper turns sweep wider before the rise
    return _bisect_shot(profile, t_p, t_q, tau, ds, s_cap, tol, max_iter,
                        math.pi / 2 + 1e-9, math.pi - 1e-7, True)


def distance_numeric(profile: CuspProfile, p: Sequence[float], q: Sequence[float],
                     tol: float = 1e-8, max_iter: int = 60) -> float:
    """Short-range geodesic distance for arbitrary nearby points, blend
    region included.

    Strategy: for each candidate fiber offset tau = |dy + j ell| (the target
    unwrapped into the universal cover), shoot geodesics from p and bisect
    the launch angle until the first crossing of the height of q lands on
    tau; the answer is the smallest arclength over candidates.  Wrap counts
    j are enumerated nearest-first and pruned with the bound
    d >= e^{-max mu reachable} * tau.  Same-height pairs are solved within
    both launch directions (arcs bulging toward either cusp).  Intended for
    d(p, q) up to a few step lengths; raises if nothing connects in range.
    """
    t_p, y_p = float(p[0]), float(p[1])
    t_q, y_q = float(q[0]), float(q[1])
    dy0 = (y_q - y_p) % profile.ell
    # heights closer than 1e-9 route through the same-height solver; the
    # error that introduces is at most the height difference itself
    same = abs(t_q - t_p) < 1e-9
    if same:
        # collapse the gap exactly, or the launch point itself registers
        # as the first crossing and every shot reports zero advance
        t_q = t_p
        if min(dy0, profile.ell - dy0) < 1e-14:
            return 0.0
    if t_q < t_p:  # reflect; mu is even so geometry is unchanged
        t_p, t_q = -t_p, -t_q
    ds, s_max = 0.01, 8.0
    best = math.inf

    j = 0
    dead = 0
    while True:
        taus = {abs(dy0 + j * profile.ell)} if j == 0 else {
            abs(dy0 + j * profile.ell), abs(dy0 - j * profile.ell)}
        reach = min(best, s_max)
        mu_reach = max(_mu_s(profile, t_p - reach), _mu_s(profile, t_p + reach))
        live = [tau for tau in sorted(taus) if math.exp(-mu_reach) * tau < reach]
        if not live:
            break
        for tau in live:
            if tau < 1e-14:
                if not same:  # the meridian itself is a geodesic
                    best = min(best, t_q - t_p)
                continue
            if same and abs(profile.mu1(t_p)) < 1e-13:
                # at a critical height of mu the horizontal circle is itself
                # a geodesic, and the crossing search is blind to it (it
                # never leaves the target height); the direct arc is exact
                best = min(best, math.exp(-profile.mu(t_p)) * tau)
            if same:
                # hairpins hug the launch height: their graze above it is
                # quadratically small, so the step must scale with the
                # target or the re-crossing falls inside a single step and
                # is never seen.  Halting at the hairpin length also stops
                # the over-the-neck branch (never minimal between
                # same-height points) from posing as the answer.
                ds_s = min(ds, max(tau / 10.0, 1e-5))
                s_cap = min(best, 2.0 * tau + 20.0 * ds_s)
            else:
                ds_s = ds
                s_cap = min(best, s_max)
            d = _matched_shot(profile, t_p, t_q, tau, ds_s, s_cap, tol, max_iter)
            if d is not None:
                best = min(best, d)
            if same and abs(t_p) > 1e-15:
                d = _matched_shot(profile, -t_p, -t_q, tau, ds_s, s_cap, tol, max_iter)
                if d is not None:
                    best = min(best, d)
        if not math.isfinite(best):
            # candidates only lengthen with the wrap count, so a handful of
            # misses with nothing found means nothing will connect
            dead += len(live)
            if dead >= 8:
                break
        j += 1
        if j > 100000:
            raise RuntimeError("wrap enumeration failed to terminate")
    if not math.isfinite(best):
        raise RuntimeError("distance_numeric found no connecting geodesic in range")
    return best
