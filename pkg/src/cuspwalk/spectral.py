"""Eigen-analysis of the walk's mode operators and of the Laplacian modes.

Four jobs live here:

* certified eigendecompositions of the symmetrized mode matrices (dense
  banded solves up to n = 4000, Krylov beyond), with essential-band
  bookkeeping;
* the Laplacian mode operators in Schrodinger form, solved three independent
  ways (finite differences, Richardson extrapolation, angle shooting) so the
  reference eigenvalues used by the quasimode tests never rest on a single
  discretization;
* quasimode residuals ||K psi - (1 - lambda h^2/8) psi|| evaluated with a
  dedicated Gauss-Legendre band quadrature rather than the walk's own grid
  (the midpoint Nystrom rule has a delta^{3/2} noise floor from the
  square-root band edges, which would bury the h^4 signal);
* the spectral gap as a minimum of per-mode contributions, with the
  crossover mode reported.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from cuspwalk.geometry import CuspProfile, _half_width_uncapped
from cuspwalk.operator import (
    GridSpec,
    ModeOperator,
    apply_mode_operator,
    assemble_mode_operator,
)

__all__ = [
    "SpectrumResult",
    "LaplaceModeResult",
    "GapScan",
    "essential_band",
    "spectrum_of_mode",
    "essential_band_occupancy",
    "weyl_residual",
    "laplace_mode_eigs",
    "laplace_eig_refined",
    "shooting_laplace_eig",
    "quasimode_residual",
    "restricted_mode_norm",
    "spectral_gap",
    "spectral_gap_scan",
]


# ── essential band ───────────────────────────────────────────────────────────


@lru_cache(maxsize=1)
def _sinc_minimum() -> tuple[float, float]:
    """(x*, A): location and value of the global minimum of sin(x)/x.

    x* is the root of tan x = x in (pi, 3 pi / 2), found by bisection on
    sin x - x cos x; A = sin(x*)/x* is negative.
    """
    lo, hi = math.pi, 1.5 * math.pi - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.sin(mid) - mid * math.cos(mid) > 0:
            lo = mid
        else:
            hi = mid
    x_star = 0.5 * (lo + hi)
    return x_star, math.sin(x_star) / x_star


def essential_band(h: float) -> tuple[float, float]:
    """The interval [A h/sinh h, h/sinh h] filled by the continuous spectrum
    of the k = 0 walk, A = min over x > 0 of sin(x)/x."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    _, a_min = _sinc_minimum()
    top = h / math.sinh(h)
    return a_min * top, top


# ── walk spectra ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class SpectrumResult:
    """Eigendecomposition summary of one symmetrized mode matrix.

    eigenvalues are descending; eigenvectors holds the columns retained
    (top ones), or None on the Krylov path when vectors were not kept.
    gap_contribution is 1 - lambda_2 for k = 0 and 1 - lambda_1 otherwise.
    inside_count / above_count refer to the essential band with the margin
    used at construction.  max_residual certifies every (value, vector) pair
    reported here: ||S v - lambda v||_2 <= max_residual.
    """

    k: int
    h: float
    grid: GridSpec
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray | None = field(repr=False)
    gap_contribution: float
    band: tuple[float, float]
    inside_count: int
    above_count: int
    max_residual: float
    method: str


def _symmetric_apply(op: ModeOperator, v: np.ndarray) -> np.ndarray:
    root = np.sqrt(op.weights)
    return root * apply_mode_operator(op, v / root)


def _certify(op: ModeOperator, vals: np.ndarray, vecs: np.ndarray) -> float:
    worst = 0.0
    for lam, v in zip(vals, vecs.T):
        r = _symmetric_apply(op, v) - lam * v
        worst = max(worst, float(np.linalg.norm(r)) / float(np.linalg.norm(v)))
    return worst


def spectrum_of_mode(op: ModeOperator, n_eigs: int = 6,
                     margin: float = 1e-3) -> SpectrumResult:
    """Solve the symmetrized mode matrix S for its spectrum.

    Dense banded eigendecomposition (LAPACK sbevd via eig_banded) when
    n <= 4000: every eigenvalue is returned and the top n_eigs vectors are
    kept.  For larger grids the top n_eigs pairs plus the bottom pair come
    from restarted Lanczos, and the band occupancy counts fall back to
    banded bisection counting, which stays cheap at any n.  All reported
    pairs carry a residual certificate (see SpectrumResult.max_residual);
    a certificate above 1e-6 raises, since it means the solver lied.
    """
    n = op.n
    lo_band, hi_band = essential_band(op.h)
    ab = op.symmetric_banded()
    if n <= 4000:
        vals = scipy.linalg.eigvals_banded(ab, lower=False)[::-1]  # descending
        keep = min(n_eigs, n)
        top_vals, vecs = scipy.linalg.eig_banded(
            ab, lower=False, select="i", select_range=(n - keep, n - 1)
        )
        vecs = vecs[:, ::-1]
        residual = _certify(op, top_vals[::-1], vecs)
        inside = int(np.sum((vals >= lo_band - margin) & (vals <= hi_band + margin)))
        above = int(np.sum(vals > hi_band + margin))
        eigenvalues, eigenvectors, method = vals, vecs, "banded"
    else:
        lin = scipy.sparse.linalg.LinearOperator(
            (n, n), matvec=lambda v: _symmetric_apply(op, np.asarray(v).reshape(-1))
        )
        try:
            top_vals, top_vecs = scipy.sparse.linalg.eigsh(
                lin, k=max(n_eigs, 2), which="LA", maxiter=20000, tol=0.0
            )
            bot_vals, bot_vecs = scipy.sparse.linalg.eigsh(
                lin, k=1, which="SA", maxiter=20000, tol=0.0
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise RuntimeError(
                f"Krylov eigensolve did not converge (n={n}): {exc}"
            ) from exc
        order = np.argsort(top_vals)[::-1]
        top_vals, top_vecs = top_vals[order], top_vecs[:, order]
        residual = max(
            _certify(op, top_vals, top_vecs), _certify(op, bot_vals, bot_vecs)
        )
        inside = len(scipy.linalg.eigvals_banded(
            ab, lower=False, select="v",
            select_range=(lo_band - margin, hi_band + margin),
        ))
        above = len(scipy.linalg.eigvals_banded(
            ab, lower=False, select="v", select_range=(hi_band + margin, 2.0),
        ))
        eigenvalues = np.concatenate([top_vals, bot_vals])
        eigenvectors, method = top_vecs, "krylov"
    if residual > 1e-6:
        raise RuntimeError(
            f"eigenpair residual {residual:.2e} exceeds certification bound"
        )
    if op.k == 0:
        gap = 1.0 - float(eigenvalues[1])
    else:
        gap = 1.0 - float(eigenvalues[0])
    return SpectrumResult(
        k=op.k, h=op.h, grid=op.grid,
        eigenvalues=eigenvalues, eigenvectors=eigenvectors,
        gap_contribution=gap, band=(lo_band, hi_band),
        inside_count=inside, above_count=above,
        max_residual=residual, method=method,
    )


def essential_band_occupancy(profile: CuspProfile, h: float,
                             t_max_values: Sequence[float],
                             n_per_h: int = 8,
                             margin: float = 1e-3) -> list[dict]:
    """Eigenvalue counts of the k = 0 mode matrix relative to the essential
    band, at a sequence of increasing truncations.

    Returns one row per t_max with keys t_max, n, inside, above.  The inside
    count grows linearly with t_max (discretized continuous spectrum fills
    the band at constant density per unit length of cusp); the above count
    is the truncation-stable part: the Perron eigenvalue plus whatever
    matches a quasimode.
    """
    rows = []
    for t_max in t_max_values:
        grid = GridSpec.for_step(h, t_max, n_per_h)
        op = assemble_mode_operator(profile, h, 0, grid)
        lo_band, hi_band = essential_band(h)
        ab = op.symmetric_banded()
        vals = scipy.linalg.eigvals_banded(ab, lower=False)
        inside = int(np.sum((vals >= lo_band - margin) & (vals <= hi_band + margin)))
        above = int(np.sum(vals > hi_band + margin))
        rows.append({"t_max": float(t_max), "n": op.n,
                     "inside": inside, "above": above})
    return rows


def weyl_residual(profile: CuspProfile, h: float, lam: float, n: int,
                  n_per_h: int = 8) -> float:
    """Residual of the oscillating-window Weyl vector against the band
    multiplier sin(lam h)/(lam sinh h).

    The vector u = 2^{-n/2} e^{i lam t} 1_{[2^n, 2^{n+1}]} lives where the
    ball fully wraps the cusp circle, so the symmetrized walk matrix acts as
    a pure convolution there and u is an approximate eigenvector with
    eigenvalue given by the multiplier; the residual measures the window
    truncation and decays like 2^{-n/2}.  The grid spans [2^n - 1,
    2^{n+1} + 1] with spacing at most min(h/8, 0.1/|lam|).
    """
    if 2.0 ** (n + 1) + h + 1 > 350.0:
        raise ValueError("window too deep: e^{2t} would overflow the kernel assembly")
    lo_supp, hi_supp = 2.0**n, 2.0 ** (n + 1)
    m = max(n_per_h, int(math.ceil(10.0 * abs(lam) * h)))
    delta = h / m
    t_min = lo_supp - 1.0
    n_cells = int(math.ceil((hi_supp + 1.0 - t_min) / delta))
    grid = GridSpec(t_min, t_min + n_cells * delta, delta)
    if delta > 0.1 / max(abs(lam), 1e-300):
        raise ValueError("grid too coarse to resolve the oscillation")
    op = assemble_mode_operator(profile, h, 0, grid)
    t = grid.nodes
    u = np.where((t >= lo_supp) & (t <= hi_supp),
                 2.0 ** (-n / 2.0) * np.exp(1j * lam * t), 0.0)
    multiplier = h / math.sinh(h) if lam == 0 else math.sin(lam * h) / (lam * math.sinh(h))
    root = np.sqrt(op.weights)
    s_u = root * apply_mode_operator(op, u / root)
    return float(np.linalg.norm(s_u - multiplier * u) / np.linalg.norm(u))


# ── Laplacian mode operators ─────────────────────────────────────────────────


@dataclass(frozen=True)
class LaplaceModeResult:
    """Low-lying spectrum of one Laplacian mode P_k.

    eigenvalues are ascending and truncated at the cutoff passed to the
    solver; eigenfunctions are the matching columns, conjugated back from
    Schrodinger form (multiplied by e^{mu/2}) and normalized in
    L^2(e^{-mu} dt).  essential_threshold is 1/4: above it, the k = 0
    values are box artifacts of the truncation, not discrete eigenvalues.
    """

    k: int
    grid: GridSpec
    eigenvalues: np.ndarray = field(repr=False)
    eigenfunctions: np.ndarray = field(repr=False)
    essential_threshold: float = 0.25


# potential clamp: far above the 4/3 reporting cutoff, so it changes nothing
# below it, but it keeps the matrix norm small enough for LAPACK bisection to
# stay accurate (unclamped e^{2 mu} reaches 1e25 on deep grids and the
# returned eigenvalues become garbage).
_POTENTIAL_CLAMP = 1e4


def _mode_potential(profile: CuspProfile, k: int, t: np.ndarray) -> np.ndarray:
    v = profile.mu1(t) ** 2 / 4.0 - profile.mu2(t) / 2.0
    if k != 0:
        v = v + (4.0 * math.pi**2 * k**2 / profile.ell**2) * np.exp(
            2.0 * profile.mu(t)
        )
    return np.minimum(v, _POTENTIAL_CLAMP)


def laplace_mode_eigs(profile: CuspProfile, k: int, grid: GridSpec,
                      cutoff: float = 4.0 / 3.0) -> LaplaceModeResult:
    """Eigenvalues of the mode-k Laplacian below the cutoff, by second-order
    finite differences on the conjugated form -d^2/dt^2 + V_k with Dirichlet
    ends, V_k = mu'^2/4 - mu''/2 + (2 pi k / l)^2 e^{2 mu} ... the squared
    frequency enters as 4 pi^2 k^2 / l^2.

    The conjugation by e^{-mu/2} turns the Laplacian's mode action into this
    Schrodinger operator; eigenfunctions are mapped back by e^{mu/2}.
    """
    if grid.delta > 0.01 + 1e-12:
        raise ValueError("laplace_mode_eigs needs delta <= 0.01")
    t = grid.nodes
    d2 = grid.delta**2
    diag = 2.0 / d2 + _mode_potential(profile, k, t)
    off = -np.ones(grid.n - 1) / d2
    vals, vecs = scipy.linalg.eigh_tridiagonal(
        diag, off, select="v", select_range=(-0.5, cutoff)
    )
    u = vecs / math.sqrt(grid.delta)  # l2 columns -> unit integral of u^2
    psi = u * np.exp(profile.mu(t) / 2.0)[:, None]
    return LaplaceModeResult(k=k, grid=grid, eigenvalues=vals, eigenfunctions=psi)


def laplace_eig_refined(profile: CuspProfile, k: int, index: int = 0,
                        delta: float = 0.004, t_bound: float = 12.0) -> float:
    """Richardson-extrapolated eigenvalue index (0-based, ascending among
    k-mode bound states): solve at delta and delta/2 and cancel the leading
    O(delta^2) error of the finite-difference scheme."""
    out = []
    for dd in (delta, delta / 2.0):
        n = int(round(2.0 * t_bound / dd))
        grid = GridSpec(-t_bound, -t_bound + n * dd, dd)
        t = grid.nodes
        diag = 2.0 / dd**2 + _mode_potential(profile, k, t)
        off = -np.ones(grid.n - 1) / dd**2
        vals = scipy.linalg.eigh_tridiagonal(
            diag, off, select="i", select_range=(index, index),
            eigvals_only=True,
        )
        out.append(vals[0])
    return float((4.0 * out[1] - out[0]) / 3.0)


def shooting_laplace_eig(profile: CuspProfile, k: int,
                         bracket: tuple[float, float] | None = None,
                         t_bound: float | None = None,
                         dt: float = 1e-3) -> float:
    """Fundamental eigenvalue of P_k by shooting, independent of any matrix.

    The potential is even, so the ground state is even: integrate
    u'' = (V - lambda) u from u(0) = 1, u'(0) = 0 out to t_bound and bisect
    lambda on the sign of u(t_bound); the first sign change above the
    potential minimum is the ground state.  State is renormalized on the fly
    so the exponential growth in the forbidden region cannot overflow.
    Cross-checks laplace_eig_refined to ~1e-6 at the default step.
    """
    if t_bound is None:
        # far enough that V >= 400 (decay margin e^{-20 per unit}), capped
        probe = np.linspace(0.0, 30.0, 3001)
        v_probe = _mode_potential(profile, k, probe)
        beyond = np.nonzero(v_probe >= 400.0)[0]
        t_bound = float(probe[beyond[0]]) + 0.5 if len(beyond) else 12.0
    n_steps = int(round(t_bound / dt))
    v_half = _mode_potential(
        profile, k, np.linspace(0.0, n_steps * dt, 2 * n_steps + 1)
    )

    def end_values(lams: np.ndarray) -> np.ndarray:
        u = np.ones_like(lams)
        up = np.zeros_like(lams)
        for i in range(n_steps):
            v0, vm, v1 = v_half[2 * i], v_half[2 * i + 1], v_half[2 * i + 2]
            k1u, k1p = up, (v0 - lams) * u
            k2u, k2p = up + 0.5 * dt * k1p, (vm - lams) * (u + 0.5 * dt * k1u)
            k3u, k3p = up + 0.5 * dt * k2p, (vm - lams) * (u + 0.5 * dt * k2u)
            k4u, k4p = up + dt * k3p, (v1 - lams) * (u + dt * k3u)
            u = u + dt * (k1u + 2 * k2u + 2 * k3u + k4u) / 6.0
            up = up + dt * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
            if i % 256 == 255:
                scale = np.maximum(np.abs(u), np.abs(up))
                big = scale > 1e100
                if np.any(big):
                    u = np.where(big, u / scale, u)
                    up = np.where(big, up / scale, up)
        return u

    if bracket is None:
        v_min = float(np.min(v_half))
        bracket = (v_min + 1e-9, 4.0 / 3.0)
    scan = np.linspace(bracket[0], bracket[1], 48)
    ends = end_values(scan)
    flips = np.nonzero(np.sign(ends[1:]) != np.sign(ends[:-1]))[0]
    if len(flips) == 0:
        raise RuntimeError("no eigenvalue found in the shooting bracket")
    lo, hi = float(scan[flips[0]]), float(scan[flips[0] + 1])
    sign_lo = math.copysign(1.0, float(ends[flips[0]]))
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        e = float(end_values(np.array([mid]))[0])
        if math.copysign(1.0, e) == sign_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ── quasimode residuals ──────────────────────────────────────────────────────

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _cap_crossings_cusp(profile: CuspProfile, h: float, t: float) -> list[float]:
    """Heights where the uncapped half-width crosses l/2, for a band lying
    entirely inside one exact cusp (closed form: quadratic in e^{t'})."""
    x = math.exp(abs(t))
    disc = (x * math.sinh(h)) ** 2 - (profile.ell / 2.0) ** 2
    if disc <= 0:
        return []
    s = abs(t) / t if t != 0 else 1.0
    roots = [x * math.cosh(h) - math.sqrt(disc), x * math.cosh(h) + math.sqrt(disc)]
    out = []
    for r in roots:
        tp = s * math.log(r)
        if abs(tp - t) < h and abs(tp) >= profile.t0:
            out.append(tp)
    return out


def _quasimode_nodes(profile: CuspProfile, h: float, centers: np.ndarray):
    """Gauss-Legendre node/weight/owner arrays covering the band of every
    collocation point, with square-root substitution on 0.35h edge zones and
    interior splits at the blend boundaries and at half-width cap crossings.
    """
    t0 = profile.t0
    w_edge = 0.35 * h
    env_blend = h * math.exp(profile.mu(t0 + h))  # cheap cap precheck
    pts, wts, owner = [], [], []
    for i, t in enumerate(centers):
        lo, hi = t - h + w_edge, t + h - w_edge
        cuts = [c for c in (-t0, t0) if lo < c < hi]
        if abs(t) - h >= t0:
            cuts += [c for c in _cap_crossings_cusp(profile, h, t) if lo < c < hi]
        elif env_blend >= profile.ell / 2.0:
            # a band touching the blend can only hit the cap when the circle
            # is tiny; probe for sign changes then
            probe = np.linspace(lo, hi, 65)
            al = _half_width_uncapped(profile, h, np.full_like(probe, t), probe)
            over = al > profile.ell / 2.0
            for idx in np.nonzero(over[1:] != over[:-1])[0]:
                cuts.append(0.5 * (probe[idx] + probe[idx + 1]))
        edges = [lo] + sorted(cuts) + [hi]
        vmax = math.sqrt(w_edge)
        v = 0.5 * vmax * (_GL_NODES + 1.0)
        jac = 0.5 * vmax * _GL_WEIGHTS * 2.0 * v
        pts.append(t - h + v * v)
        wts.append(jac)
        owner.append(np.full(len(v), i))
        for a, b in zip(edges[:-1], edges[1:]):
            pts.append(0.5 * (b - a) * _GL_NODES + 0.5 * (a + b))
            wts.append(0.5 * (b - a) * _GL_WEIGHTS)
            owner.append(np.full(len(_GL_NODES), i))
        pts.append(t + h - v * v)
        wts.append(jac)
        owner.append(np.full(len(v), i))
    return (np.concatenate(pts), np.concatenate(wts),
            np.concatenate(owner).astype(int))


def quasimode_residual(profile: CuspProfile, h: float, psi: Callable,
                       lam: float, k: int = 0,
                       support_radius: float | None = None,
                       collocation_per_h: int = 8) -> float:
    """|| K_{h,k} psi - (1 - lam h^2 / 8) psi || / || psi || in L^2(e^{-mu} dt).

    psi is a callable (a spline of a LaplaceModeResult eigenfunction, say)
    evaluable on [-R - h, R + h] where R is the support radius; lam its
    Laplacian eigenvalue.  The ratio equals the contract norm when psi comes
    in normalized, and is scale-invariant otherwise.

    K psi is evaluated at midpoint collocation points (spacing
    h/collocation_per_h) by per-point Gauss-Legendre band quadrature; see
    the module docstring for why the walk's own Nystrom grid is not reused
    here.
    """
    if support_radius is None:
        probe = np.linspace(0.0, 30.0, 1201)
        decay = np.abs(psi(probe)) * np.exp(-profile.mu(probe) / 2.0)
        peak = float(np.max(decay))
        alive = np.nonzero(decay > 1e-10 * peak)[0]
        support_radius = float(probe[alive[-1]]) + 1.0 if len(alive) else 5.0
    dc = h / collocation_per_h
    n_side = int(math.ceil(support_radius / dc))
    centers = (np.arange(-n_side, n_side) + 0.5) * dc
    pts, wts, owner = _quasimode_nodes(profile, h, centers)
    alpha = np.minimum(
        _half_width_uncapped(profile, h, centers[owner], pts), profile.ell / 2.0
    )
    emu = np.exp(-profile.mu(pts))
    base = 2.0 * alpha * emu * wts
    if k == 0:
        sinc = np.ones_like(alpha)
    else:
        sinc = np.sinc(2.0 * k * alpha / profile.ell)
    psi_nodes = psi(pts)
    b = np.bincount(owner, weights=base, minlength=len(centers))
    num = np.bincount(owner, weights=base * sinc * psi_nodes, minlength=len(centers))
    k_psi = num / b
    psi_c = psi(centers)
    resid = k_psi - (1.0 - lam * h * h / 8.0) * psi_c
    mass = np.exp(-profile.mu(centers)) * dc
    return float(
        math.sqrt(np.sum(resid**2 * mass)) / math.sqrt(np.sum(psi_c**2 * mass))
    )


# ── restricted norms and the gap ─────────────────────────────────────────────


def restricted_mode_norm(op: ModeOperator, tau: float) -> float:
    """Operator norm of the principal submatrix of S on the nodes with
    |t| >= tau: how much the walk can preserve of a function supported that
    deep.  The two deep blocks are decoupled when 2 tau > band width, but we
    solve the full masked submatrix anyway; symmetric, so the norm is the
    largest |eigenvalue|."""
    mask = np.abs(op.grid.nodes) >= tau
    if not np.any(mask):
        raise ValueError(f"no grid nodes beyond tau={tau}")
    sub = op.symmetric_dense()[np.ix_(mask, mask)]
    vals = scipy.linalg.eigvalsh(sub)
    return float(max(abs(vals[0]), abs(vals[-1])))


@dataclass(frozen=True)
class GapScan:
    """Per-mode gap contributions and their minimum."""

    h: float
    k_values: tuple[int, ...]
    contributions: tuple[float, ...]
    gap: float
    argmin_k: int
    crossover_k: int


def default_t_max(profile: CuspProfile, h: float) -> float:
    """Truncation rule: six units past the overlap threshold (where the walk
    becomes the wrapped box convolution), never less than six."""
    t_h = math.log(profile.ell / (2.0 * math.sinh(h)))
    return max(6.0, t_h + 6.0)


def spectral_gap_scan(profile: CuspProfile, h: float, k_max: int = 8,
                      t_max: float | None = None,
                      n_per_h: int = 8) -> GapScan:
    """Gap contributions of modes 0..k_max on a shared grid.

    k = 0 contributes 1 - lambda_2 (the Perron value 1 is excluded), k != 0
    contributes 1 - lambda_top.  Modes beyond k_max are strictly more
    contractive (their fiber frequency enters the kernel only through
    sinc(2 k alpha / l), which shrinks the top eigenvalue as |k| grows; the
    restricted-norm tests make this quantitative), so the finite scan
    determines g(h).  crossover_k is the smallest k beyond which every
    contribution stays above twice the minimum.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if t_max is None:
        t_max = default_t_max(profile, h)
    grid = GridSpec.for_step(h, t_max, n_per_h)
    ks = tuple(range(k_max + 1))
    base = assemble_mode_operator(profile, h, 0, grid)
    contributions = []
    for k in ks:
        # alpha band, normalizers, and weights are k-independent: reuse them
        op = base if k == 0 else dataclasses.replace(base, k=k)
        contributions.append(spectrum_of_mode(op, n_eigs=2).gap_contribution)
    contributions = tuple(float(c) for c in contributions)
    gap = min(contributions)
    argmin = ks[contributions.index(gap)]
    crossover = argmin
    for k in ks:
        if all(c > 2.0 * gap for kk, c in zip(ks, contributions) if kk > k):
            crossover = k
            break
    return GapScan(
        h=h, k_values=ks, contributions=contributions,
        gap=gap, argmin_k=argmin, crossover_k=crossover,
    )


def spectral_gap(profile: CuspProfile, h: float, k_max: int = 8,
                 t_max: float | None = None, n_per_h: int = 8) -> float:
    """g(h): the minimum gap contribution over modes 0..k_max (see
    spectral_gap_scan for the tail argument and the crossover report)."""
    return spectral_gap_scan(profile, h, k_max, t_max, n_per_h).gap
