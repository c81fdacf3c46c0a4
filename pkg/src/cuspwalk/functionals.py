"""Quadratic functionals of the walk and the one-dimensional tempered walks.

The Dirichlet form E_h and the variance V_h are the two halves of the
Poincare inequality V_h(f) <= E_h(f) / g(h); their ratio, minimized over
mean-zero functions, recovers the spectral gap by a route that never calls
an eigendecomposition.  Window-restricted versions of both functionals and
the exact splitting identity for the variance are included, as are the
tempered height walks: one-dimensional kernels driven by a reference
density rho, which is what the cusp operator turns into once the fiber has
been averaged out.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .geometry import CuspProfile
from .operator import (
    GridSpec,
    ModeOperator,
    apply_mode_operator,
    assemble_mode_operator,
)
from .spectral import default_t_max

__all__ = [
    "FunctionalReport",
    "TemperedWalk",
    "dirichlet_form",
    "functional_report",
    "interaction_term",
    "rayleigh_gap",
    "restricted_dirichlet_form",
    "restricted_variance",
    "rho_preset",
    "tempered_walk",
    "tempered_walk_gap",
    "variance",
]


# ── operator plumbing ────────────────────────────────────────────────────────


def _mode_operator(profile: CuspProfile, h: float, k: int,
                   t_max: float | None, n_per_h: int) -> ModeOperator:
    if t_max is None:
        t_max = default_t_max(profile, h)
    grid = GridSpec.for_step(h, t_max, n_per_h)
    return assemble_mode_operator(profile, h, k, grid)


def _walk_measure(op: ModeOperator) -> np.ndarray:
    """Normalized stationary masses nu_i; shared by every mode because the
    normalizers and weights carry no fiber frequency."""
    return op.weights / np.sum(op.weights)


def _check_length(f: np.ndarray, op: ModeOperator) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (op.n,):
        raise ValueError(f"f has shape {f.shape}, grid has {op.n} nodes")
    return f


# ── Dirichlet form ───────────────────────────────────────────────────────────


def _edge_sum(op: ModeOperator, nu: np.ndarray, f: np.ndarray,
              mask: np.ndarray | None = None) -> float:
    """Half double integral sum_{ij} nu_i M_ij (f_i - f_j)^2 / 2, evaluated
    over the band; with a mask, both endpoints are restricted to it.

    Reversibility (nu_i M_ij = nu_j M_ji exactly, by construction of the
    weights) lets the unordered-pair sum run over positive offsets only.
    The diagonal contributes nothing.
    """
    n, d = op.n, op.half_band
    mu_vals = op.profile.mu(op.grid.nodes)
    emu = np.exp(-mu_vals)
    total = 0.0
    for off in range(1, d + 1):
        i = np.arange(0, n - off)
        j = i + off
        alpha = op.alpha_band[d + off, i]
        m_ij = (2.0 * op.sinc_factor(alpha) * alpha * emu[j]
                * op.grid.delta / op.norms[i])
        contrib = nu[i] * m_ij * (f[i] - f[j]) ** 2
        if mask is not None:
            contrib = contrib * (mask[i] & mask[j])
        total += float(np.sum(contrib))
    return total


def dirichlet_form(profile: CuspProfile, h: float, f: np.ndarray, k: int = 0,
                   op: ModeOperator | None = None,
                   t_max: float | None = None, n_per_h: int = 8) -> float:
    """E_h(f) = <(I - K_{h,k}) f, f> in L^2 of the stationary measure.

    Two routes are evaluated on every call: the quadratic form against the
    applied operator, and the edge form (half double integral of (f - f')^2
    over the sub-h pairs) plus the boundary term sum nu_i defect_i f_i^2
    that accounts for band mass falling outside the truncation window (f is
    extended by zero there).  With the full-band normalizers the two are
    the same number in exact arithmetic; a discrepancy beyond 1e-8 means a
    broken assembly and raises instead of returning silently.

    Pass a preassembled ``op`` to skip the grid build; ``profile``, ``h``
    and ``k`` are then taken from it.
    """
    if op is None:
        op = _mode_operator(profile, h, k, t_max, n_per_h)
    f = _check_length(f, op)
    nu = _walk_measure(op)
    quad = float(nu @ (f * (f - apply_mode_operator(op, f))))
    # The boundary term needs this mode's own row sums: for k != 0 the sinc
    # factor shrinks them away from 1 everywhere, not only near the ends.
    defect = 1.0 - apply_mode_operator(op, np.ones(op.n))
    edges = _edge_sum(op, nu, f) + float(np.sum(nu * defect * f * f))
    scale = max(1.0, abs(quad))
    if abs(quad - edges) > 1e-8 * scale:
        raise ArithmeticError(
            f"Dirichlet form routes disagree: {quad:.3e} vs {edges:.3e}")
    return quad


def restricted_dirichlet_form(profile: CuspProfile, h: float, f: np.ndarray,
                              a: float, b: float, k: int = 0,
                              op: ModeOperator | None = None,
                              t_max: float | None = None,
                              n_per_h: int = 8) -> float:
    """Edge form restricted to pairs with both heights in [a, b): the local
    Dirichlet energy of the window, with no boundary term (pairs that leave
    the window are someone else's energy)."""
    if op is None:
        op = _mode_operator(profile, h, k, t_max, n_per_h)
    f = _check_length(f, op)
    nu = _walk_measure(op)
    t = op.grid.nodes
    mask = (t >= a) & (t < b)
    return _edge_sum(op, nu, f, mask)


# ── variance and its splitting ───────────────────────────────────────────────


def variance(profile: CuspProfile, h: float, f: np.ndarray,
             op: ModeOperator | None = None,
             t_max: float | None = None, n_per_h: int = 8) -> float:
    """V_h(f) = ||f||^2 - <f, 1>^2 under the normalized stationary measure.

    Equal to half the double integral of (f - f')^2 d nu d nu by expanding
    the square; the moment form below IS that expansion, and the test suite
    pins it against a brute-force pair sum.
    """
    if op is None:
        op = _mode_operator(profile, h, 0, t_max, n_per_h)
    f = _check_length(f, op)
    nu = _walk_measure(op)
    mean = float(nu @ f)
    return float(nu @ (f * f)) - mean * mean


def _window_moments(nu: np.ndarray, f: np.ndarray,
                    mask: np.ndarray) -> tuple[float, float, float]:
    p = float(np.sum(nu[mask]))
    s1 = float(np.sum(nu[mask] * f[mask]))
    s2 = float(np.sum(nu[mask] * f[mask] ** 2))
    return p, s1, s2


def restricted_variance(profile: CuspProfile, h: float, f: np.ndarray,
                        a: float, b: float,
                        op: ModeOperator | None = None,
                        t_max: float | None = None,
                        n_per_h: int = 8) -> float:
    """Half double integral of (f - f')^2 over pairs with both heights in
    [a, b), unnormalized (no division by the window mass).

    Windows are half-open so that [a, c), [c, b) partition [a, b) exactly;
    the continuum version is indifferent to the endpoint convention, the
    grid is not.  Expanding the square gives p*s2 - s1^2 in the window
    moments, which is what is computed.
    """
    if op is None:
        op = _mode_operator(profile, h, 0, t_max, n_per_h)
    f = _check_length(f, op)
    nu = _walk_measure(op)
    t = op.grid.nodes
    p, s1, s2 = _window_moments(nu, f, (t >= a) & (t < b))
    return p * s2 - s1 * s1


def interaction_term(profile: CuspProfile, h: float, f: np.ndarray,
                     a: float, c: float, b: float,
                     op: ModeOperator | None = None,
                     t_max: float | None = None, n_per_h: int = 8) -> float:
    """Cross term I^c(f): half the (f - f')^2 mass over [a, c) x [c, b)
    pairs.  The exact splitting identity

        V^[a,b) = V^[a,c) + V^[c,b) + 2 I^c

    holds on the grid for any a < c < b because the two windows partition
    the big one; the identity is what the tests assert.
    """
    if op is None:
        op = _mode_operator(profile, h, 0, t_max, n_per_h)
    f = _check_length(f, op)
    nu = _walk_measure(op)
    t = op.grid.nodes
    p_l, s1_l, s2_l = _window_moments(nu, f, (t >= a) & (t < c))
    p_r, s1_r, s2_r = _window_moments(nu, f, (t >= c) & (t < b))
    return 0.5 * (p_r * s2_l + p_l * s2_r) - s1_l * s1_r


@dataclass(frozen=True)
class FunctionalReport:
    """E_h(f), V_h(f), their ratio, and restricted variances per window.

    ``ratio`` is inf for a constant (V = 0, E at defect level); any
    non-constant f gives a finite variational upper bound for 1/g(h) via
    V <= E / g.  ``restricted`` holds one (a, b, V^[a,b)) triple per
    requested window.
    """

    energy: float
    var: float
    ratio: float
    restricted: tuple[tuple[float, float, float], ...] = ()


def functional_report(profile: CuspProfile, h: float, f: np.ndarray,
                      k: int = 0,
                      windows: Sequence[tuple[float, float]] = (),
                      op: ModeOperator | None = None,
                      t_max: float | None = None,
                      n_per_h: int = 8) -> FunctionalReport:
    """Evaluate both functionals and any window restrictions in one pass."""
    if op is None:
        op = _mode_operator(profile, h, k, t_max, n_per_h)
    energy = dirichlet_form(profile, h, f, k, op=op)
    var = variance(profile, h, f, op=op)
    ratio = energy / var if var > 0 else math.inf
    restricted = tuple(
        (float(a), float(b), restricted_variance(profile, h, f, a, b, op=op))
        for a, b in windows
    )
    return FunctionalReport(energy=energy, var=var, ratio=ratio,
                            restricted=restricted)


# ── Rayleigh-quotient gap ────────────────────────────────────────────────────

# Small diagonal shift keeping the banded Cholesky of I - S away from the
# Perron null direction; the block iteration resolves that direction
# explicitly, so the shift only needs to dominate roundoff, not the gap.
_INVIT_SHIFT = 1e-7
_INVIT_TOL = 1e-11
_INVIT_MAX_STEPS = 400


def _smallest_pair(ab_sym: np.ndarray, n_vecs: int,
                   seed_vectors: np.ndarray) -> np.ndarray:
    """Smallest n_vecs eigenvalues of I - S by block inverse iteration.

    ab_sym is the upper banded storage of S.  The iteration solves with the
    Cholesky factorization of (I - S + shift) once and reuses it; Rayleigh
    values of the orthonormalized block converge linearly with ratio
    (shift + theta_j) / (shift + theta_{n_vecs+1}).
    """
    d, n = ab_sym.shape[0] - 1, ab_sym.shape[1]
    ab_a = -ab_sym
    ab_a[d, :] += 1.0 + _INVIT_SHIFT
    # scipy wants the banded matrix in (upper) Cholesky-ready layout, which
    # is exactly the eig_banded layout already in hand.
    factor = scipy.linalg.cholesky_banded(ab_a, lower=False)
    block = np.array(seed_vectors, dtype=float, copy=True)
    theta = np.full(n_vecs, np.inf)
    for _ in range(_INVIT_MAX_STEPS):
        for col in range(n_vecs):
            block[:, col] = scipy.linalg.cho_solve_banded(
                (factor, False), block[:, col])
        block, _ = np.linalg.qr(block)
        new_theta = np.empty(n_vecs)
        for col in range(n_vecs):
            v = block[:, col]
            sv = _banded_symmetric_matvec(ab_sym, v)
            new_theta[col] = float(v @ v - v @ sv)
        order = np.argsort(new_theta)
        new_theta = new_theta[order]
        block = block[:, order]
        if np.all(np.abs(new_theta - theta) <= _INVIT_TOL
                  * np.maximum(1e-3, np.abs(new_theta))):
            theta = new_theta
            break
        theta = new_theta
    return theta


def _banded_symmetric_matvec(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    """y = S v from the upper banded storage ab[d - off, j] = S[j - off, j]."""
    d, n = ab.shape[0] - 1, ab.shape[1]
    out = ab[d, :] * v
    for off in range(1, d + 1):
        j = np.arange(off, n)
        band = ab[d - off, j]
        out[j - off] += band * v[j]
        out[j] += band * v[j - off]
    return out


def rayleigh_gap(profile: CuspProfile, h: float, k_max: int = 8,
                 t_max: float | None = None, n_per_h: int = 8) -> float:
    """The gap as the infimum of E_h(f) / V_h(f) over non-constant f.

    Minimizing the Rayleigh quotient of I - S over the complement of the
    Perron direction is performed by block inverse iteration: for k = 0 a
    two-column block whose first column converges to the Perron vector
    (Rayleigh value at the boundary-defect level) and whose second delivers
    1 - lambda_2; for k != 0 a single column gives 1 - lambda_top.  No
    eigendecomposition is invoked anywhere, so the number is an independent
    check of the spectral route.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    base = _mode_operator(profile, h, 0, t_max, n_per_h)
    rng = np.random.default_rng(7)
    best = math.inf
    for k in range(k_max + 1):
        op = base if k == 0 else dataclasses.replace(base, k=k)
        ab = op.symmetric_banded()
        n = op.n
        if k == 0:
            seeds = np.column_stack([
                np.sqrt(op.weights / np.sum(op.weights)),
                rng.standard_normal(n),
            ])
            theta = _smallest_pair(ab, 2, seeds)
            value = float(theta[1])
        else:
            seeds = rng.standard_normal((n, 1))
            theta = _smallest_pair(ab, 1, seeds)
            value = float(theta[0])
        best = min(best, value)
    return best


# ── tempered one-dimensional walks ───────────────────────────────────────────


def _quintic_log_bridge(x0: float, x1: float,
                        left: tuple[float, float, float],
                        right: tuple[float, float, float]) -> np.ndarray:
    """Coefficients (ascending) of the degree-5 polynomial matching value,
    slope, and curvature at both ends; the C^2 join for log rho."""
    rows = []
    rhs = []
    for x, (v, s, c) in ((x0, left), (x1, right)):
        powers = x ** np.arange(6, dtype=float)
        rows.append(powers)
        rhs.append(v)
        d1 = np.zeros(6)
        d1[1:] = np.arange(1, 6) * x ** np.arange(5, dtype=float)
        rows.append(d1)
        rhs.append(s)
        d2 = np.zeros(6)
        d2[2:] = (np.arange(2, 6) * np.arange(1, 5)
                  * x ** np.arange(4, dtype=float))
        rows.append(d2)
        rhs.append(c)
    return np.linalg.solve(np.array(rows), np.array(rhs))


def _bridged_exp_rho(decay: float, x0: float, x1: float) -> Callable[[np.ndarray], np.ndarray]:
    """rho equal to e^{decay * t} left of x0 and e^{-decay * t} right of x1,
    with a C^2 bridge of log rho on [x0, x1]."""
    coeffs = _quintic_log_bridge(
        x0, x1,
        (decay * x0, decay, 0.0),
        (-decay * x1, -decay, 0.0),
    )
    poly = np.polynomial.Polynomial(coeffs)

    def rho(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        log_rho = np.where(t <= x0, decay * t, -decay * t)
        in_bridge = (t > x0) & (t < x1)
        if np.any(in_bridge):
            log_rho = np.where(in_bridge, poly(t), log_rho)
        return np.exp(log_rho)

    return rho


def rho_preset(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Reference densities for the tempered walks.

    'exp-abs'  : e^{-|t|} made C^2 by bridging between the e^{t} branch
                 (left of -2) and the e^{-t} branch (right of -1).
    'exp-half' : e^{-|t|/2} with the bridge on [-1, 0].
    'box'      : the constant density 1 (walk on a finite interval).
    """
    if name == "exp-abs":
        return _bridged_exp_rho(1.0, -2.0, -1.0)
    if name == "exp-half":
        return _bridged_exp_rho(0.5, -1.0, 0.0)
    if name == "box":
        return lambda t: np.ones_like(np.asarray(t, dtype=float))
    raise ValueError(f"unknown rho preset {name!r}")


@dataclass(frozen=True)
class TemperedWalk:
    """One-dimensional walk with kernel rho(t') dt' / rho([t-h, t+h]).

    rho_hat[i] is the discrete window mass sum_{|t_j - t_i| <= h} rho_j
    delta, clipped at the interval ends, which makes every row of the
    kernel sum to exactly one (the walk reflects off the truncation the way
    a Neumann condition would).  Detailed balance nu_i K_ij = nu_j K_ji is
    then exact for nu_i = rho_hat_i rho_i delta, so the weighted kernel
    symmetrizes with no error budget at all.
    """

    rho_name: str
    h: float
    grid: GridSpec
    half_band: int
    rho_values: np.ndarray = field(repr=False)
    rho_hat: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def normalizer(self) -> float:
        """Z: total mass of the unnormalized stationary measure."""
        return float(np.sum(self.rho_hat * self.rho_values) * self.grid.delta)

    @property
    def masses(self) -> np.ndarray:
        nu = self.rho_hat * self.rho_values * self.grid.delta
        return nu / np.sum(nu)

    def dense(self) -> np.ndarray:
        n, d = self.n, self.half_band
        out = np.zeros((n, n))
        for off in range(-d, d + 1):
            i = np.arange(max(0, -off), min(n, n - off))
            j = i + off
            out[i, j] = self.rho_values[j] * self.grid.delta / self.rho_hat[i]
        return out

    def symmetric_banded(self) -> np.ndarray:
        """Upper banded storage of D^{1/2} K D^{-1/2}, D = diag(masses)."""
        n, d = self.n, self.half_band
        sqrt_r = np.sqrt(self.rho_values)
        sqrt_hat = np.sqrt(self.rho_hat)
        ab = np.zeros((d + 1, n))
        for off in range(d + 1):
            j = np.arange(off, n)
            i = j - off
            ab[d - off, j] = (self.grid.delta * sqrt_r[i] * sqrt_r[j]
                              / (sqrt_hat[i] * sqrt_hat[j]))
        return ab

    def top_two(self) -> tuple[float, float]:
        ab = self.symmetric_banded()
        vals = scipy.linalg.eigvals_banded(
            ab, lower=False, select="i", select_range=(self.n - 2, self.n - 1))
        return float(vals[1]), float(vals[0])

    @property
    def gap(self) -> float:
        top, second = self.top_two()
        if abs(top - 1.0) > 1e-10:
            raise ArithmeticError(
                f"stochastic top eigenvalue off unity by {top - 1.0:.2e}")
        return 1.0 - second


def tempered_walk(rho_spec: str | Callable[[np.ndarray], np.ndarray],
                  h: float,
                  span: tuple[float, float] | None = None,
                  n_per_h: int = 8) -> TemperedWalk:
    """Assemble the tempered walk for a preset name or a custom density.

    The default span is [-24, 24] for the decaying presets (tail mass below
    every tolerance in play) and [0, 1] for the box.  Custom densities must
    be positive on the span.
    """
    if callable(rho_spec):
        rho, name = rho_spec, getattr(rho_spec, "__name__", "custom")
    else:
        rho, name = rho_preset(rho_spec), rho_spec
    if span is None:
        span = (0.0, 1.0) if name == "box" else (-24.0, 24.0)
    delta = h / n_per_h
    n_cells = int(math.ceil((span[1] - span[0]) / delta - 1e-9))
    grid = GridSpec(span[0], span[0] + n_cells * delta, delta)
    rho_values = np.asarray(rho(grid.nodes), dtype=float)
    if np.any(rho_values <= 0) or not np.all(np.isfinite(rho_values)):
        raise ValueError("rho must be positive and finite on the span")
    d = n_per_h
    kernel_row = rho_values * delta
    cumulative = np.concatenate([[0.0], np.cumsum(kernel_row)])
    idx = np.arange(grid.n)
    lo = np.maximum(idx - d, 0)
    hi = np.minimum(idx + d, grid.n - 1)
    rho_hat = cumulative[hi + 1] - cumulative[lo]
    return TemperedWalk(rho_name=name, h=h, grid=grid, half_band=d,
                        rho_values=rho_values, rho_hat=rho_hat)


def tempered_walk_gap(rho_spec: str | Callable[[np.ndarray], np.ndarray],
                      h: float,
                      span: tuple[float, float] | None = None,
                      n_per_h: int = 8) -> float:
    """Spectral gap 1 - lambda_2 of the tempered walk for this density."""
    return tempered_walk(rho_spec, h, span, n_per_h).gap
