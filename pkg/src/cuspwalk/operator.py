"""Discretized h-step ball-walk operators, one circle mode at a time.

The walk averages a function over geodesic balls of radius h.  Expanding in
circle modes e^{2 pi i k y / l} turns the surface operator into a family of
one-dimensional integral operators K_{h,k} acting on functions of the height
t alone, with kernel

    K_{h,k} f(t) = (1 / b(t)) * integral over |t'-t| <= h of
                   2 sinc(2 k alpha / l) alpha_h(t, t') e^{-mu(t')} f(t') dt'

where b(t) normalizes so that the k = 0 row integrates to one.  This module
builds the Nystrom discretization of that family on a uniform midpoint grid,
with the normalizer evaluated by the same midpoint rule over the full band
(off-grid columns included).  That discrete choice keeps the matrix family
exactly compatible: interior rows of the k = 0 matrix sum to one at machine
precision, the grid stationary measure is exactly invariant, and the
similarity-symmetrized matrix is exactly symmetric, so downstream identities
(Dirichlet forms, variance splittings) hold to rounding rather than to
quadrature accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from cuspwalk.geometry import CuspProfile, _half_width_uncapped

__all__ = [
    "GridSpec",
    "ModeOperator",
    "StationaryMeasure",
    "assemble_mode_operator",
    "apply_mode_operator",
    "symbol_sigma",
    "stationary_measure",
    "h1_smoothing_norm",
]


# ── grid ─────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class GridSpec:
    """Uniform midpoint grid on [t_min, t_max] with spacing delta.

    Nodes sit at t_i = t_min + (i + 1/2) delta, i = 0 .. n-1, so no node ever
    lands exactly on a band edge or on the blend boundary.  delta should
    divide the band h into an integer number of cells (n_per_h) so that the
    band structure of the kernel matrix is exact.
    """

    t_min: float
    t_max: float
    delta: float
    nodes: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        n = int(round((self.t_max - self.t_min) / self.delta))
        if abs(n * self.delta - (self.t_max - self.t_min)) > 1e-9 * self.delta:
            raise ValueError("delta must divide t_max - t_min")
        nodes = self.t_min + (np.arange(n) + 0.5) * self.delta
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @classmethod
    def symmetric(cls, t_max: float, delta: float) -> "GridSpec":
        return cls(-t_max, t_max, delta)

    @classmethod
    def for_step(cls, h: float, t_max: float, n_per_h: int = 8) -> "GridSpec":
        """Grid whose spacing is h / n_per_h, rounded so the band width is an
        exact cell multiple, symmetric about the neck."""
        delta = h / n_per_h
        n_half = int(math.ceil(t_max / delta))
        return cls(-n_half * delta, n_half * delta, delta)


# ── assembled operator ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class ModeOperator:
    """One discretized mode operator K_{h,k} and its symmetrization.

    Attributes
    ----------
    profile, h, k, grid : the defining data.
    half_band : integer d with matrix bandwidth 2d+1 (entries vanish for
        |i-j| > d, exactly, because alpha_h(t, t') = 0 past the band).
    alpha_band : (2d+1, n) array, alpha_band[d + (j - i), i] = alpha(t_i, t_j),
        capped at l/2.
    norms : the discrete normalizers b_i (midpoint sums over the full band,
        including virtual columns outside the grid).
    row_defect : 1 - (row sum of the k=0 matrix restricted to the grid); zero
        for interior rows, positive within h of the grid ends.
    weights : w_i = b_i e^{-mu(t_i)} delta, the discrete stationary weights;
        conjugating by sqrt(w) symmetrizes every mode matrix at once.
    """

    profile: CuspProfile
    h: float
    k: int
    grid: GridSpec
    half_band: int
    alpha_band: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    row_defect: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def sinc_factor(self, alpha: np.ndarray) -> np.ndarray:
        """sin(2 pi k alpha / l) / (2 pi k alpha / l), the circle-average of
        mode k over a fiber of half-width alpha; 1 when k = 0."""
        if self.k == 0:
            return np.ones_like(alpha)
        return np.sinc(2.0 * self.k * alpha / self.profile.ell)

    def dense(self) -> np.ndarray:
        """The full n x n mode matrix M (row-stochastic up to boundary defect
        when k = 0).  Prefer the banded/apply paths for large grids."""
        n, d = self.n, self.half_band
        mu_vals = self.profile.mu(self.grid.nodes)
        out = np.zeros((n, n))
        for off in range(-d, d + 1):
            i = np.arange(max(0, -off), min(n, n - off))
            j = i + off
            alpha = self.alpha_band[d + off, i]
            out[i, j] = (
                2.0 * self.sinc_factor(alpha) * alpha
                * np.exp(-mu_vals[j]) * self.grid.delta / self.norms[i]
            )
        return out

    def symmetric_dense(self) -> np.ndarray:
        """S = D^{1/2} M D^{-1/2} with D = diag(weights); exactly symmetric."""
        w = self.weights
        return self.dense() * np.sqrt(w)[:, None] / np.sqrt(w)[None, :]

    def symmetric_banded(self) -> np.ndarray:
        """Upper banded storage of S for scipy.linalg.eig_banded:
        ab[d - off, j] = S[j - off, j] for off = 0 .. d."""
        n, d = self.n, self.half_band
        mu_vals = self.profile.mu(self.grid.nodes)
        half_mu = np.exp(-0.5 * mu_vals)
        sqrt_b = np.sqrt(self.norms)
        ab = np.zeros((d + 1, n))
        for off in range(d + 1):
            j = np.arange(off, n)
            i = j - off
            alpha = self.alpha_band[d + off, i]
            ab[d - off, j] = (
                2.0 * self.grid.delta * self.sinc_factor(alpha) * alpha
                * half_mu[i] * half_mu[j] / (sqrt_b[i] * sqrt_b[j])
            )
        return ab

    def to_triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, values) of the nonzero entries of M, for export."""
        coo = scipy.sparse.coo_matrix(self.dense())
        return coo.row, coo.col, coo.data


def _band_alpha(profile: CuspProfile, h: float, nodes: np.ndarray, d: int) -> np.ndarray:
    """alpha(t_i, t_j) for all grid pairs with |i - j| <= d, capped at l/2.

    All blend-region pairs across every diagonal are gathered into a single
    vectorized shooting call (the dominant cost); exact-cusp pairs use the
    closed form.  The t_j may extend past the stored grid (virtual columns)
    when the caller needs the full-band normalizer near the ends.
    """
    from cuspwalk.geometry import _closed_form_mask, _half_width_cusp, _half_width_shoot

    n = len(nodes)
    delta = nodes[1] - nodes[0] if n > 1 else h
    band = np.zeros((2 * d + 1, n))
    shoot_rows, shoot_ti, shoot_tj = [], [], []
    for off in range(-d, d + 1):
        if abs(off) * delta > h:
            continue
        tj = nodes + off * delta
        cusp = _closed_form_mask(profile, nodes, tj)
        band[d + off, cusp] = _half_width_cusp(
            np.abs(nodes[cusp]), np.abs(tj[cusp]), h
        )
        rest = np.nonzero(~cusp)[0]
        if len(rest):
            shoot_rows.append(np.full(len(rest), d + off))
            shoot_ti.append(rest)
            shoot_tj.append(tj[rest])
    if shoot_rows:
        rows = np.concatenate(shoot_rows)
        cols = np.concatenate(shoot_ti)
        tj = np.concatenate(shoot_tj)
        band[rows, cols] = _half_width_shoot(profile, nodes[cols], tj, h)
    return np.minimum(band, profile.ell / 2.0)


def assemble_mode_operator(profile: CuspProfile, h: float, k: int,
                           grid: GridSpec) -> ModeOperator:
    """Build the discretized mode operator K_{h,k} on the given grid.

    The normalizer b_i is the midpoint-rule integral of the k = 0 kernel row
    over the whole band [t_i - h, t_i + h], including columns that fall
    outside [t_min, t_max]; row_defect records how much of each row the grid
    truncation discards (nonzero only within h of the ends).
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if k < 0:
        raise ValueError(f"mode index must be >= 0, got {k}")
    delta = grid.delta
    d = int(math.floor(h / delta + 1e-9))
    if abs(d * delta - h) > 1e-9 * h:
        raise ValueError("grid spacing must divide h exactly")
    # extended node set covers every virtual column the band can touch
    ext = np.concatenate(
        [grid.nodes[0] + np.arange(-d, 0) * delta, grid.nodes,
         grid.nodes[-1] + np.arange(1, d + 1) * delta]
    )
    band_ext = _band_alpha(profile, h, ext, d)
    mu_ext = profile.mu(ext)
    n = grid.n
    # b_i = sum over the full band of 2 alpha(t_i, t_j) e^{-mu(t_j)} delta
    norms_ext = np.zeros(len(ext))
    for off in range(-d, d + 1):
        i = np.arange(max(0, -off), len(ext) - max(0, off))
        j = i + off
        norms_ext[i] += 2.0 * band_ext[d + off, i] * np.exp(-mu_ext[j]) * delta
    norms = norms_ext[d:d + n]
    alpha_band = band_ext[:, d:d + n]
    # row sums restricted to the stored grid, for the boundary defect
    grid_sum = np.zeros(n)
    mu_nodes = mu_ext[d:d + n]
    for off in range(-d, d + 1):
        i = np.arange(max(0, -off), min(n, n - off))
        j = i + off
        grid_sum[i] += 2.0 * alpha_band[d + off, i] * np.exp(-mu_nodes[j]) * delta
    row_defect = 1.0 - grid_sum / norms
    weights = norms * np.exp(-mu_nodes) * delta
    return ModeOperator(
        profile=profile, h=h, k=k, grid=grid, half_band=d,
        alpha_band=alpha_band, norms=norms,
        row_defect=row_defect, weights=weights,
    )


def apply_mode_operator(op: ModeOperator, f: np.ndarray) -> np.ndarray:
    """Matrix-free action M f via shifted adds over the 2d+1 diagonals.

    Cost O(n d); used by the Krylov eigensolver and the smoothing norm, and
    it is the reference action for everything that never materializes M.
    """
    f = np.asarray(f)
    n, d = op.n, op.half_band
    mu_vals = op.profile.mu(op.grid.nodes)
    emu = np.exp(-mu_vals)
    out = np.zeros(n, dtype=f.dtype)
    for off in range(-d, d + 1):
        i = np.arange(max(0, -off), min(n, n - off))
        j = i + off
        alpha = op.alpha_band[d + off, i]
        out[i] += 2.0 * op.sinc_factor(alpha) * alpha * emu[j] * f[j] * op.grid.delta
    return out / op.norms


# ── exact flat symbol ────────────────────────────────────────────────────────


def symbol_sigma(h: float, z, xi):
    """Exact symbol of the unnormalized h-ball average on the exact cusp.

    For a ball walk deep in a cusp, conjugating by the half-density e^{-t/2}
    and Fourier-transforming in log-depth turns the averaging kernel into
    multiplication by

        sigma(z, xi) = [c_+^{1+i xi} - c_-^{1+i xi}]
                       / [(1+i xi) (1+z^2)^{(1+i xi)/2}],
        c_+- = cosh h +- sqrt(sinh^2 h - z^2),

    where z parametrizes the transverse frequency within |z| <= sinh h and
    xi the log-radial frequency.  Key values: sigma(0, 0) = 2 sinh h (the
    bare band mass) and sigma(+-sinh h, xi) = 0 (the two roots c_+- merge).
    Normalizing by the row mass sigma(z, 0) gives the walk's essential band:
    its endpoints come from xi = 0 and from the minimum of sin over its
    argument.  Vectorized in z and xi.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) > math.sinh(h) * (1 + 1e-12)):
        raise ValueError("z outside [-sinh h, sinh h]")
    z_c = np.asarray(z, dtype=complex)
    xi_c = np.asarray(xi, dtype=complex)
    root = np.sqrt(np.sinh(h) ** 2 - z_c * z_c)
    c_plus = np.cosh(h) + root
    c_minus = np.cosh(h) - root
    expo = 1.0 + 1j * xi_c
    num = c_plus**expo - c_minus**expo
    den = expo * (1.0 + z_c * z_c) ** (expo / 2.0)
    out = num / den
    return out if out.ndim else complex(out)


# ── stationary measure ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class StationaryMeasure:
    """Discrete invariant measure of the k = 0 walk matrix.

    masses[i] is proportional to b_i e^{-mu(t_i)} delta (normalizer times
    Riemannian fiber mass), normalized to total one over the grid.  nu M = nu
    holds exactly in the grid interior because the symmetrizer weights are
    the same product.
    """

    grid: GridSpec
    masses: np.ndarray = field(repr=False)
    densities: np.ndarray = field(repr=False)

    def total(self) -> float:
        return float(np.sum(self.masses))


def stationary_measure(op: ModeOperator) -> StationaryMeasure:
    """Invariant measure of the k = 0 mode matrix, from the symmetrizer
    weights w_i = b_i e^{-mu_i} delta, normalized to unit total mass."""
    masses = op.weights / np.sum(op.weights)
    densities = masses / op.grid.delta
    return StationaryMeasure(grid=op.grid, masses=masses, densities=densities)


# ── smoothing norm ───────────────────────────────────────────────────────────


def h1_smoothing_norm(op: ModeOperator) -> float:
    """Operator norm of grad o K_{h,k} from L^2(W) to L^2(W), discretized.

    The gradient on mode k has a height part d/dt (centered differences on
    the grid) and a fiber part (2 pi k / l) e^{mu(t)}.  Both composites are
    measured in the geometry's L^2 inner product <f, g> = sum f g e^{-mu}
    delta, by conjugating with the square root of the mass and taking the
    top singular value.  Expected to scale like 1/h as the ball shrinks.
    """
    mass = np.exp(-op.profile.mu(op.grid.nodes)) * op.grid.delta
    root = np.sqrt(mass)
    n = op.n
    delta = op.grid.delta
    fiber = None
    if op.k != 0:
        fiber = (2.0 * math.pi * op.k / op.profile.ell) * np.exp(
            op.profile.mu(op.grid.nodes)
        )

    def mat_vec(v):
        v = np.asarray(v).reshape(-1)
        f = apply_mode_operator(op, v / root)
        g_height = np.zeros(n)
        g_height[1:-1] = (f[2:] - f[:-2]) / (2.0 * delta)
        g_height[0] = (f[1] - f[0]) / delta
        g_height[-1] = (f[-1] - f[-2]) / delta
        pieces = [g_height * root]
        if fiber is not None:
            pieces.append(fiber * f * root)
        return np.concatenate(pieces)

    m_rows = n * (2 if op.k != 0 else 1)
    lin = scipy.sparse.linalg.LinearOperator(
        (m_rows, n),
        matvec=mat_vec,
        rmatvec=lambda u: _rmatvec(op, u, root, delta),
    )
    s = scipy.sparse.linalg.svds(
        lin, k=1, return_singular_vectors=False, maxiter=5000, tol=1e-10,
        v0=np.sin(np.linspace(0.3, 2.8, n)),
    )
    return float(s[0])


def _rmatvec(op: ModeOperator, u: np.ndarray, root: np.ndarray, delta: float) -> np.ndarray:
    """Adjoint action for the smoothing-norm singular solve."""
    n = op.n
    u = np.asarray(u).reshape(-1)
    u1 = u[:n] * root
    # adjoint of the centered-difference stencil used above
    g = np.zeros(n)
    g[2:] += u1[1:-1] / (2.0 * delta)
    g[:-2] -= u1[1:-1] / (2.0 * delta)
    g[1] += u1[0] / delta
    g[0] -= u1[0] / delta
    g[-1] += u1[-1] / delta
    g[-2] -= u1[-1] / delta
    if op.k != 0:
        fiber = (2.0 * math.pi * op.k / op.profile.ell) * np.exp(
            op.profile.mu(op.grid.nodes)
        )
        g += fiber * (u[n:] * root)
    # adjoint of M in the plain dot product, then the final 1/root
    mt = _apply_transpose(op, g)
    return mt / root


def _apply_transpose(op: ModeOperator, f: np.ndarray) -> np.ndarray:
    """Action of M^T via the same shifted-add pattern."""
    n, d = op.n, op.half_band
    mu_vals = op.profile.mu(op.grid.nodes)
    emu = np.exp(-mu_vals)
    out = np.zeros(n, dtype=np.asarray(f).dtype)
    scaled = np.asarray(f) / op.norms
    for off in range(-d, d + 1):
        i = np.arange(max(0, -off), min(n, n - off))
        j = i + off
        alpha = op.alpha_band[d + off, i]
        out[j] += 2.0 * op.sinc_factor(alpha) * alpha * emu[j] * scaled[i] * op.grid.delta
    return out
