"""The release checklist: ten numbered checks, each exercising the toolkit
at its advertised scale and returning a verdict with the measured numbers.

The CLI ``check`` command and the acceptance test suite both run these
functions, so the shipped gate and the tested gate cannot drift apart.
Checks that have a canonical experiment run it through the ordinary
config/manifest pipeline (into a scratch directory by default) and judge
the fitted constants; the identity suite in check 10 computes directly.

Thresholds are brackets and slope windows, not literal constants: the
statements being verified are asymptotic with unspecified constants, so
acceptance means "the fitted number lands where the theory puts it".
"""

from __future__ import annotations

import dataclasses
import math
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy.integrate
import scipy.stats

from . import montecarlo
from .config import ExperimentConfig
from .experiments import RunManifest, run_config
from .functionals import (
    dirichlet_form,
    interaction_term,
    restricted_variance,
)
from .geometry import CuspProfile, ball_volume
from .operator import GridSpec, assemble_mode_operator, symbol_sigma
from .spectral import weyl_residual

__all__ = ["CheckResult", "run_check", "run_checklist", "CHECK_NAMES"]


@dataclasses.dataclass(frozen=True)
class CheckResult:
    """Verdict of one checklist item."""

    number: int
    name: str
    passed: bool
    details: str


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _run(name: str, out_root: Path, threads: int) -> RunManifest:
    return run_config(ExperimentConfig(experiment=name), out_root=out_root,
                      threads=threads)


# ── 1: essential-band occupancy ──────────────────────────────────────────────

_OCCUPANCY_RANGE = (1.6, 2.4)


def check_band_occupancy(out_root: Path, threads: int = 1) -> CheckResult:
    """Doubling the truncation doubles the in-band count and leaves the
    above-band count alone: the band is filled by discretized continuous
    spectrum, the top by truncation-stable eigenvalues."""
    fitted = _run("ess-spectrum", out_root, threads).fitted
    ratio = fitted["inside_growth_ratio"]
    above = fitted["above_difference"]
    ok = _OCCUPANCY_RANGE[0] <= ratio <= _OCCUPANCY_RANGE[1] and above == 0.0
    details = (f"in-band growth {_fmt(ratio)} in "
               f"[{_OCCUPANCY_RANGE[0]}, {_OCCUPANCY_RANGE[1]}], "
               f"above-band count change {above:+.0f}")
    return CheckResult(1, "band-occupancy", ok, details)


# ── 2: gap bracketing ────────────────────────────────────────────────────────

_GAP_SLOPE_RANGE = (1.8, 2.2)
_GAP_BAND_FACTOR = 3.0


def check_gap_bracketing(out_root: Path, threads: int = 1) -> CheckResult:
    """g(h) stays inside its theoretical bracket: below the flat-band
    endpoint (plus discretization tolerance), h^2-small from above and
    below with one constant across the scan."""
    fitted = _run("gap-scan", out_root, threads).fitted
    ok = (
        _GAP_SLOPE_RANGE[0] <= fitted["slope"] <= _GAP_SLOPE_RANGE[1]
        and fitted["band_factor"] <= _GAP_BAND_FACTOR
        and fitted["upper_margin"] >= 0.0
    )
    details = (f"slope {_fmt(fitted['slope'])} in "
               f"[{_GAP_SLOPE_RANGE[0]}, {_GAP_SLOPE_RANGE[1]}], "
               f"g/h^2 spread {_fmt(fitted['band_factor'])} <= "
               f"{_GAP_BAND_FACTOR:g}, "
               f"upper-bound margin {_fmt(fitted['upper_margin'])} >= 0")
    return CheckResult(2, "gap-bracketing", ok, details)


# ── 3: bottom of the spectrum ────────────────────────────────────────────────

_BOTTOM_FLOOR = -0.9


def check_spectrum_bottom(out_root: Path, threads: int = 1) -> CheckResult:
    """No spectrum near -1 for any tested mode: the walk cannot oscillate
    at full strength, so a uniform delta > 0 keeps [-1, -1+delta] empty."""
    fitted = _run("bottom-check", out_root, threads).fitted
    ok = fitted["min_eig"] >= _BOTTOM_FLOOR
    details = (f"minimum eigenvalue {_fmt(fitted['min_eig'])} >= "
               f"{_BOTTOM_FLOOR}")
    return CheckResult(3, "spectrum-bottom", ok, details)


# ── 4: mode contraction ──────────────────────────────────────────────────────


def check_mode_contraction(out_root: Path, threads: int = 1) -> CheckResult:
    """Every nonzero mode contracts by at least epsilon h^2, and the deep
    restricted norms improve monotonically in depth and in frequency."""
    fitted = _run("contraction", out_root, threads).fitted
    ok = fitted["epsilon"] > 0.0 and fitted["ordering_margin"] >= -1e-10
    details = (f"fitted epsilon {_fmt(fitted['epsilon'])} > 0, "
               f"restricted-norm ordering margin "
               f"{_fmt(fitted['ordering_margin'])} >= -1e-10")
    return CheckResult(4, "mode-contraction", ok, details)


# ── 5: quasimode localization ────────────────────────────────────────────────

_QUASIMODE_SLOPE_TOL = 0.5
_LAMBDA_METHOD_TOL = 1e-5
_DISTANCE_RATIO_CAP = 0.05


def check_quasimode_localization(out_root: Path,
                                 threads: int = 1) -> CheckResult:
    """Laplace eigenfunctions are order-h^2 quasimodes of the walk: the
    residual decays at the predicted order and a true eigenvalue sits far
    inside its own gap around 1 - lambda h^2 / 8."""
    fitted = _run("quasimode", out_root, threads).fitted
    slope_errs = [abs(fitted[f"residual_slope_k{k}"]
                      - fitted[f"expected_order_k{k}"]) for k in (1, 2)]
    ok = (
        max(slope_errs) <= _QUASIMODE_SLOPE_TOL
        and fitted["method_agreement"] <= _LAMBDA_METHOD_TOL
        and fitted["max_distance_ratio"] <= _DISTANCE_RATIO_CAP
    )
    details = (f"residual slopes "
               f"{_fmt(fitted['residual_slope_k1'])}/"
               f"{_fmt(fitted['residual_slope_k2'])} within "
               f"{_QUASIMODE_SLOPE_TOL} of expected "
               f"{_fmt(fitted['expected_order_k1'])}/"
               f"{_fmt(fitted['expected_order_k2'])}, "
               f"solver agreement {_fmt(fitted['method_agreement'])} <= "
               f"{_LAMBDA_METHOD_TOL:g}, "
               f"eigenvalue distance {_fmt(fitted['max_distance_ratio'])} h^2")
    return CheckResult(5, "quasimode-localization", ok, details)


# ── 6: smoothing ─────────────────────────────────────────────────────────────

_SMOOTHING_SLOPE_RANGE = (-1.3, -0.7)


def check_smoothing_rate(out_root: Path, threads: int = 1) -> CheckResult:
    """One walk step lands in H^1 with norm growing like 1/h."""
    fitted = _run("smoothing", out_root, threads).fitted
    slopes = [fitted["slope_k0"], fitted["slope_k1"]]
    ok = all(_SMOOTHING_SLOPE_RANGE[0] <= s <= _SMOOTHING_SLOPE_RANGE[1]
             for s in slopes)
    details = (f"H^1 norm slopes {_fmt(slopes[0])}, {_fmt(slopes[1])} in "
               f"[{_SMOOTHING_SLOPE_RANGE[0]}, {_SMOOTHING_SLOPE_RANGE[1]}]")
    return CheckResult(6, "smoothing-rate", ok, details)


# ── 7: TV decay at the spectral rate ─────────────────────────────────────────

_RATE_RATIO_RANGE = (0.9, 1.1)
_DOMINATION_CAP = 10.0
_TV_RUNTIME_CAP = 600.0


def check_tv_decay(out_root: Path, threads: int = 1) -> CheckResult:
    """Mixing happens at the spectral gap rate: the deterministic evolution
    decays within 10% of g(h), and the sampled TV curve never escapes a
    modest multiple of e^{-n g} plus noise."""
    t_start = time.monotonic()
    fitted = _run("tv-decay", out_root, threads).fitted
    elapsed = time.monotonic() - t_start
    ok = (
        _RATE_RATIO_RANGE[0] <= fitted["rate_ratio"] <= _RATE_RATIO_RANGE[1]
        and fitted["domination_prefactor"] <= _DOMINATION_CAP
        and elapsed <= _TV_RUNTIME_CAP
    )
    details = (f"deterministic rate / g = {_fmt(fitted['rate_ratio'])} in "
               f"[{_RATE_RATIO_RANGE[0]}, {_RATE_RATIO_RANGE[1]}], "
               f"domination prefactor {_fmt(fitted['domination_prefactor'])} "
               f"<= {_DOMINATION_CAP:g}, runtime {elapsed:.0f}s")
    return CheckResult(7, "tv-decay", ok, details)


# ── 8: escape lower bound ────────────────────────────────────────────────────

_ESCAPE_FLOOR = 0.9


def check_escape_bound(out_root: Path, threads: int = 1) -> CheckResult:
    """A walk started deep in the cusp is still close to a point mass in TV
    after n steps: it cannot outrun its own step size."""
    fitted = _run("escape", out_root, threads).fitted
    ok = fitted["bound_final"] >= _ESCAPE_FLOOR
    details = (f"TV lower bound {_fmt(fitted['bound_final'])} >= "
               f"{_ESCAPE_FLOOR} after {fitted['n_final']:.0f} steps")
    return CheckResult(8, "escape-bound", ok, details)


# ── 9: tempered one-dimensional gaps ─────────────────────────────────────────

_TEMPERED_SLOPE_RANGE = (1.7, 2.3)


def check_tempered_gaps(out_root: Path, threads: int = 1) -> CheckResult:
    """The one-dimensional reduction walks have h^2 gaps with positive
    constants for both exponential reference densities."""
    fitted = _run("tempered-gap", out_root, threads).fitted
    slopes = [fitted["slope_exp_abs"], fitted["slope_exp_half"]]
    cs = [fitted["c_exp_abs"], fitted["c_exp_half"]]
    ok = all(_TEMPERED_SLOPE_RANGE[0] <= s <= _TEMPERED_SLOPE_RANGE[1]
             for s in slopes) and all(c > 0.0 for c in cs)
    details = (f"gap slopes {_fmt(slopes[0])}, {_fmt(slopes[1])} in "
               f"[{_TEMPERED_SLOPE_RANGE[0]}, {_TEMPERED_SLOPE_RANGE[1]}], "
               f"constants {_fmt(cs[0])}, {_fmt(cs[1])} > 0")
    return CheckResult(9, "tempered-gaps", ok, details)


# ── 10: oracle and identity suite ────────────────────────────────────────────

_SYMBOL_TOL = 1e-8
_VOLUME_RTOL = 1e-6
_SPLIT_TOL = 1e-10
_CHI2_P_FLOOR = 1e-3
_WEYL_SLOPE_RANGE = (-0.75, -0.25)
_IDENTITY_SEED = 20240817


def _symbol_error(h: float, n_samples: int, rng: np.random.Generator) -> float:
    """Worst reconciliation error between the closed-form symbol and direct
    quadrature of its defining integral: with c_+ c_- = 1 + z^2,

        integral of e^{i T xi} e^{-T} over [t_-(z), t_+(z)]
            = sigma(z, -xi) * (1 + z^2)^{(i xi - 1)/2}.
    """
    worst = 0.0
    for _ in range(n_samples):
        z = (2.0 * rng.random() - 1.0) * math.sinh(h)
        xi = (2.0 * rng.random() - 1.0) * 5.0
        root = math.sqrt(math.sinh(h) ** 2 - z * z)
        t_lo = math.log(math.cosh(h) - root)
        t_hi = math.log(math.cosh(h) + root)
        re, _err = scipy.integrate.quad(
            lambda t: math.exp(-t) * math.cos(xi * t), t_lo, t_hi,
            epsabs=1e-12)
        im, _err = scipy.integrate.quad(
            lambda t: math.exp(-t) * math.sin(xi * t), t_lo, t_hi,
            epsabs=1e-12)
        closed = symbol_sigma(h, z, -xi) * (1.0 + z * z) ** ((1j * xi - 1) / 2.0)
        worst = max(worst, abs(complex(re, im) - closed))
    return worst


def _volume_error(profile: CuspProfile, h: float, heights) -> float:
    """Worst relative gap between ball_volume and the transverse-frequency
    form of the wrapped ball volume, valid once the ball wraps the fiber."""
    worst = 0.0
    s2 = math.sinh(h) ** 2
    for t in heights:
        z_max = math.exp(-t) * profile.ell / 2.0
        oracle, _err = scipy.integrate.quad(
            lambda z: 2.0 * math.sqrt(s2 - z * z) / (1.0 + z * z),
            -z_max, z_max, epsabs=1e-13, epsrel=1e-12)
        vol = ball_volume(profile, h, t)
        worst = max(worst, abs(vol - oracle) / oracle)
    return worst


def _variance_split_error(profile: CuspProfile, h: float, op,
                          rng: np.random.Generator) -> float:
    """The window variance splits exactly: V[a,b) = V[a,c) + V[c,b) + 2 I^c."""
    f = rng.standard_normal(op.n)
    a, c, b = -2.0, 0.5, 3.0
    whole = restricted_variance(profile, h, f, a, b, op=op)
    split = (
        restricted_variance(profile, h, f, a, c, op=op)
        + restricted_variance(profile, h, f, c, b, op=op)
        + 2.0 * interaction_term(profile, h, f, a, c, b, op=op)
    )
    return abs(whole - split)


def _dirichlet_agreement(profile: CuspProfile, h: float, op,
                         rng: np.random.Generator) -> bool:
    """dirichlet_form recomputes itself along two routes and raises past
    1e-8; exercising it on a smooth and a rough function is the check."""
    try:
        dirichlet_form(profile, h, np.tanh(op.grid.nodes), op=op)
        dirichlet_form(profile, h, rng.standard_normal(op.n), op=op)
    except ArithmeticError:
        return False
    return True


def _sampler_chi_square(profile: CuspProfile, h: float, center: float,
                        n_draws: int) -> float:
    """Chi-square p-value of one exact-sampler step against quadrature.

    Cells: 20 equal height slabs across the band, by 20 equal cells in the
    fiber offset normalized by the local half-width (conditionally uniform
    on [-1, 1]).  Expected counts are slab masses from direct quadrature,
    split evenly across the fiber cells.  The normalization reuses the
    sampler's own certified half-width table; a million exact half-width
    solves would dominate the whole checklist for no extra information.
    """
    table = montecarlo.ball_table(profile, h)
    ens = montecarlo.run_ensemble(profile, h, (center, 0.0), n_draws, 1,
                                  seed=_IDENTITY_SEED, table=table)
    t = ens.t
    u = np.where(ens.y > profile.ell / 2.0, ens.y - profile.ell, ens.y)
    alpha = table.half_width(np.full_like(t, center), t)
    slab_edges = np.linspace(center - h, center + h, 21)
    i_slab = np.clip(np.searchsorted(slab_edges, t, side="right") - 1, 0, 19)
    i_fiber = np.clip(((u / alpha + 1.0) * 10.0).astype(int), 0, 19)
    observed = np.bincount(i_slab * 20 + i_fiber, minlength=400).astype(float)

    # slab masses: integrate the fiber length over each height slab; break
    # the integrand at the blend joins and half-width cap crossings hiding
    # inside the band (quad gets told about the kinks)
    def fiber(tp: float) -> float:
        a = float(table.half_width(center, tp))
        return 2.0 * a * math.exp(-profile.mu(tp))

    masses = np.empty(20)
    for i in range(20):
        lo, hi = slab_edges[i], slab_edges[i + 1]
        kinks = [x for x in (-profile.t0, profile.t0) if lo < x < hi]
        masses[i], _err = scipy.integrate.quad(
            fiber, lo, hi, points=kinks or None, limit=200, epsabs=1e-12)
    expected = np.repeat(masses / masses.sum() * n_draws / 20.0, 20)
    stat = float(np.sum((observed - expected) ** 2 / expected))
    return float(scipy.stats.chi2.sf(stat, 400 - 1))


def _weyl_slope(profile: CuspProfile, h: float, lam: float) -> float:
    """Fitted log2 decay rate of the Weyl-window residual in the window
    exponent; the windowing argument predicts -1/2."""
    ns = np.arange(2, 8)
    resid = [weyl_residual(profile, h, lam, int(n)) for n in ns]
    return float(np.polyfit(ns, np.log2(resid), 1)[0])


def check_identity_suite(out_root: Path, threads: int = 1) -> CheckResult:
    """Closed forms against independent quadrature, exact grid identities,
    the sampler against the kernel, and the Weyl-window decay trend."""
    del out_root, threads  # no experiment backing; computed directly
    profile = CuspProfile()
    rng = np.random.default_rng(_IDENTITY_SEED)
    symbol_err = _symbol_error(0.3, 100, rng)
    volume_err = _volume_error(profile, 0.5, (2.0, 3.0, 5.0))
    op = assemble_mode_operator(profile, 0.5, 0, GridSpec.for_step(0.5, 8.0, 8))
    split_err = _variance_split_error(profile, 0.5, op, rng)
    dirichlet_ok = _dirichlet_agreement(profile, 0.5, op, rng)
    chi2_p = _sampler_chi_square(profile, 0.5, 0.25, 1_000_000)
    weyl_slope = _weyl_slope(profile, 0.3, 1.0)
    ok = (
        symbol_err <= _SYMBOL_TOL
        and volume_err <= _VOLUME_RTOL
        and split_err <= _SPLIT_TOL
        and dirichlet_ok
        and chi2_p > _CHI2_P_FLOOR
        and _WEYL_SLOPE_RANGE[0] <= weyl_slope <= _WEYL_SLOPE_RANGE[1]
    )
    details = (f"symbol {_fmt(symbol_err)} <= {_SYMBOL_TOL:g}, "
               f"volume rel {_fmt(volume_err)} <= {_VOLUME_RTOL:g}, "
               f"variance split {_fmt(split_err)} <= {_SPLIT_TOL:g}, "
               f"Dirichlet routes {'agree' if dirichlet_ok else 'DISAGREE'}, "
               f"sampler chi-square p {_fmt(chi2_p)} > {_CHI2_P_FLOOR:g}, "
               f"Weyl slope {_fmt(weyl_slope)} near -1/2")
    return CheckResult(10, "identity-suite", ok, details)


# ── the checklist ────────────────────────────────────────────────────────────

_CHECKS = (
    check_band_occupancy,
    check_gap_bracketing,
    check_spectrum_bottom,
    check_mode_contraction,
    check_quasimode_localization,
    check_smoothing_rate,
    check_tv_decay,
    check_escape_bound,
    check_tempered_gaps,
    check_identity_suite,
)

CHECK_NAMES = (
    "band-occupancy", "gap-bracketing", "spectrum-bottom",
    "mode-contraction", "quasimode-localization", "smoothing-rate",
    "tv-decay", "escape-bound", "tempered-gaps", "identity-suite",
)


def run_check(number: int, out_root: Path | str | None = None,
              threads: int = 1) -> CheckResult:
    """Run one checklist item by its 1-based number."""
    if not 1 <= number <= len(_CHECKS):
        raise ValueError(f"no check number {number}")
    root = Path(out_root) if out_root is not None else Path(
        tempfile.mkdtemp(prefix="cuspwalk-check-"))
    return _CHECKS[number - 1](root, threads)


def run_checklist(out_root: Path | str | None = None, threads: int = 1,
                  numbers: tuple[int, ...] | None = None) -> list[CheckResult]:
    """Run the checklist (all ten by default) and return the verdicts.

    Experiment-backed checks write their CSVs and manifests under
    ``out_root`` (a scratch directory is created when omitted), so a failed
    run leaves its evidence behind.
    """
    root = Path(out_root) if out_root is not None else Path(
        tempfile.mkdtemp(prefix="cuspwalk-check-"))
    chosen = numbers if numbers is not None else tuple(
        range(1, len(_CHECKS) + 1))
    return [_CHECKS[n - 1](root, threads) for n in chosen]
