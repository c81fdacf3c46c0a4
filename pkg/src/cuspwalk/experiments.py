"""Named experiments over the toolkit: each one maps a config to CSV files
plus fitted constants, and a run ends with an atomically written manifest.

CSV files are byte-reproducible under a fixed config and seed: float cells
are written with repr (shortest round-trip form), row order is
deterministic, and no timestamps enter the data files.  Timestamps live
only in the manifest.  Every file starts with a '#'-prefixed schema line
carrying the format version and experiment name.
"""

from __future__ import annotations

import dataclasses
import datetime
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy.interpolate
import scipy.linalg

from . import __version__, montecarlo
from .config import ExperimentConfig, serialize_config
from .functionals import tempered_walk_gap
from .geometry import CuspProfile
from .operator import (
    GridSpec,
    assemble_mode_operator,
    h1_smoothing_norm,
    stationary_measure,
)
from .spectral import (
    default_t_max,
    essential_band,
    essential_band_occupancy,
    laplace_mode_eigs,
    quasimode_residual,
    restricted_mode_norm,
    shooting_laplace_eig,
    spectral_gap,
    spectral_gap_scan,
)

__all__ = [
    "ExperimentResult",
    "RunManifest",
    "run_config",
]

_CSV_VERSION = "v1"

# start height for the mixing ensembles; reported in the manifest because
# the decay statement is uniform only over starts below a ceiling
_TV_START_TAU = 3.0


@dataclasses.dataclass(frozen=True)
class ExperimentResult:
    """One experiment's outputs: written CSV paths and fitted constants."""

    name: str
    csv_paths: tuple[str, ...]
    fitted: dict[str, float]


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """Record of one run: config echo, outputs, fits, timestamps."""

    experiment: str
    version: str
    started: str
    finished: str
    config_text: str
    outputs: tuple[str, ...]
    fitted: dict[str, float]
    path: str


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, experiment: str, columns, rows) -> None:
    lines = [f"# cuspwalk-csv {_CSV_VERSION} {experiment}", ",".join(columns)]
    lines.extend(",".join(_cell(x) for x in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _loglog_fit(x, y) -> tuple[float, float]:
    """(slope, prefactor) of y ~ prefactor * x^slope, least squares in logs."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, dtype=float)),
                                  np.log(np.asarray(y, dtype=float)), 1)
    return float(slope), float(math.exp(intercept))


def _map_h(fn, h_values, threads: int) -> list:
    if threads <= 1:
        return [fn(h) for h in h_values]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, h_values))


def _base_operator(profile: CuspProfile, h: float, t_max: float | None,
                   n_per_h: int):
    """k = 0 assembly for this h; nonzero modes are cheap field swaps on it
    because the band geometry and weights do not depend on k."""
    grid = GridSpec.for_step(h, t_max if t_max is not None
                             else default_t_max(profile, h), n_per_h)
    return assemble_mode_operator(profile, h, 0, grid)


def _mode_variant(base, k: int):
    return base if k == 0 else dataclasses.replace(base, k=k)


def _eig_at(op, idx: int) -> float:
    """One eigenvalue of the symmetrized mode matrix by banded bisection."""
    ab = op.symmetric_banded()
    vals = scipy.linalg.eigvals_banded(ab, lower=False, select="i",
                                       select_range=(idx, idx))
    return float(vals[0])


def _top_eigs(op, m: int) -> np.ndarray:
    ab = op.symmetric_banded()
    vals = scipy.linalg.eigvals_banded(
        ab, lower=False, select="i", select_range=(op.n - m, op.n - 1))
    return vals[::-1]


# ── the nine experiments ─────────────────────────────────────────────────────


def _run_ess_spectrum(cfg: ExperimentConfig, out: Path,
                      threads: int) -> ExperimentResult:
    h = cfg.resolved_h[0]
    t_bases = (cfg.t_max, 2.0 * cfg.t_max) if cfg.t_max else (10.0, 20.0)
    rows_raw = essential_band_occupancy(cfg.profile, h, t_bases, cfg.n_per_h)
    rows = [(r["t_max"], r["n"], r["inside"], r["above"]) for r in rows_raw]
    path = out / "ess-spectrum.csv"
    _write_csv(path, "ess-spectrum", ("t_max", "n", "inside", "above"), rows)
    lo, hi = essential_band(h)
    fitted = {
        "inside_growth_ratio": rows_raw[1]["inside"] / rows_raw[0]["inside"],
        "above_difference": float(rows_raw[1]["above"] - rows_raw[0]["above"]),
        "band_lo": lo,
        "band_hi": hi,
    }
    return ExperimentResult("ess-spectrum", (str(path),), fitted)


def _run_gap_scan(cfg: ExperimentConfig, out: Path,
                  threads: int) -> ExperimentResult:
    profile = cfg.profile
    scans = _map_h(
        lambda h: spectral_gap_scan(profile, h, cfg.resolved_k_max,
                                    cfg.t_max, cfg.n_per_h),
        cfg.resolved_h, threads)
    gaps = [s.gap for s in scans]
    ratios = [g / h**2 for g, h in zip(gaps, cfg.resolved_h)]
    c_fit = float(np.exp(np.mean(np.log(ratios))))
    slope, _ = _loglog_fit(cfg.resolved_h, gaps)
    # upper bracket: g never exceeds the flat-band endpoint plus twice the
    # discretization tolerance (Perron defect or quadrature floor, whichever
    # is worse); the Perron eigenvalue sits at distance defect from 1
    defects = []
    margins = []
    for h, g in zip(cfg.resolved_h, gaps):
        base = _base_operator(profile, h, cfg.t_max, cfg.n_per_h)
        defect = abs(1.0 - _eig_at(base, base.n - 1))
        tol = max(defect, 10.0 / cfg.n_per_h**2)
        defects.append(defect)
        margins.append(1.0 - h / math.sinh(h) + 2.0 * tol - g)
    rows = [
        (h, s.gap, 1.0 - h / math.sinh(h), d, c_fit * h**2, s.argmin_k)
        for h, s, d in zip(cfg.resolved_h, scans, defects)
    ]
    path = out / "gap-scan.csv"
    _write_csv(path, "gap-scan",
               ("h", "gap", "upper_bound", "perron_defect", "lower_fit",
                "argmin_k"), rows)
    fitted = {
        "c": c_fit,
        "slope": slope,
        "band_factor": max(ratios) / min(ratios),
        "upper_margin": min(margins),
    }
    return ExperimentResult("gap-scan", (str(path),), fitted)


def _run_bottom_check(cfg: ExperimentConfig, out: Path,
                      threads: int) -> ExperimentResult:
    ks = [k for k in (0, 1, 2, 4, 8) if k <= cfg.resolved_k_max]
    profile = cfg.profile
    bases = _map_h(
        lambda h: _base_operator(profile, h, cfg.t_max, cfg.n_per_h),
        cfg.resolved_h, threads)
    rows = []
    for h, base in zip(cfg.resolved_h, bases):
        for k in ks:
            rows.append((h, k, _eig_at(_mode_variant(base, k), 0)))
    path = out / "bottom-check.csv"
    _write_csv(path, "bottom-check", ("h", "k", "min_eig"), rows)
    overall = min(row[2] for row in rows)
    fitted = {"min_eig": overall, "delta_empirical": 1.0 + overall}
    return ExperimentResult("bottom-check", (str(path),), fitted)


def _run_quasimode(cfg: ExperimentConfig, out: Path,
                   threads: int) -> ExperimentResult:
    profile = cfg.profile
    lap_grid = GridSpec.symmetric(16.0, 0.004)
    modes = {k: laplace_mode_eigs(profile, k, lap_grid) for k in (1, 2)}
    bases = _map_h(
        lambda h: _base_operator(profile, h, cfg.t_max, cfg.n_per_h),
        cfg.resolved_h, threads)
    rows = []
    fitted: dict[str, float] = {}
    dist_ratios = []
    for k, mode in modes.items():
        lam = float(mode.eigenvalues[0])
        psi = scipy.interpolate.CubicSpline(lap_grid.nodes,
                                            mode.eigenfunctions[:, 0])
        residuals = []
        for h, base in zip(cfg.resolved_h, bases):
            predicted = 1.0 - lam * h * h / 8.0
            top = _top_eigs(_mode_variant(base, k), 8)
            nearest = float(top[np.argmin(np.abs(top - predicted))])
            # radius 10 covers the eigenfunction far past its classical
            # turning point yet stays inside the spline's domain
            resid = quasimode_residual(profile, h, psi, lam, k=k,
                                       support_radius=10.0)
            residuals.append(resid)
            dist_ratios.append(abs(nearest - predicted) / h**2)
            rows.append((k, h, lam, predicted, nearest,
                         abs(nearest - predicted), resid))
        slope, _ = _loglog_fit(cfg.resolved_h[-3:], residuals[-3:])
        fitted[f"lambda_k{k}"] = lam
        fitted[f"residual_slope_k{k}"] = slope
        # the slow-tail rate 2 + sqrt(1/4 - lambda) belongs to k = 0 bound
        # states; nonzero modes decay past the turning point faster than
        # any exponential, so the flat h^4 estimate is the sharp one
        branch = math.sqrt(0.25 - lam) + 2.0 if (k == 0 and lam < 0.25) else 4.0
        fitted[f"expected_order_k{k}"] = branch
    # independent solver cross-check on the fundamental tone, and a scale
    # check that every matched eigenvalue sits well inside its own gap
    fitted["method_agreement"] = abs(
        fitted["lambda_k1"] - shooting_laplace_eig(profile, 1))
    fitted["max_distance_ratio"] = max(dist_ratios)
    path = out / "quasimode.csv"
    _write_csv(path, "quasimode",
               ("k", "h", "lambda", "predicted", "nearest_eig", "distance",
                "residual"),
               rows)
    return ExperimentResult("quasimode", (str(path),), fitted)


def _run_contraction(cfg: ExperimentConfig, out: Path,
                     threads: int) -> ExperimentResult:
    ks = [k for k in (1, 2, 4, 8) if k <= cfg.resolved_k_max]
    profile = cfg.profile
    bases = _map_h(
        lambda h: _base_operator(profile, h, cfg.t_max, cfg.n_per_h),
        cfg.resolved_h, threads)
    rows = []
    for h, base in zip(cfg.resolved_h, bases):
        for k in ks:
            top = _eig_at(_mode_variant(base, k), base.n - 1)
            rows.append((h, k, top, (1.0 - top) / h**2))
    path = out / "contraction.csv"
    _write_csv(path, "contraction", ("h", "k", "top_eig", "rate"), rows)

    # deep-restriction trend at the finest h: the submatrix norm must drop
    # as the restriction moves deeper and as the fiber frequency grows
    i_fine = int(np.argmin(cfg.resolved_h))
    h_fine = cfg.resolved_h[i_fine]
    base_fine = bases[i_fine]
    sub_rows = []
    norms: dict[tuple[float, int], float] = {}
    for tau in (2.0, 4.0):
        for k in ks:
            op = _mode_variant(base_fine, k)
            norms[(tau, k)] = restricted_mode_norm(op, tau)
            sub_rows.append((h_fine, k, tau, norms[(tau, k)]))
    sub_path = out / "contraction-restricted.csv"
    _write_csv(sub_path, "contraction",
               ("h", "k", "tau", "restricted_norm"), sub_rows)
    # monotone improvement: deeper restriction and faster fiber frequency
    # must never loosen the norm (ties allowed: deep blocks can hit zero)
    drops = [norms[(2.0, k)] - norms[(4.0, k)] for k in ks]
    drops += [norms[(tau, ka)] - norms[(tau, kb)]
              for tau in (2.0, 4.0) for ka, kb in zip(ks, ks[1:])]
    fitted = {
        "epsilon": min(row[3] for row in rows),
        "ordering_margin": min(drops),
    }
    return ExperimentResult("contraction", (str(path), str(sub_path)), fitted)


def _run_smoothing(cfg: ExperimentConfig, out: Path,
                   threads: int) -> ExperimentResult:
    ks = [k for k in (0, 1) if k <= cfg.resolved_k_max]
    profile = cfg.profile
    bases = _map_h(
        lambda h: _base_operator(profile, h, cfg.t_max, cfg.n_per_h),
        cfg.resolved_h, threads)
    rows = []
    fitted: dict[str, float] = {}
    for k in ks:
        norms = [h1_smoothing_norm(_mode_variant(base, k)) for base in bases]
        rows.extend((h, k, v) for h, v in zip(cfg.resolved_h, norms))
        slope, _ = _loglog_fit(cfg.resolved_h, norms)
        fitted[f"slope_k{k}"] = slope
    path = out / "smoothing.csv"
    _write_csv(path, "smoothing", ("h", "k", "h1_norm"), rows)
    return ExperimentResult("smoothing", (str(path),), fitted)


def _run_tempered_gap(cfg: ExperimentConfig, out: Path,
                      threads: int) -> ExperimentResult:
    rows = []
    fitted: dict[str, float] = {}
    for rho in ("exp-abs", "exp-half", "box"):
        gaps = _map_h(lambda h, rho=rho: tempered_walk_gap(rho, h),
                      cfg.resolved_h, threads)
        rows.extend((rho, h, g) for h, g in zip(cfg.resolved_h, gaps))
        if rho != "box":
            slope, c = _loglog_fit(cfg.resolved_h, gaps)
            tag = rho.replace("-", "_")
            fitted[f"slope_{tag}"] = slope
            fitted[f"c_{tag}"] = c
    path = out / "tempered-gap.csv"
    _write_csv(path, "tempered-gap", ("rho", "h", "gap"), rows)
    return ExperimentResult("tempered-gap", (str(path),), fitted)


def _run_tv_decay(cfg: ExperimentConfig, out: Path,
                  threads: int) -> ExperimentResult:
    profile = cfg.profile
    h = cfg.resolved_h[0]
    n_steps = cfg.resolved_steps
    t_max = cfg.t_max if cfg.t_max is not None else default_t_max(profile, h)
    op = assemble_mode_operator(profile, h, 0,
                                GridSpec.for_step(h, t_max, cfg.n_per_h))
    nu = stationary_measure(op)
    g = spectral_gap(profile, h, max(cfg.resolved_k_max, 1), t_max,
                     cfg.n_per_h)

    ens = montecarlo.run_ensemble(profile, h, (_TV_START_TAU, 0.0),
                                  cfg.n_walkers, n_steps, cfg.seed,
                                  record_every=2, t_max=t_max)
    rep = montecarlo.tv_report(ens, nu)
    tv_rows = [
        (int(n), tv, rep.noise_floor, cfg.n_walkers, h, cfg.seed)
        for n, tv in zip(rep.steps, rep.values)
    ]
    tv_path = out / "tv-decay.csv"
    _write_csv(tv_path, "tv-decay",
               ("n", "tv_lower", "noise_floor", "N", "h", "seed"), tv_rows)

    p0 = np.zeros(op.n)
    p0[np.argmin(np.abs(op.grid.nodes - _TV_START_TAU))] = 1.0
    det = montecarlo.deterministic_evolution(profile, h, p0, n_steps, op=op)
    det_binned = montecarlo.deterministic_evolution(
        profile, h, p0, n_steps, op=op, bin_edges=ens.bin_edges)
    det_rows = [
        (int(n), v, vb) for n, v, vb
        in zip(det.steps, det.values, det_binned.values)
    ]
    det_path = out / "tv-deterministic.csv"
    _write_csv(det_path, "tv-decay", ("n", "tv_grid", "tv_binned"), det_rows)

    margin = rep.values - 3.0 * rep.noise_floor
    c_dom = float(np.max(np.maximum(margin, 1e-12) * np.exp(g * rep.steps)))
    fitted = {
        "g": g,
        "rate_deterministic": det.rate,
        "rate_ratio": det.rate / g,
        "rate_mc": rep.rate,
        "noise_floor": rep.noise_floor,
        "domination_prefactor": c_dom,
        "start_tau": _TV_START_TAU,
    }
    return ExperimentResult("tv-decay", (str(tv_path), str(det_path)), fitted)


def _run_escape(cfg: ExperimentConfig, out: Path,
                threads: int) -> ExperimentResult:
    h = cfg.resolved_h[0]
    n_final = cfg.resolved_steps
    steps = sorted({0, n_final // 4, n_final // 2, n_final})
    rows = []
    for n in steps:
        bound = montecarlo.escape_experiment(
            cfg.profile, h, n, n_walkers=cfg.n_walkers, seed=cfg.seed,
            t_max=cfg.t_max)
        rows.append((h, n, 2.0 * n * h, bound))
    path = out / "escape.csv"
    _write_csv(path, "escape", ("h", "n", "start_height", "tv_bound"), rows)
    fitted = {"bound_final": rows[-1][3], "n_final": float(n_final)}
    return ExperimentResult("escape", (str(path),), fitted)


_RUNNERS = {
    "ess-spectrum": _run_ess_spectrum,
    "gap-scan": _run_gap_scan,
    "bottom-check": _run_bottom_check,
    "quasimode": _run_quasimode,
    "contraction": _run_contraction,
    "smoothing": _run_smoothing,
    "tempered-gap": _run_tempered_gap,
    "tv-decay": _run_tv_decay,
    "escape": _run_escape,
}


def run_config(cfg: ExperimentConfig, out_root: str | os.PathLike | None = None,
               threads: int = 1) -> RunManifest:
    """Run one configured experiment and write its CSVs plus a manifest.

    The manifest lands atomically (written to a temp name, then renamed)
    so a crash mid-run never leaves a half-valid manifest; its absence
    means the run did not finish.
    """
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    out = Path(out_root if out_root is not None else cfg.out_dir)
    out = out / cfg.experiment
    out.mkdir(parents=True, exist_ok=True)
    result = _RUNNERS[cfg.experiment](cfg, out, threads)
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    manifest_path = out / "manifest.json"
    manifest = RunManifest(
        experiment=cfg.experiment,
        version=__version__,
        started=started,
        finished=finished,
        config_text=serialize_config(cfg),
        outputs=tuple(result.csv_paths),
        fitted=result.fitted,
        path=str(manifest_path),
    )
    payload = dataclasses.asdict(manifest)
    del payload["path"]
    tmp = manifest_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, manifest_path)
    return manifest
