"""cuspwalk: random-walk operators, spectra, and mixing diagnostics on
finite-volume surfaces of revolution with hyperbolic cusps."""

__version__ = "0.1.0"

from cuspwalk.checks import CheckResult, run_check, run_checklist
from cuspwalk.config import (
    EXPERIMENTS,
    ExperimentConfig,
    parse_config,
    serialize_config,
)
from cuspwalk.experiments import ExperimentResult, RunManifest, run_config
from cuspwalk.functionals import (
    FunctionalReport,
    TemperedWalk,
    dirichlet_form,
    functional_report,
    rayleigh_gap,
    rho_preset,
    tempered_walk,
    tempered_walk_gap,
    variance,
)
from cuspwalk.geometry import (
    BallGeometry,
    CuspProfile,
    ball_geometry,
    ball_half_width,
    ball_volume,
    blend_coefficients,
    distance_cusp,
    distance_numeric,
    overlap_threshold,
)
from cuspwalk.montecarlo import (
    BallTable,
    TVReport,
    WalkerEnsemble,
    ball_table,
    deterministic_evolution,
    escape_experiment,
    run_ensemble,
    sample_ball,
    tv_lower_bound,
    tv_report,
)
from cuspwalk.operator import (
    GridSpec,
    ModeOperator,
    StationaryMeasure,
    assemble_mode_operator,
    apply_mode_operator,
    h1_smoothing_norm,
    stationary_measure,
    symbol_sigma,
)
from cuspwalk.spectral import (
    GapScan,
    LaplaceModeResult,
    SpectrumResult,
    essential_band,
    essential_band_occupancy,
    laplace_mode_eigs,
    quasimode_residual,
    spectral_gap,
    spectral_gap_scan,
    spectrum_of_mode,
    weyl_residual,
)

__all__ = [
    "BallGeometry",
    "BallTable",
    "CheckResult",
    "CuspProfile",
    "EXPERIMENTS",
    "ExperimentConfig",
    "ExperimentResult",
    "FunctionalReport",
    "GapScan",
    "GridSpec",
    "LaplaceModeResult",
    "ModeOperator",
    "RunManifest",
    "SpectrumResult",
    "StationaryMeasure",
    "TVReport",
    "TemperedWalk",
    "WalkerEnsemble",
    "apply_mode_operator",
    "assemble_mode_operator",
    "ball_geometry",
    "ball_half_width",
    "ball_table",
    "ball_volume",
    "blend_coefficients",
    "deterministic_evolution",
    "dirichlet_form",
    "distance_cusp",
    "distance_numeric",
    "escape_experiment",
    "essential_band",
    "essential_band_occupancy",
    "functional_report",
    "h1_smoothing_norm",
    "laplace_mode_eigs",
    "overlap_threshold",
    "parse_config",
    "quasimode_residual",
    "rayleigh_gap",
    "rho_preset",
    "run_check",
    "run_checklist",
    "run_config",
    "run_ensemble",
    "sample_ball",
    "serialize_config",
    "spectral_gap",
    "spectral_gap_scan",
    "spectrum_of_mode",
    "stationary_measure",
    "symbol_sigma",
    "tempered_walk",
    "tempered_walk_gap",
    "tv_lower_bound",
    "tv_report",
    "variance",
    "weyl_residual",
    "__version__",
]
