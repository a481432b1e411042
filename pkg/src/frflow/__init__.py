"""Birth-death (Fisher-Rao) gradient flows of regularized energies on 1-D
grids, with oracle-checked integrators and machine-readable convergence
certificates.

The hot kernels live in a compiled extension when available; set
FRFLOW_BACKEND=python or FRFLOW_BACKEND=compiled to force a backend.
"""

from ._backend import BACKEND_NAME as _backend_name
from .errors import (
    CFLError,
    ConfigError,
    FlowError,
    FrflowError,
    GridError,
    GridMismatchError,
    MeasureError,
    NonFiniteError,
    PositivityError,
    RatioUnboundedError,
    TraceError,
    ZeroDensityError,
)
from .grid_measure import (
    DivergenceReport,
    DragomirReport,
    Grid,
    GridMeasure,
    ReferenceMeasure,
    build_grid,
    chi2,
    density_ratio_bounds,
    divergence_report,
    dragomir_check,
    f_divergence,
    fisher_rao_distance,
    gaussian_measure,
    geometric_mixture,
    kl,
    measure_from_density,
    measure_from_log_density,
    reference_from_potential,
    tv,
)
from .functionals import (
    EnergyFunctional,
    LinearPotential,
    MeanFieldLearner,
    QuadraticInteraction,
    RegularizedEnergy,
    ZeroEnergy,
    convexity_check,
    drift_a,
    eval_F,
    eval_V,
    flat_derivative,
    flat_derivative_defcheck,
)
from .flow import (
    TRACE_COLUMNS,
    FlowConfig,
    FlowState,
    FlowTrace,
    PicardResult,
    TraceRecord,
    oracle_flow_F0,
    picard_solve,
    run_flow,
    step_euler,
    step_exponential,
    tv_path_distance,
)
from .minimizer import (
    MinimizerResult,
    OptimalityReport,
    gibbs_map,
    optimality_check,
    solve_mstar,
)
from .compare_flows import (
    WFRDissipation,
    chi2_cfl_limit,
    chi2_flow_step,
    chi2_state,
    dissipation_split,
    logsobolev_form,
    run_comparison_flow,
    wasserstein_cfl_limit,
    wasserstein_step,
    wfr_step,
)
from .diagnostics import (
    EnvelopeReport,
    GeneralPliReport,
    PliReport,
    R1_formula,
    RateReport,
    RatioBounds,
    dissipation_check,
    general_pli_check,
    kl_bound_check,
    measure_ratio_bounds,
    pli_check,
    quadratic_growth_check,
    r1_formula,
    rate_fit,
    ratio_envelope_check,
)
from .presets import (
    PRESETS,
    battery_rng,
    build_functional,
    build_m0,
    build_reference,
    random_warm_start,
)
from .runner import (
    CHECK_NAMES,
    CheckResult,
    ExperimentConfig,
    build_experiment,
    execute_run,
    run_from_dict,
    write_artifacts,
)

__version__ = "0.1.0"


def backend_name() -> str:
    """Name of the kernel backend selected at import ("compiled"/"python")."""
    return _backend_name


__all__ = [
    "__version__",
    "backend_name",
    # errors
    "FrflowError", "GridError", "MeasureError", "GridMismatchError",
    "RatioUnboundedError", "ZeroDensityError", "FlowError",
    "PositivityError", "CFLError", "NonFiniteError", "TraceError",
    "ConfigError",
    # grid and measures
    "Grid", "GridMeasure", "ReferenceMeasure", "build_grid",
    "measure_from_density", "measure_from_log_density", "gaussian_measure",
    "reference_from_potential", "kl", "chi2", "tv", "fisher_rao_distance",
    "f_divergence", "density_ratio_bounds", "divergence_report",
    "DivergenceReport", "DragomirReport", "dragomir_check",
    "geometric_mixture",
    # functionals
    "EnergyFunctional", "ZeroEnergy", "LinearPotential",
    "QuadraticInteraction", "MeanFieldLearner", "RegularizedEnergy",
    "eval_F", "eval_V", "flat_derivative", "flat_derivative_defcheck",
    "convexity_check", "drift_a",
    # flow
    "TRACE_COLUMNS", "FlowConfig", "FlowState", "FlowTrace", "TraceRecord",
    "run_flow", "step_exponential", "step_euler", "oracle_flow_F0",
    "tv_path_distance", "PicardResult", "picard_solve",
    # minimizer
    "MinimizerResult", "OptimalityReport", "gibbs_map", "solve_mstar",
    "optimality_check",
    # comparison flows
    "WFRDissipation", "wasserstein_step", "wasserstein_cfl_limit",
    "chi2_state", "chi2_flow_step", "chi2_cfl_limit", "wfr_step",
    "dissipation_split", "logsobolev_form", "run_comparison_flow",
    # diagnostics
    "RatioBounds", "measure_ratio_bounds", "dissipation_check", "PliReport",
    "pli_check", "GeneralPliReport", "general_pli_check",
    "quadratic_growth_check", "RateReport", "rate_fit", "kl_bound_check",
    "R1_formula", "r1_formula", "EnvelopeReport", "ratio_envelope_check",
    # presets and runner
    "PRESETS", "battery_rng", "random_warm_start", "build_reference",
    "build_functional", "build_m0", "ExperimentConfig", "CheckResult",
    "CHECK_NAMES", "build_experiment", "execute_run", "write_artifacts",
    "run_from_dict",
]
