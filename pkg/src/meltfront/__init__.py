"""Brownian particles absorbed by a self-raising barrier, and their scaling limits.

The package has three layers:

* exact anchors (``closed_form``): linear-barrier absorption functionals,
  first-passage samplers, and the travelling-wave speed equation;
* the mean-field free boundary (``mean_field``): Monte Carlo evaluation of
  the barrier functional, the monotone iteration to its minimal fixed point,
  jump sizing, Laplace-transform balance checks, and regime classification;
* finite systems (``particle_sim``, ``critical_limit``): event-exact and
  Euler simulations of the interacting system, plus the space-time
  rescalings that connect small-jump runs to the unit system and critical
  runs to the reflected-drift limit.

``experiments`` packages the headline numerical studies behind fixed
configurations; ``cli`` exposes everything as subcommands.
"""

from __future__ import annotations

from .closed_form import (
    bridge_cross_prob,
    gamma_linear,
    k_alpha,
    k_alpha_map,
    level_hit_cdf,
    sample_bridge_min,
    sample_level_hit,
    sample_line_hit,
)
from .critical_limit import (
    SpacePath,
    critical_rescale,
    r_process,
    sample_r,
    sample_r_pair,
    sample_space_bm,
)
from .densities import (
    CheckResult,
    ConditionReport,
    Constant,
    DensitySpec,
    GapDensity,
    HeavyTail,
    ScaledCdf,
    Tabulated,
    TravellingWave,
    blowup_criterion,
    check_conditions,
    deficit_transform,
    density_from_dict,
    density_to_dict,
)
from .errors import ConfigError, NumericalError
from .experiments import (
    ExperimentSummary,
    exp_critical,
    exp_gap_density,
    exp_polynomial,
    exp_rate,
    exp_similarity,
    ks_distance,
)
from .mean_field import (
    ContractionEstimate,
    GammaEvalConfig,
    GridFunction,
    JumpRecord,
    LaplaceResidual,
    MinimalSolution,
    SpeedVerdict,
    SubBarrierDensity,
    asymptotic_speed,
    detect_explosion,
    estimate_contraction,
    estimate_subbarrier_density,
    eval_gamma,
    laplace_residual,
    physical_jump_size,
    solve_minimal,
    sqrt_time_grid,
)
from .particle_sim import (
    EventLog,
    FixedBarrierResult,
    LinearBarrier,
    SimConfig,
    SimEvent,
    rescale_to_xi,
    resolve_cascade,
    run_euler,
    run_exact,
    run_fixed_barrier,
)
from .sampling import PointCloud, SeedSpec, extend_window, sample_ppp

__version__ = "0.1.0"

__all__ = [
    "bridge_cross_prob", "gamma_linear", "k_alpha", "k_alpha_map",
    "level_hit_cdf", "sample_bridge_min", "sample_level_hit", "sample_line_hit",
    "SpacePath", "critical_rescale", "r_process", "sample_r", "sample_r_pair",
    "sample_space_bm",
    "CheckResult", "ConditionReport", "Constant", "DensitySpec", "GapDensity",
    "HeavyTail", "ScaledCdf", "Tabulated", "TravellingWave",
    "blowup_criterion", "check_conditions", "deficit_transform",
    "density_from_dict", "density_to_dict",
    "ConfigError", "NumericalError",
    "ExperimentSummary", "exp_critical", "exp_gap_density", "exp_polynomial",
    "exp_rate", "exp_similarity", "ks_distance",
    "ContractionEstimate", "GammaEvalConfig", "GridFunction", "JumpRecord",
    "LaplaceResidual", "MinimalSolution", "SpeedVerdict", "SubBarrierDensity",
    "asymptotic_speed", "detect_explosion", "estimate_contraction",
    "estimate_subbarrier_density", "eval_gamma", "laplace_residual",
    "physical_jump_size", "solve_minimal", "sqrt_time_grid",
    "EventLog", "FixedBarrierResult", "LinearBarrier", "SimConfig", "SimEvent",
    "rescale_to_xi", "resolve_cascade", "run_euler", "run_exact",
    "run_fixed_barrier",
    "PointCloud", "SeedSpec", "extend_window", "sample_ppp",
    "__version__",
]
