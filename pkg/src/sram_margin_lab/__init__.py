"""Write-stability characterisation toolkit for six-transistor bit cells.

The package models a cross-coupled static cell at transistor level
(alpha-power-law devices, two-node transient solver), measures how far the
word-line voltage can be reduced before a timed write fails, and relates
that margin to classical static and quasistatic write metrics under
process variation, from single cells up to memory arrays.
"""
from .array import ArrayModel, WlvmRecord, build_array, combine_directions, wlvm_search
from .cell import (
    BiasCondition,
    CellDesign,
    CellState,
    Equilibrium,
    SimSettings,
    Trajectory,
    Waveform,
    classify_state,
    find_equilibria,
    hold_bias,
    separatrix_point,
    simulate_transient,
    solve_vtc,
    stable_state,
    write_drive,
)
from .config import (
    ExperimentConfig,
    config_hash,
    default_config,
    design_from_widths,
    load_config,
    make_design,
    parse_config,
    ramp_config,
    scaled_pullup_design,
    serialize,
    sim_settings,
    variation_model,
)
from .device import MosParams, drain_current, mirror_p_from_n
from .errors import ConfigError, DivergenceError, SolverError, SramMarginError
from .metrics import (
    MetricResult,
    RampConfig,
    attempt_write,
    bwtv,
    bwtv_batch,
    critical_pulse_width,
    wlvm_batch,
    wlvm_cell,
    write_noise_margin,
    wwtv,
    wwtv_batch,
)
from .stats import DistributionSummary, HistogramCdf, histogram_cdf, pearson, summarize
from .variation import (
    McOutcome,
    SampleId,
    VariationModel,
    monte_carlo,
    sample_cell,
    sample_population,
    sigma_vth,
    standard_normal,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayModel", "WlvmRecord", "build_array", "combine_directions",
    "wlvm_search",
    "BiasCondition", "CellDesign", "CellState", "Equilibrium", "SimSettings",
    "Trajectory", "Waveform", "classify_state", "find_equilibria", "hold_bias",
    "separatrix_point", "simulate_transient", "solve_vtc", "stable_state",
    "write_drive",
    "ExperimentConfig", "config_hash", "default_config", "design_from_widths",
    "load_config", "make_design", "parse_config", "ramp_config",
    "scaled_pullup_design", "serialize", "sim_settings", "variation_model",
    "MosParams", "drain_current", "mirror_p_from_n",
    "ConfigError", "DivergenceError", "SolverError", "SramMarginError",
    "MetricResult", "RampConfig", "attempt_write", "bwtv", "bwtv_batch",
    "critical_pulse_width", "wlvm_batch", "wlvm_cell", "write_noise_margin",
    "wwtv", "wwtv_batch",
    "DistributionSummary", "HistogramCdf", "histogram_cdf", "pearson",
    "summarize",
    "McOutcome", "SampleId", "VariationModel", "monte_carlo", "sample_cell",
    "sample_population", "sigma_vth", "standard_normal",
    "__version__",
]
