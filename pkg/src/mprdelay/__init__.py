"""Delay, stability and safe capacity of exponential-backoff networks with multipacket reception."""

from .access_delay import (
    DIVERGENT,
    AccessDelayModel,
    BackoffConstants,
    ServiceMoments,
    backoff_constants,
    is_divergent,
    mean_service_time,
    service_moments,
    service_transform,
)
from .capacity import (
    CapacityReport,
    PoissonSum,
    Scenario,
    Target,
    boundary_taus,
    capacity_report,
    classify_scenario,
    optimal_backoff_factor,
    safe_throughputs,
    scaling_sweep,
    throughput_vs_r_sweep,
)
from .config import ConfigError, RunConfig, load_config
from .contention import (
    AccessMode,
    NetworkConfig,
    SlotProbabilities,
    backoff_view_slot_probs,
    collision_prob_pc,
    generic_slot_probs,
)
from .errors import (
    DomainError,
    MprDelayError,
    NoCrossing,
    NoFixedPoint,
    NoSolution,
    SeriesDivergent,
    UnstableSystem,
)
from .saturation import SaturationPoint, saturation_sweep, solve_saturation
from .sim import SimConfig, SimStats, measured_tau, replicate, run_simulation
from .throughput import OperatingPoints, offered_load_roots, tau_star, throughput
from .timing import PhyParams, SlotTimes, slot_times
from .vacation import DelayStats, analyze_delay, delay_stats, rho_tilde_monotonicity_check

__all__ = [
    "DIVERGENT",
    "AccessDelayModel",
    "BackoffConstants",
    "ServiceMoments",
    "backoff_constants",
    "is_divergent",
    "mean_service_time",
    "service_moments",
    "service_transform",
    "CapacityReport",
    "PoissonSum",
    "Scenario",
    "Target",
    "boundary_taus",
    "capacity_report",
    "classify_scenario",
    "optimal_backoff_factor",
    "safe_throughputs",
    "scaling_sweep",
    "throughput_vs_r_sweep",
    "ConfigError",
    "RunConfig",
    "load_config",
    "AccessMode",
    "NetworkConfig",
    "SlotProbabilities",
    "backoff_view_slot_probs",
    "collision_prob_pc",
    "generic_slot_probs",
    "DomainError",
    "MprDelayError",
    "NoCrossing",
    "NoFixedPoint",
    "NoSolution",
    "SeriesDivergent",
    "UnstableSystem",
    "SaturationPoint",
    "saturation_sweep",
    "solve_saturation",
    "SimConfig",
    "SimStats",
    "measured_tau",
    "replicate",
    "run_simulation",
    "OperatingPoints",
    "offered_load_roots",
    "tau_star",
    "throughput",
    "PhyParams",
    "SlotTimes",
    "slot_times",
    "DelayStats",
    "analyze_delay",
    "delay_stats",
    "rho_tilde_monotonicity_check",
]

__version__ = "0.1.0"
