"""Pilot assignment and max-min power control for multi-cell massive MIMO."""

__version__ = "0.1.0"

from .topology import ConfigError, NetworkScenario, SystemConfig, generate_scenario
from .correlation import ChannelStatistics, build_statistics, exp_correlation
from .estimation import (AssignmentError, EstimationStats, Estimator, IllConditionedError,
                         estimate_covariance, estimation_stats, nmse)
from .se import DL, UL, Coupling, PowerAllocation, SEReport, coupling, evaluate
from .assignment import (AssignmentTrace, Objective, exhaustive_assignment, greedy_assignment,
                         joint_assignment, random_assignment, single_direction_assignment)
from .power import PowerControlResult, maxmin_power
from .montecarlo import ValidationReport, mc_validate_sinr_terms, sample_channels

__all__ = [
    "AssignmentError", "AssignmentTrace", "ChannelStatistics", "ConfigError", "Coupling", "DL",
    "EstimationStats", "Estimator", "IllConditionedError", "NetworkScenario", "Objective",
    "PowerAllocation", "PowerControlResult", "SEReport", "SystemConfig", "UL",
    "ValidationReport", "build_statistics", "coupling", "estimate_covariance",
    "estimation_stats", "evaluate", "exhaustive_assignment", "exp_correlation",
    "generate_scenario", "greedy_assignment", "joint_assignment", "maxmin_power",
    "mc_validate_sinr_terms", "nmse", "random_assignment", "sample_channels",
    "single_direction_assignment",
]
