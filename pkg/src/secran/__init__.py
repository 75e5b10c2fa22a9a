"""Secure C-RAN downlink design: joint precoding and multivariate
fronthaul compression via a difference-of-convex (CCCP) procedure."""

from .hermitian import AntennaBlocks, logdet2, phi, varphi
from .optimizer import (
    ALL_STRATEGIES,
    CccpProblem,
    InfeasibleConfig,
    StrategyFlags,
    initialize_feasible,
    rank_reduce,
    run_cccp,
    solve_subproblem,
    validate_feasibility,
)
from .rates import DesignVariables, RateReport, evaluate_all
from .strategies import StrategyResult, run_strategy
from .system import ChannelRealization, ConfigError, SystemConfig, draw_realization

__version__ = "0.1.0"

__all__ = [
    "AntennaBlocks", "logdet2", "phi", "varphi",
    "ALL_STRATEGIES", "CccpProblem", "InfeasibleConfig", "StrategyFlags", "initialize_feasible",
    "rank_reduce", "run_cccp", "solve_subproblem", "validate_feasibility",
    "DesignVariables", "RateReport", "evaluate_all", "StrategyResult", "run_strategy",
    "ChannelRealization", "ConfigError", "SystemConfig", "draw_realization",
]
