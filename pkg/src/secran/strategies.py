"""The four compared designs: {secure, non-secure} x {multivariate, point-to-point}."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optimizer import (
    ALL_STRATEGIES,
    CcCpTrace,
    StrategyFlags,
    run_cccp,
    rank_reduced_vars,
)
from .rates import DesignVariables, RateReport, evaluate_all
from .system import ChannelRealization, SystemConfig

__all__ = ["StrategyFlags", "ALL_STRATEGIES", "StrategyResult", "run_strategy", "evaluate_all",
           "parse_strategies"]


@dataclass
class StrategyResult:
    flags: StrategyFlags
    covariances: DesignVariables
    vars: DesignVariables
    precoders: list[np.ndarray]
    report: RateReport
    trace: CcCpTrace
    rank_gap: float


def parse_strategies(text: str) -> list[StrategyFlags]:
    """``"all"`` or a comma-separated list of labels such as ``secure-p2p``."""
    if text.strip().lower() == "all":
        return list(ALL_STRATEGIES)
    return [StrategyFlags.from_label(s) for s in text.split(",") if s.strip()]


def run_strategy(flags: StrategyFlags, config: SystemConfig, channels: ChannelRealization, *,
                 init_seed=0, init: DesignVariables | None = None, **cccp_kw) -> StrategyResult:
    """Optimize one design and evaluate it with the secrecy metrics.

    The reported rates use the rank-reduced precoders ``A_k``; the
    difference to the covariance-level secrecy sum-rate is ``rank_gap``.
    """
    rng = np.random.default_rng(init_seed)
    cov, trace = run_cccp(config, channels, flags, rng=rng, init=init, **cccp_kw)
    reduced, precoders = rank_reduced_vars(cov, config.streams)
    report = evaluate_all(reduced, config, channels)
    cov_report = evaluate_all(cov, config, channels, subsets=[])
    gap = cov_report.weighted_objective - report.weighted_objective
    report.extras.update(
        cccp_iterations=trace.iterations,
        converged=trace.converged and not trace.stalled,
        rank_gap=gap,
    )
    return StrategyResult(flags, cov, reduced, precoders, report, trace, gap)
