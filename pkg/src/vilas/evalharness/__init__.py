"""Trial protocol, success metrics, latency statistics, and reporting."""

from .metrics import (
    LatencyStats,
    TrialRecord,
    UndefinedRateError,
    has_consecutive_run,
    latency_stats,
    nearest_rank_p95,
    success_rates,
)
from .report import RunResult, render_text_table, write_report
from .trials import TrialConfig, run_one_trial, run_trials

__all__ = [
    "LatencyStats",
    "TrialRecord",
    "UndefinedRateError",
    "has_consecutive_run",
    "latency_stats",
    "nearest_rank_p95",
    "success_rates",
    "RunResult",
    "render_text_table",
    "write_report",
    "TrialConfig",
    "run_one_trial",
    "run_trials",
]
