"""Trial outcome records and latency statistics.

Success metrics: *single* = fraction of trials with at least one successful
grasp-and-deposit; *multi* = fraction with a run of at least two consecutive
successes (an any-two-of-three alternative is available behind a flag since
the definitional reading is genuinely ambiguous).

Latency statistics use the population standard deviation, the midpoint
median, and the nearest-rank P95 (the ceil(0.95 n)-th order statistic), so a
report is reproducible bit-for-bit from its run logs. Per-step cost is mean
latency divided by the action horizon, computed in decimal arithmetic so the
displayed 2-decimal rounding is exact.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

__all__ = [
    "UndefinedRateError",
    "TrialRecord",
    "LatencyStats",
    "latency_stats",
    "success_rates",
    "has_consecutive_run",
]


class UndefinedRateError(RuntimeError):
    """No usable trials: rates are undefined."""


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    attempt_outcomes: list[bool]
    wall_time_s: float = 0.0
    aborted: bool = False
    grasp_count: int = field(init=False)

    def __post_init__(self):
        if not self.aborted and len(self.attempt_outcomes) != 3:
            raise ValueError("a completed trial has exactly 3 attempts")
        self.grasp_count = sum(bool(o) for o in self.attempt_outcomes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrialRecord":
        raw = dict(raw)
        raw.pop("grasp_count", None)
        return cls(**raw)


def has_consecutive_run(outcomes, length: int = 2) -> bool:
    streak = 0
    for o in outcomes:
        streak = streak + 1 if o else 0
        if streak >= length:
            return True
    return False


def success_rates(records, multi_rule: str = "consecutive") -> dict:
    """Single/multi grasp success over non-aborted trials."""
    usable = [r for r in records if not r.aborted]
    if not usable:
        raise UndefinedRateError("no non-aborted trials to score")
    single = sum(1 for r in usable if r.grasp_count >= 1) / len(usable)
    if multi_rule == "consecutive":
        multi_hits = sum(
            1 for r in usable if has_consecutive_run(r.attempt_outcomes))
    elif multi_rule == "any2":
        multi_hits = sum(1 for r in usable if r.grasp_count >= 2)
    else:
        raise ValueError(f"unknown multi rule {multi_rule!r}")
    return {
        "single": single,
        "multi": multi_hits / len(usable),
        "n_trials": len(usable),
        "n_aborted": len(records) - len(usable),
        "multi_rule": multi_rule,
    }


@dataclass
class LatencyStats:
    mean_ms: float
    median_ms: float
    std_ms: float
    p95_ms: float
    horizon: int
    n_samples: int

    def per_step_decimal(self) -> Decimal:
        # Decimal keeps per_step * horizon == mean exact and makes the
        # half-up display rounding independent of binary representation.
        return Decimal(repr(self.mean_ms)) / self.horizon

    @property
    def per_step_ms(self) -> float:
        return float(self.per_step_decimal())

    def per_step_display(self) -> str:
        return str(self.per_step_decimal().quantize(
            Decimal("0.01"), rounding=ROUND_HALF_UP))

    def as_dict(self) -> dict:
        return {
            "mean_ms": self.mean_ms,
            "median_ms": self.median_ms,
            "std_ms": self.std_ms,
            "p95_ms": self.p95_ms,
            "horizon": self.horizon,
            "n_samples": self.n_samples,
            "per_step_ms": self.per_step_ms,
            "per_step_display": self.per_step_display(),
        }


def nearest_rank_p95(samples) -> float:
    ordered = sorted(float(s) for s in samples)
    rank = math.ceil(0.95 * len(ordered))
    return ordered[max(rank - 1, 0)]


def latency_stats(samples, horizon: int) -> LatencyStats:
    """Aggregate latency samples (ms) as reported per policy row."""
    samples = [float(s) for s in samples]
    if not samples:
        raise ValueError("latency statistics need at least one sample")
    arr = np.asarray(samples)
    return LatencyStats(
        mean_ms=float(arr.mean()),
        median_ms=float(np.median(arr)),
        std_ms=float(arr.std(ddof=0)),
        p95_ms=nearest_rank_p95(samples),
        horizon=horizon,
        n_samples=len(samples),
    )
