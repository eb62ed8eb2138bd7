"""Deterministic inference-latency injection.

Samples are Gaussian clipped at zero, drawn from a seeded generator in server
call order: ``clip(default_rng(seed).normal(mean_ms, std_ms), 0, inf)``, one
per request. The recipe is part of the contract so an independent script can
regenerate the exact injected sequence and check measured statistics against
it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

__all__ = ["LatencyProfile", "LatencySampler"]


@dataclass(frozen=True)
class LatencyProfile:
    mean_ms: float = 0.0
    std_ms: float = 0.0
    seed: int = 0
    distribution: str = "gaussian-clipped-at-0"

    def __post_init__(self):
        if self.mean_ms < 0 or self.std_ms < 0:
            raise ValueError("latency mean and std must be non-negative")
        if self.distribution != "gaussian-clipped-at-0":
            raise ValueError(f"unknown distribution {self.distribution!r}")

    def sequence(self, n: int) -> np.ndarray:
        """The first n samples this profile will inject, in order."""
        rng = np.random.default_rng(self.seed)
        return np.clip(rng.normal(self.mean_ms, self.std_ms, n), 0.0, None)

    @property
    def is_zero(self) -> bool:
        return self.mean_ms == 0.0 and self.std_ms == 0.0


class LatencySampler:
    """FIFO sampler shared by all connections of one server."""

    def __init__(self, profile: LatencyProfile):
        self.profile = profile
        self._rng = np.random.default_rng(profile.seed)
        self._lock = threading.Lock()
        self.drawn = 0

    def next_ms(self) -> float:
        if self.profile.is_zero:
            return 0.0
        with self._lock:
            self.drawn += 1
            return float(max(0.0, self._rng.normal(
                self.profile.mean_ms, self.profile.std_ms)))
