"""Leader sample sources feeding the forwarding loop.

All sources hand the loop the latest 7-vector (6 arm joints + gripper) via
``sample(now)``; slower producers rely on sample-and-hold. Exactly one source
kind is active per session: a scripted trajectory file, an episode replay, or
the interactive bridge cell fed by the operator console.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np

__all__ = ["LatestCell", "ScriptedSource", "ReplaySource", "BridgeSource"]


class LatestCell:
    """Single-producer/single-consumer latest-value cell.

    New samples overwrite unread ones: readers always see the freshest value
    plus the time it was produced.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None
        self._t = None
        self._seq = 0

    def set(self, value, t: float) -> None:
        with self._lock:
            self._value = value
            self._t = t
            self._seq += 1

    def get(self):
        """Returns (value, produced_at, seq); value is None before first set."""
        with self._lock:
            return self._value, self._t, self._seq


class ScriptedSource:
    """Trajectory playback from a JSON waypoint list.

    File format: ``[{"t_s": <seconds>, "q": [7 floats]}, ...]`` with
    non-decreasing times; samples are linearly interpolated and held at the
    endpoints. Time is measured from the first call.
    """

    def __init__(self, waypoints: list[dict]):
        if not waypoints:
            raise ValueError("scripted trajectory needs at least one waypoint")
        pts = sorted(waypoints, key=lambda w: w["t_s"])
        self.times = np.array([float(w["t_s"]) for w in pts])
        self.values = np.array([[float(v) for v in w["q"]] for w in pts])
        if self.values.shape[1] != 7:
            raise ValueError("waypoints must carry 7 values")
        self._t0: float | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedSource":
        return cls(json.loads(Path(path).read_text()))

    @property
    def duration_s(self) -> float:
        return float(self.times[-1])

    def sample(self, now: float):
        if self._t0 is None:
            self._t0 = now
        t = now - self._t0
        q = np.array([np.interp(t, self.times, self.values[:, i])
                      for i in range(7)])
        return q, now


class ReplaySource:
    """Replays a recorded episode's action channel with zero-order hold."""

    def __init__(self, frames_t_ms: list[float], actions: list[list[float]]):
        if len(frames_t_ms) != len(actions) or not actions:
            raise ValueError("need matching, non-empty times and actions")
        base = frames_t_ms[0]
        self.times = np.array([(t - base) / 1000.0 for t in frames_t_ms])
        self.actions = np.array(actions, dtype=float)
        self._t0: float | None = None

    @classmethod
    def from_episode(cls, path: str | Path) -> "ReplaySource":
        from ..recorder import load_episode

        meta, frames = load_episode(path)
        frames = list(frames)
        return cls([f.t_ms for f in frames], [f.action for f in frames])

    def sample(self, now: float):
        if self._t0 is None:
            self._t0 = now
        t = now - self._t0
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        idx = max(0, min(idx, len(self.actions) - 1))
        return self.actions[idx].copy(), now


class BridgeSource:
    """Latest-value cell written by the operator bridge."""

    def __init__(self):
        self.cell = LatestCell()

    def push(self, q7, t: float) -> None:
        q = np.asarray(q7, dtype=float)
        if q.shape != (7,):
            raise ValueError("bridge sample must have 7 entries")
        self.cell.set(q, t)

    def sample(self, now: float):
        value, t, _ = self.cell.get()
        if value is None:
            return None, None
        return value.copy(), t
