"""Deployment control loop: one cached action per 50 ms tick.

A single inference call yields a chunk of ``horizon`` actions; the loop
dispatches one per control period and, once the chunk is exhausted, blocks on
a fresh inference while the follower holds its last commanded target (no new
commands are sent during the gap). Every tick and every inference call is
appended to a run log for offline timing analysis.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..clock import Clock, SystemClock
from ..teleop.sources import LatestCell
from ..transport import Connection, RequestTimeout
from .adapters import PolicyTimeout, PolicyTransportError, make_adapter
from .observation import ChunkShapeError, ObservationUnavailable, fetch_observation

__all__ = ["BrokerConfig", "PolicyUnavailable", "RunLog", "DeployLoop"]

log = logging.getLogger(__name__)


class PolicyUnavailable(RuntimeError):
    """Inference failed after all retries; the trial is over."""


@dataclass
class BrokerConfig:
    policy_addr: str
    protocol: str = "ws"  # ws | mq
    horizon: int = 50
    control_rate_hz: float = 20.0
    prompt: str = ""
    stall_policy: str = "hold"
    inference_timeout_s: float = 5.0
    inference_retries: int = 3

    def __post_init__(self):
        if self.control_rate_hz <= 0:
            raise ValueError("control rate must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.protocol not in ("ws", "mq"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.stall_policy != "hold":
            raise ValueError("only the hold stall policy is implemented")

    @property
    def period_s(self) -> float:
        return 1.0 / self.control_rate_hz


class RunLog:
    """In-memory event list, optionally mirrored to a JSON-lines file."""

    def __init__(self, path: str | Path | None = None):
        self.events: list[dict] = []
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def append(self, event: dict) -> None:
        self.events.append(event)
        if self._fh is not None:
            self._fh.write(json.dumps(event) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def inference_latencies(self) -> list[float]:
        return [e["latency_ms"] for e in self.events if e["event"] == "inference"]

    def inference_times(self) -> list[float]:
        return [e["t_send_ms"] for e in self.events if e["event"] == "inference"]

    def ticks(self) -> list[dict]:
        return [e for e in self.events if e["event"] == "tick"]


@dataclass
class DeployLoop:
    config: BrokerConfig
    arm_addr: str
    grip_addr: str
    camera_addr: str
    clock: Clock = field(default_factory=SystemClock)
    log_path: str | Path | None = None

    def __post_init__(self):
        self._stop = threading.Event()
        self.run_log = RunLog(self.log_path)
        self.action_tap = LatestCell()

    def stop(self) -> None:
        self._stop.set()

    def run(self, duration_s: float | None = None,
            max_ticks: int | None = None, on_tick=None) -> RunLog:
        """Run until duration, tick budget, stop(), or on_tick returns False."""
        cfg = self.config
        clock = self.clock
        adapter = make_adapter(cfg.protocol, cfg.policy_addr, clock=clock)
        arm = Connection(self.arm_addr, clock=clock)
        grip = Connection(self.grip_addr, clock=clock)
        camera = Connection(self.camera_addr, clock=clock)
        chunk = None
        k = 0
        tick = 0
        try:
            with clock.working():
                t_start = clock.now()
                next_tick = t_start
                while not self._stop.is_set():
                    clock.sleep_until(next_tick)
                    now = clock.now()
                    # The 1e-9 slack absorbs float accumulation of the tick
                    # grid so a 60 s run is exactly 1200 ticks.
                    if duration_s is not None and now - t_start >= duration_s - 1e-9:
                        break
                    if max_ticks is not None and tick >= max_ticks:
                        break
                    if chunk is None or k >= cfg.horizon:
                        chunk = self._infer(adapter, camera)
                        k = 0
                        # Dispatch resumes immediately after the blocking
                        # call: the tick grid restarts at the reply time.
                        next_tick = clock.now()
                    action = chunk.actions[k]
                    arm.request("arm.command",
                                {"q_target": [float(v) for v in action[:6]]})
                    grip.request("grip.command", {"g": float(action[6])})
                    self.action_tap.set(action.copy(), clock.now())
                    self.run_log.append({
                        "event": "tick", "tick": tick, "seq": chunk.seq,
                        "k": k, "t_ms": clock.now_ms(),
                    })
                    k += 1
                    tick += 1
                    if on_tick is not None and on_tick(tick) is False:
                        break
                    next_tick += cfg.period_s
        finally:
            adapter.close()
            arm.close()
            grip.close()
            camera.close()
            self.run_log.close()
        return self.run_log

    def _infer(self, adapter, camera):
        """Blocking inference with hold-and-retry on failure."""
        cfg = self.config
        last_error: Exception | None = None
        for attempt in range(cfg.inference_retries + 1):
            try:
                obs = fetch_observation(camera, cfg.prompt,
                                        timeout=cfg.inference_timeout_s)
                t_send = self.clock.now_ms()
                chunk, latency_ms = adapter.call(
                    obs, cfg.horizon, timeout=cfg.inference_timeout_s)
                self.run_log.append({
                    "event": "inference", "seq": chunk.seq,
                    "t_send_ms": t_send, "latency_ms": latency_ms,
                    "horizon": cfg.horizon, "attempt": attempt,
                    "gripper_clamped": chunk.gripper_clamped,
                })
                return chunk
            except (PolicyTimeout, PolicyTransportError, ChunkShapeError,
                    ObservationUnavailable, RequestTimeout) as exc:
                last_error = exc
                log.warning("inference attempt %d failed: %s", attempt, exc)
                self.run_log.append({
                    "event": "inference-error", "attempt": attempt,
                    "error": type(exc).__name__, "detail": str(exc),
                    "t_ms": self.clock.now_ms(),
                })
        raise PolicyUnavailable(
            f"policy at {cfg.policy_addr} unavailable: {last_error}")
