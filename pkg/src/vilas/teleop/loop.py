"""Leader-to-follower forwarding at a fixed 12 ms tick (83.3 Hz).

Each tick reads the freshest leader sample, maps it through the per-joint
calibration (follower = sign * leader + offset), clamps, and commands the arm
and gripper services. The latest calibrated command is also published to an
action tap for the episode recorder.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..clock import Clock, SystemClock
from ..config import SystemConfig
from ..simworld import clamp_joints
from ..transport import Connection, RequestTimeout, Server, ServiceError
from .sources import LatestCell

__all__ = [
    "CalibrationError",
    "LeaderCalibration",
    "calibrate",
    "TeleopStats",
    "TeleopLoop",
    "teleop_loop",
]

log = logging.getLogger(__name__)

TICK_S = 0.012  # 83.3 Hz nominal rate as a fixed period
STALL_TIMEOUT_S = 0.5


class CalibrationError(RuntimeError):
    pass


@dataclass
class LeaderCalibration:
    """Per-joint offset and sign applied to leader samples."""

    offset: np.ndarray
    sign: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float)
        self.sign = np.asarray(self.sign, dtype=float)
        if self.offset.shape != (7,) or self.sign.shape != (7,):
            raise ValueError("calibration needs 7 offsets and 7 signs")
        if not np.all(np.abs(self.sign) == 1.0):
            raise ValueError("signs must be exactly +1 or -1")

    def apply(self, leader: np.ndarray) -> np.ndarray:
        return self.sign * np.asarray(leader, dtype=float) + self.offset

    @classmethod
    def identity(cls) -> "LeaderCalibration":
        return cls(offset=np.zeros(7), sign=np.ones(7))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(
            {"offset": self.offset.tolist(), "sign": self.sign.tolist()},
            indent=2))

    @classmethod
    def from_file(cls, path: str | Path) -> "LeaderCalibration":
        raw = json.loads(Path(path).read_text())
        return cls(offset=np.array(raw["offset"]), sign=np.array(raw["sign"]))


def calibrate(samples, reference, signs=None,
              max_std: float = 0.01) -> LeaderCalibration:
    """Offsets from leader samples taken at a known follower pose.

    ``offset = reference - sign * mean(samples)`` per joint; signs come from
    configuration (default all +1). Noisy captures are rejected.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 7 or samples.shape[0] < 10:
        raise CalibrationError("need at least 10 leader samples of 7 values")
    reference = np.asarray(reference, dtype=float)
    sign = np.ones(7) if signs is None else np.asarray(signs, dtype=float)
    spread = samples.std(axis=0)
    if np.any(spread > max_std):
        raise CalibrationError(
            f"calibration unstable: per-joint std {spread.round(5).tolist()} "
            f"exceeds {max_std}")
    offset = reference - sign * samples.mean(axis=0)
    return LeaderCalibration(offset=offset, sign=sign)


@dataclass
class TeleopStats:
    ticks: int = 0
    commands: int = 0
    missed_ticks: int = 0
    stalled_ticks: int = 0
    retries: int = 0
    duration_s: float = 0.0
    achieved_rate_hz: float = 0.0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class _RetryingClient:
    """Device connection that survives timeouts with counted reconnects."""

    def __init__(self, addr: str, clock: Clock, stats: TeleopStats):
        self.addr = addr
        self.clock = clock
        self.stats = stats
        self._conn: Connection | None = None

    def request(self, t: str, body: dict, timeout: float = 1.0):
        for attempt in (0, 1):
            try:
                if self._conn is None:
                    self._conn = Connection(self.addr, clock=self.clock)
                return self._conn.request(t, body, timeout=timeout)
            except ServiceError:
                raise
            except (RequestTimeout, ConnectionError, OSError) as exc:
                self.stats.retries += 1
                if self._conn is not None:
                    self._conn.close()
                    self._conn = None
                if attempt == 1:
                    raise RequestTimeout(f"{t} to {self.addr} failed: {exc}")

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None


@dataclass
class TeleopLoop:
    """One forwarding session; run() blocks until duration or stop()."""

    source: object
    calibration: LeaderCalibration
    arm_addr: str
    grip_addr: str
    cfg: SystemConfig
    clock: Clock = field(default_factory=SystemClock)
    rate_hz: float = 83.3
    duration_s: float | None = None
    tap_port: int | None = None

    def __post_init__(self):
        self.stats = TeleopStats()
        self.action_tap = LatestCell()
        self._stop = threading.Event()
        self._tap_server: Server | None = None
        # The nominal 83.3 Hz is defined as an exact 12 ms tick.
        self.period = TICK_S if abs(self.rate_hz - 83.3) < 0.05 else 1.0 / self.rate_hz

    def stop(self) -> None:
        self._stop.set()

    def _serve_tap(self) -> None:
        def handler(env, session):
            if env.t != "teleop.tap":
                raise ServiceError("unknown-type", f"unsupported type {env.t!r}")
            action, t, seq = self.action_tap.get()
            if action is None:
                return "teleop.tap", {"seq": 0, "action": None, "t_ms": None}
            return "teleop.tap", {
                "seq": seq,
                "action": [float(v) for v in action],
                "t_ms": t * 1000.0,
            }

        self._tap_server = Server(self.tap_port, handler,
                                  clock=self.clock, name="teleop-tap")
        self.tap_port = self._tap_server.port

    def run(self) -> TeleopStats:
        arm = _RetryingClient(self.arm_addr, self.clock, self.stats)
        grip = _RetryingClient(self.grip_addr, self.clock, self.stats)
        if self.tap_port is not None:
            self._serve_tap()
        clock = self.clock
        stats = self.stats
        t_start = clock.now()
        next_tick = t_start
        try:
            with clock.working():
                while not self._stop.is_set():
                    clock.sleep_until(next_tick)
                    now = clock.now()
                    if (self.duration_s is not None
                            and now - t_start >= self.duration_s - 1e-9):
                        break
                    self._tick(arm, grip, now)
                    stats.ticks += 1
                    next_tick += self.period
                    behind = clock.now() - next_tick
                    if behind > self.period:
                        skipped = int(behind / self.period)
                        stats.missed_ticks += skipped
                        next_tick += skipped * self.period
        finally:
            arm.close()
            grip.close()
            if self._tap_server is not None:
                self._tap_server.close()
            stats.duration_s = clock.now() - t_start
            if stats.duration_s > 0:
                stats.achieved_rate_hz = stats.ticks / stats.duration_s
        return stats

    def _tick(self, arm: _RetryingClient, grip: _RetryingClient, now: float) -> None:
        stats = self.stats
        sample, produced_at = self.source.sample(now)
        if sample is None or now - produced_at > STALL_TIMEOUT_S:
            # Source went quiet: stop commanding until it resumes.
            stats.stalled_ticks += 1
            return
        cmd = self.calibration.apply(sample)
        cmd[:6] = clamp_joints(self.cfg.arm, cmd[:6])
        cmd[6] = min(1.0, max(0.0, cmd[6]))
        try:
            arm.request("arm.command", {"q_target": [float(v) for v in cmd[:6]]})
            grip.request("grip.command", {"g": float(cmd[6])})
        except RequestTimeout as exc:
            log.warning("teleop tick dropped: %s", exc)
            return
        self.action_tap.set(cmd.copy(), now)
        stats.commands += 1


def teleop_loop(source, calibration, arm_addr, grip_addr, cfg,
                rate_hz: float = 83.3, duration_s: float | None = None,
                clock: Clock | None = None,
                tap_port: int | None = None) -> TeleopStats:
    """Convenience one-shot runner; see :class:`TeleopLoop`."""
    loop = TeleopLoop(
        source=source, calibration=calibration, arm_addr=arm_addr,
        grip_addr=grip_addr, cfg=cfg, clock=clock or SystemClock(),
        rate_hz=rate_hz, duration_s=duration_s, tap_port=tap_port)
    return loop.run()
