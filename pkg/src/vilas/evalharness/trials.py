"""Trial protocol: scattered objects, three sequential grasp attempts each.

Each trial reseeds the world (base seed + trial id), scatters the objects,
and runs the deploy loop. Attempt boundaries are release events — an object
leaving the gripper as deposited (success) or dropped (failure) — plus a
per-attempt timeout for attempts that never produce a release. No homing
happens between attempts; the arm proceeds from wherever it stopped.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

from ..broker import BrokerConfig, DeployLoop, PolicyUnavailable
from ..clock import VirtualClock
from ..config import SystemConfig
from ..policyd import LatencyProfile
from ..runtime import Stack
from ..transport import Connection
from .metrics import TrialRecord

__all__ = ["TrialConfig", "run_trials", "run_one_trial"]

log = logging.getLogger(__name__)


@dataclass
class TrialConfig:
    policy_kind: str = "oracle"
    protocol: str = "ws"
    horizon: int = 50
    n_trials: int = 50
    base_seed: int = 7
    n_objects: int = 10
    attempts: int = 3
    attempt_timeout_s: float = 30.0
    control_rate_hz: float = 20.0
    prompt: str = "pick the grapes and place them in the box"
    clock_kind: str = "virtual"
    latency: LatencyProfile = field(default_factory=LatencyProfile)
    object_kind: str = "grape"
    parallel: int = 1
    poll_every_ticks: int = 5


class _AttemptWatcher:
    """Derives attempt outcomes from world deposit/drop counters."""

    def __init__(self, debug: Connection, clock, trial_cfg: TrialConfig):
        self.debug = debug
        self.clock = clock
        self.cfg = trial_cfg
        self.outcomes: list[bool] = []
        snap = self._counts()
        self.deposited = snap[0]
        self.dropped = snap[1]
        self.attempt_started = clock.now()

    def _counts(self) -> tuple[int, int]:
        body = self.debug.request("world.debug", {}).body
        dep = sum(1 for o in body["objects"] if o["status"] == "deposited")
        drp = sum(1 for o in body["objects"] if o["status"] == "dropped")
        return dep, drp

    def poll(self) -> bool:
        """Update outcomes; returns False once the trial is complete."""
        dep, drp = self._counts()
        now = self.clock.now()
        for _ in range(dep - self.deposited):
            self._record(True, now)
        for _ in range(drp - self.dropped):
            self._record(False, now)
        self.deposited, self.dropped = dep, drp
        if (now - self.attempt_started) >= self.cfg.attempt_timeout_s:
            self._record(False, now)
        return len(self.outcomes) < self.cfg.attempts

    def _record(self, success: bool, now: float) -> None:
        if len(self.outcomes) < self.cfg.attempts:
            self.outcomes.append(success)
            self.attempt_started = now


def run_one_trial(stack: Stack, trial_cfg: TrialConfig, trial_id: int):
    """Returns (TrialRecord, inference latencies in ms)."""
    clock = stack.clock
    seed = trial_cfg.base_seed + trial_id
    debug = Connection(stack.arm_addr, clock=clock)
    try:
        debug.request("sys.reset",
                      {"seed": seed, "n_objects": trial_cfg.n_objects})
        watcher = _AttemptWatcher(debug, clock, trial_cfg)
        broker = DeployLoop(
            BrokerConfig(
                policy_addr=stack.policy_addr(trial_cfg.protocol),
                protocol=trial_cfg.protocol,
                horizon=trial_cfg.horizon,
                control_rate_hz=trial_cfg.control_rate_hz,
                prompt=trial_cfg.prompt,
            ),
            arm_addr=stack.arm_addr,
            grip_addr=stack.grip_addr,
            camera_addr=stack.camera_addr,
            clock=clock,
        )

        def on_tick(tick: int):
            if tick % trial_cfg.poll_every_ticks != 0:
                return True
            return watcher.poll()

        t0 = clock.now()
        safety_s = trial_cfg.attempts * trial_cfg.attempt_timeout_s + 60.0
        try:
            run_log = broker.run(duration_s=safety_s, on_tick=on_tick)
        except PolicyUnavailable as exc:
            log.warning("trial %d aborted: %s", trial_id, exc)
            return (
                TrialRecord(trial_id=trial_id, seed=seed, attempt_outcomes=[],
                            wall_time_s=clock.now() - t0, aborted=True),
                [],
            )
        outcomes = list(watcher.outcomes)
        while len(outcomes) < trial_cfg.attempts:
            outcomes.append(False)
        record = TrialRecord(
            trial_id=trial_id, seed=seed, attempt_outcomes=outcomes,
            wall_time_s=clock.now() - t0)
        return record, run_log.inference_latencies()
    finally:
        debug.close()


def _make_stack(trial_cfg: TrialConfig, cfg: SystemConfig | None) -> Stack:
    base = (cfg or SystemConfig()).with_object(trial_cfg.object_kind)
    clock = VirtualClock() if trial_cfg.clock_kind == "virtual" else None
    return Stack(
        cfg=base, clock=clock, seed=trial_cfg.base_seed,
        policy_kind=trial_cfg.policy_kind, horizon=trial_cfg.horizon,
        protocols=(trial_cfg.protocol,), latency=trial_cfg.latency,
        control_rate_hz=trial_cfg.control_rate_hz)


def run_trials(trial_cfg: TrialConfig, cfg: SystemConfig | None = None):
    """Run the full protocol; returns (records, latencies_ms).

    Trials run sequentially on one stack by default. With ``parallel > 1``
    they shard across independent stacks (own world, clock, and ports), which
    leaves per-trial results identical because trials never share state.
    """
    if trial_cfg.parallel <= 1:
        with _make_stack(trial_cfg, cfg) as stack:
            results = [run_one_trial(stack, trial_cfg, i)
                       for i in range(trial_cfg.n_trials)]
    else:
        shards: list[list] = [[] for _ in range(trial_cfg.parallel)]
        threads = []

        def work(shard_idx: int):
            ids = range(shard_idx, trial_cfg.n_trials, trial_cfg.parallel)
            with _make_stack(trial_cfg, cfg) as stack:
                for i in ids:
                    shards[shard_idx].append(run_one_trial(stack, trial_cfg, i))

        for s in range(trial_cfg.parallel):
            th = threading.Thread(target=work, args=(s,), daemon=True)
            th.start()
            threads.append(th)
        for th in threads:
            th.join()
        results = sorted(
            (r for shard in shards for r in shard),
            key=lambda pair: pair[0].trial_id)

    records = [r for r, _ in results]
    latencies = [ms for _, lat in results for ms in lat]
    return records, latencies
