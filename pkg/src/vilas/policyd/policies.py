"""Mock policies: zeros, random walk, episode replay, and privileged oracle.

These stand in for learned models so the serving stack, chunk scheduling, and
evaluation protocol can be exercised end to end. The oracle is openly a
cheat: it reads ground-truth object state through the ``world.debug``
endpoint and plans a scripted grasp cycle; its job is validating plumbing and
metrics, not emulating a trained policy.
"""

from __future__ import annotations

import math

import numpy as np

from ..clock import Clock, SystemClock
from ..config import SystemConfig
from ..simworld import clamp_joints, inverse_kinematics
from ..transport import Connection

__all__ = ["ZerosPolicy", "RandomPolicy", "ReplayPolicy", "OraclePolicy",
           "make_policy_factory"]


class ZerosPolicy:
    """Constant all-zero chunks; the scheduling benchmark workload."""

    def __init__(self, horizon: int):
        self.horizon = horizon

    def chunk_for(self, doc: dict) -> np.ndarray:
        return np.zeros((self.horizon, 7))


class RandomPolicy:
    """Bounded random walk around the current joint state (~0% baseline)."""

    STEP_RAD = 0.05

    def __init__(self, horizon: int, cfg: SystemConfig, seed: int = 0):
        self.horizon = horizon
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)

    def chunk_for(self, doc: dict) -> np.ndarray:
        current = np.asarray(doc["joints"], dtype=float)
        out = np.empty((self.horizon, 7))
        state = current.copy()
        for i in range(self.horizon):
            state = state + self.rng.uniform(-self.STEP_RAD, self.STEP_RAD, 7)
            state[:6] = clamp_joints(self.cfg.arm, state[:6])
            state[6] = min(1.0, max(0.0, state[6]))
            out[i] = state
        return out


class ReplayPolicy:
    """Replays a recorded episode's actions as successive chunks.

    Actions are resampled from the episode's record rate to the control rate
    by zero-order hold at session start; each call returns the next
    ``horizon`` rows and the final row repeats after exhaustion.
    """

    def __init__(self, episode_path, horizon: int,
                 control_rate_hz: float = 20.0):
        from ..recorder import load_episode

        self.horizon = horizon
        meta, frames = load_episode(episode_path)
        frames = list(frames)
        if not frames:
            raise ValueError("cannot replay an empty episode")
        t0 = frames[0].t_ms
        rel_s = np.array([(f.t_ms - t0) / 1000.0 for f in frames])
        actions = np.array([f.action for f in frames], dtype=float)
        duration_s = meta.frame_count / meta.record_rate_hz
        n_out = int(round(duration_s * control_rate_hz))
        grid = np.arange(n_out) / control_rate_hz
        idx = np.clip(np.searchsorted(rel_s, grid, side="right") - 1,
                      0, len(frames) - 1)
        self.track = actions[idx]
        self.cursor = 0

    def chunk_for(self, doc: dict) -> np.ndarray:
        rows = []
        for _ in range(self.horizon):
            i = min(self.cursor, len(self.track) - 1)
            rows.append(self.track[i])
            self.cursor += 1
        return np.array(rows)


class OraclePolicy:
    """Privileged scripted grasper: nearest free object -> hover -> descend ->
    close -> lift -> carry over the box -> release, repeated.

    Plans in joint space via IK waypoints, replanning from the live world at
    every inference call, so a missed prediction self-heals on the next
    chunk. With no free objects left it parks above the box.
    """

    HOVER_Z = 0.10
    LIFT_Z = 0.15
    SETTLE_TICKS = 8
    TRACK_FRACTION = 0.7  # per-tick step budget vs. follower rate limit

    def __init__(self, horizon: int, cfg: SystemConfig, debug_addr: str,
                 clock: Clock | None = None, control_rate_hz: float = 20.0):
        self.horizon = horizon
        self.cfg = cfg
        self.clock = clock or SystemClock()
        self.debug = Connection(debug_addr, clock=self.clock)
        self.period = 1.0 / control_rate_hz
        self.box_center = self._rect_center(cfg.scene.box_region)
        self.park_q = inverse_kinematics(
            cfg.arm, (self.box_center[0], self.box_center[1], self.LIFT_Z))

    @staticmethod
    def _rect_center(rect):
        (x0, y0), (x1, y1) = rect
        return ((x0 + x1) / 2, (y0 + y1) / 2)

    def close(self) -> None:
        self.debug.close()

    # -- planning -----------------------------------------------------------

    def chunk_for(self, doc: dict) -> np.ndarray:
        world = self.debug.request("world.debug", {}).body
        plan = _PlanBuilder(self, np.asarray(doc["joints"], dtype=float))
        objects = world["objects"]
        held = next((o for o in objects if o["status"] == "held"), None)
        free = [o for o in objects if o["status"] == "free"]

        if held is not None:
            plan.deposit(held)
            held = None
        while not plan.full():
            target = self._nearest_free(free, plan.tcp_xy())
            if target is None:
                plan.park()
                break
            free = [o for o in free if o["id"] != target["id"]]
            grabbed = plan.grasp(target)
            if grabbed and not plan.full():
                plan.deposit(target)
        return plan.finish()

    def _nearest_free(self, free: list[dict], xy) -> dict | None:
        if not free:
            return None
        return min(free, key=lambda o: (math.hypot(o["center"][0] - xy[0],
                                                   o["center"][1] - xy[1]),
                                        o["id"]))

    def grip_for_diameter(self, diameter: float) -> float:
        # Close half a window beyond exact fit: firmly admissible and the
        # contact force stays under the soft cap.
        gr = self.cfg.gripper
        window = gr.compliance_window if gr.compliant_extension else gr.rigid_window
        width = diameter - window / 2
        return min(1.0, max(0.0, 1.0 - width / gr.stroke))


def make_policy_factory(kind: str, horizon: int, cfg: SystemConfig,
                        seed: int = 0, debug_addr: str | None = None,
                        clock: Clock | None = None,
                        control_rate_hz: float = 20.0):
    """Per-session policy builder from a CLI-style kind string.

    Kinds: ``zeros``, ``random``, ``replay:<episode-dir>``, ``oracle``.
    Each new server session gets a fresh instance (own RNG, replay cursor,
    or debug connection).
    """
    if kind == "zeros":
        return lambda: ZerosPolicy(horizon)
    if kind == "random":
        return lambda: RandomPolicy(horizon, cfg, seed=seed)
    if kind.startswith("replay:"):
        path = kind.split(":", 1)[1]
        return lambda: ReplayPolicy(path, horizon, control_rate_hz=control_rate_hz)
    if kind == "oracle":
        if debug_addr is None:
            raise ValueError("oracle policy needs a privileged world endpoint")
        return lambda: OraclePolicy(horizon, cfg, debug_addr, clock=clock,
                                    control_rate_hz=control_rate_hz)
    raise ValueError(f"unknown policy kind {kind!r}")


class _PlanBuilder:
    """Rolls out rate-limited joint waypoints into chunk rows."""

    def __init__(self, oracle: OraclePolicy, joints7: np.ndarray):
        self.o = oracle
        self.q = joints7[:6].copy()
        self.g = float(joints7[6])
        self.rows: list[np.ndarray] = []
        vel = np.asarray(oracle.cfg.arm.max_joint_velocity)
        self.step_cap = vel * oracle.period * oracle.TRACK_FRACTION

    def full(self) -> bool:
        return len(self.rows) >= self.o.horizon

    def tcp_xy(self):
        from ..simworld import forward_kinematics

        pos, _ = forward_kinematics(self.o.cfg.arm, self.q)
        return float(pos[0]), float(pos[1])

    def _emit(self) -> None:
        if not self.full():
            self.rows.append(np.concatenate([self.q, [self.g]]))

    def move_to(self, q_goal: np.ndarray) -> None:
        while not self.full() and np.max(np.abs(q_goal - self.q)) > 1e-9:
            self.q = self.q + np.clip(q_goal - self.q,
                                      -self.step_cap, self.step_cap)
            self._emit()

    def set_grip(self, g: float) -> None:
        self.g = g
        for _ in range(self.o.SETTLE_TICKS):
            self._emit()

    def ik(self, x: float, y: float, z: float) -> np.ndarray:
        return inverse_kinematics(self.o.cfg.arm, (x, y, z))

    def grasp(self, obj: dict) -> bool:
        """Plan a grasp; returns False when the chunk ran out mid-way."""
        x, y = obj["center"][0], obj["center"][1]
        top = obj["center"][2] + obj["diameter"] / 2
        q_grasp = self.ik(x, y, top)
        if np.max(np.abs(q_grasp - self.q)) > 0.05:
            # Approach from above; open the jaws on the way when closed.
            if self.g > 1e-6:
                self.set_grip(0.0)
            self.move_to(self.ik(x, y, self.o.HOVER_Z))
        elif self.g > 1e-6:
            self.set_grip(0.0)
        self.move_to(q_grasp)
        self.set_grip(self.o.grip_for_diameter(obj["diameter"]))
        return not self.full()

    def deposit(self, obj: dict) -> None:
        x, y = obj["center"][0], obj["center"][1]
        bx, by = self.o.box_center
        self.move_to(self.ik(x, y, self.o.LIFT_Z))
        self.move_to(self.ik(bx, by, self.o.LIFT_Z))
        self.set_grip(0.0)

    def park(self) -> None:
        self.move_to(self.o.park_q)
        while not self.full():
            self._emit()

    def finish(self) -> np.ndarray:
        while not self.full():
            self._emit()
        return np.array(self.rows)
