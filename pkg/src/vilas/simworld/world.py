"""World state, rate-limited stepping, grasp rules, and object placement.

The world is purely kinematic: joints move toward targets under per-joint
velocity limits, a held object rides the TCP, and grasp/release outcomes are
decided by explicit geometric predicates rather than contact dynamics.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from ..config import SystemConfig
from .arm import clamp_joints, forward_kinematics, inverse_kinematics

__all__ = [
    "FREE",
    "HELD",
    "DEPOSITED",
    "DROPPED",
    "JointState",
    "WorldObject",
    "WorldState",
    "GraspOutcome",
    "World",
    "PlacementError",
    "SimCommandError",
    "attempt_grasp",
    "scatter_objects",
]

FREE = "free"
HELD = "held"
DEPOSITED = "deposited"
DROPPED = "dropped"

_SETTLE_EPS = 1e-6


class PlacementError(RuntimeError):
    """Object scattering could not satisfy the separation constraint."""


class SimCommandError(ValueError):
    """A step target was rejected; the world state is unchanged."""


@dataclass
class JointState:
    """Six arm joints (radians) plus normalized gripper, 0=open 1=closed."""

    q: np.ndarray
    g: float

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.shape != (6,):
            raise ValueError("joint state needs exactly 6 arm values")

    def flat(self) -> list[float]:
        return [*map(float, self.q), float(self.g)]

    @classmethod
    def from_flat(cls, values) -> "JointState":
        values = list(values)
        if len(values) != 7:
            raise ValueError("flat joint state has exactly 7 entries")
        return cls(q=np.array(values[:6], dtype=float), g=float(values[6]))

    def copy(self) -> "JointState":
        return JointState(q=self.q.copy(), g=self.g)


@dataclass
class WorldObject:
    id: int
    center: np.ndarray
    diameter: float
    status: str = FREE

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)

    @property
    def top(self) -> float:
        return float(self.center[2] + self.diameter / 2)


@dataclass
class WorldState:
    """Value snapshot of the world; safe to hand to other threads."""

    joints: JointState
    tcp_pos: np.ndarray
    tcp_yaw: float
    objects: list[WorldObject]
    workspace: tuple[tuple[float, float], tuple[float, float]]
    box_region: tuple[tuple[float, float], tuple[float, float]]
    sim_time: float
    rng_seed: int
    contact_force: float = 0.0

    def held_object(self) -> WorldObject | None:
        for obj in self.objects:
            if obj.status == HELD:
                return obj
        return None

    def count(self, status: str) -> int:
        return sum(1 for o in self.objects if o.status == status)


@dataclass
class GraspOutcome:
    held: bool
    object_id: int | None = None
    contact_force: float = 0.0


def in_rect(rect, x: float, y: float) -> bool:
    (x0, y0), (x1, y1) = rect
    return x0 <= x <= x1 and y0 <= y <= y1


def opening_width(cfg: SystemConfig, g: float) -> float:
    """Jaw opening in meters for a normalized closure value."""
    return cfg.gripper.stroke * (1.0 - g)


def closure_window(cfg: SystemConfig) -> float:
    gr = cfg.gripper
    return gr.compliance_window if gr.compliant_extension else gr.rigid_window


def contact_force_at(cfg: SystemConfig, diameter: float, width: float,
                     force_cmd: float | None = None) -> float:
    gr = cfg.gripper
    force = min(gr.contact_stiffness * max(0.0, diameter - width), gr.force_max)
    if gr.compliant_extension:
        force = min(force, gr.force_cap_soft)
    if force_cmd is not None:
        force = min(force, force_cmd)
    return force


def attempt_grasp(world: WorldState, commanded_g: float,
                  cfg: SystemConfig, force_cmd: float | None = None) -> GraspOutcome:
    """Grasp predicate: would a closure to ``commanded_g`` capture an object?

    Held iff a free object sits within ``grasp_radius`` horizontally, the TCP
    height is within ``grasp_height_band`` of the object top, and the
    commanded width lands in ``[diameter - window, diameter + approach_margin]``
    where the window widens from ``rigid_window`` to ``compliance_window``
    when the soft extension is mounted.
    """
    if not 0.0 <= commanded_g <= 1.0:
        raise ValueError(f"commanded gripper value {commanded_g} outside [0, 1]")
    gp = cfg.grasp
    width = opening_width(cfg, commanded_g)
    window = closure_window(cfg)
    tcp = world.tcp_pos

    best: WorldObject | None = None
    best_dist = math.inf
    for obj in world.objects:
        if obj.status != FREE:
            continue
        dist = math.hypot(obj.center[0] - tcp[0], obj.center[1] - tcp[1])
        if dist > gp.grasp_radius:
            continue
        if abs(tcp[2] - obj.top) > gp.grasp_height_band:
            continue
        if dist < best_dist:
            best, best_dist = obj, dist
    if best is None:
        return GraspOutcome(held=False)
    if not best.diameter - window <= width <= best.diameter + gp.approach_margin:
        return GraspOutcome(held=False)
    force = contact_force_at(cfg, best.diameter, width, force_cmd)
    return GraspOutcome(held=True, object_id=best.id, contact_force=force)


def scatter_objects(cfg: SystemConfig, seed: int, n: int | None = None,
                    min_separation: float | None = None,
                    max_attempts: int = 20000) -> list[WorldObject]:
    """Place ``n`` objects uniformly in the workspace, pairwise separated.

    Pure function of (seed, n, min_separation): rejection sampling from a
    seeded generator, erroring out if the attempt budget is exhausted.
    """
    n = cfg.scene.n_objects if n is None else n
    min_separation = (
        cfg.grasp.min_separation if min_separation is None else min_separation
    )
    (x0, y0), (x1, y1) = cfg.scene.workspace
    d_lo, d_hi = cfg.grasp.diameter_range
    rng = np.random.default_rng(seed)

    placed: list[WorldObject] = []
    attempts = 0
    while len(placed) < n:
        if attempts >= max_attempts:
            raise PlacementError(
                f"placed {len(placed)}/{n} objects after {max_attempts} attempts"
            )
        attempts += 1
        x = rng.uniform(x0, x1)
        y = rng.uniform(y0, y1)
        if any(math.hypot(x - o.center[0], y - o.center[1]) < min_separation
               for o in placed):
            continue
        d = rng.uniform(d_lo, d_hi)
        placed.append(WorldObject(
            id=len(placed), center=np.array([x, y, d / 2]), diameter=d))
    return placed


class World:
    """Owner of the mutable world; one writer advances it via :meth:`step`.

    Readers take :meth:`snapshot` copies. The gripper closure target doubles
    as the grasp command: a target increase arms a grasp attempt which
    resolves once the jaws settle at the commanded width.
    """

    def __init__(self, cfg: SystemConfig, seed: int = 0):
        self.cfg = cfg
        self.home_q = inverse_kinematics(cfg.arm, cfg.scene.home_tcp)
        self.force_cmd = cfg.gripper.force_max
        self.speed_cmd = 1.0
        self.reset(seed)

    def reset(self, seed: int, n_objects: int | None = None) -> None:
        cfg = self.cfg
        self.joints = JointState(q=self.home_q.copy(), g=0.0)
        self.target = JointState(q=self.home_q.copy(), g=0.0)
        pos, yaw = forward_kinematics(cfg.arm, self.joints.q)
        self.tcp_pos, self.tcp_yaw = pos, yaw
        self.objects = scatter_objects(cfg, seed, n=n_objects)
        self.sim_time = 0.0
        self.rng_seed = seed
        self.held_id: int | None = None
        self.contact_force = 0.0
        self._grasp_armed = False

    # -- commands ---------------------------------------------------------

    def set_arm_target(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (6,) or not np.all(np.isfinite(q)):
            raise SimCommandError(f"bad arm target {q!r}")
        self.target.q = clamp_joints(self.cfg.arm, q)
        return self.target.q.copy()

    def set_grip_target(self, g: float, force: float | None = None,
                        speed: float | None = None) -> None:
        if not (math.isfinite(g) and 0.0 <= g <= 1.0):
            raise SimCommandError(f"gripper target {g!r} outside [0, 1]")
        if g > self.target.g + _SETTLE_EPS:
            self._grasp_armed = True
        elif g < self.target.g - _SETTLE_EPS:
            self._grasp_armed = False
        self.target.g = float(g)
        if force is not None:
            gr = self.cfg.gripper
            self.force_cmd = min(max(force, gr.force_min), gr.force_max)
        if speed is not None:
            self.speed_cmd = speed

    # -- stepping ---------------------------------------------------------

    def step(self, dt: float) -> None:
        """Advance dt seconds toward the current targets."""
        if dt <= 0:
            raise SimCommandError("dt must be positive")
        cfg = self.cfg
        q = self.joints.q
        vel = np.asarray(cfg.arm.max_joint_velocity)
        delta = np.clip(self.target.q - q, -vel * dt, vel * dt)
        self.joints.q = clamp_joints(cfg.arm, q + delta)

        g_step = cfg.gripper.speed * dt
        dg = self.target.g - self.joints.g
        self.joints.g += max(-g_step, min(g_step, dg))
        self.joints.g = min(1.0, max(0.0, self.joints.g))

        self.tcp_pos, self.tcp_yaw = forward_kinematics(cfg.arm, self.joints.q)
        self.sim_time += dt

        self._update_contact()

    def step_toward(self, target: JointState, dt: float) -> None:
        """Set targets and advance one interval (direct driving, no services)."""
        self.set_arm_target(target.q)
        self.set_grip_target(target.g)
        self.step(dt)

    def _update_contact(self) -> None:
        cfg = self.cfg
        width = opening_width(cfg, self.joints.g)

        held = self._held_object()
        if held is not None:
            held.center = self.tcp_pos.copy()
            self.contact_force = contact_force_at(
                cfg, held.diameter, width, self.force_cmd)
            if width > held.diameter + cfg.grasp.approach_margin:
                self._release(held)
            return

        settled = abs(self.joints.g - self.target.g) <= _SETTLE_EPS
        if self._grasp_armed and settled:
            self._grasp_armed = False
            outcome = attempt_grasp(
                self.snapshot(), self.target.g, cfg, self.force_cmd)
            if outcome.held:
                obj = self._object_by_id(outcome.object_id)
                obj.status = HELD
                obj.center = self.tcp_pos.copy()
                self.held_id = obj.id
                self.contact_force = outcome.contact_force
                return
        self.contact_force = 0.0

    def _release(self, obj: WorldObject) -> None:
        x, y = float(self.tcp_pos[0]), float(self.tcp_pos[1])
        inside_box = in_rect(self.cfg.scene.box_region, x, y)
        obj.status = DEPOSITED if inside_box else DROPPED
        obj.center = np.array([x, y, obj.diameter / 2])
        self.held_id = None
        self.contact_force = 0.0

    def _held_object(self) -> WorldObject | None:
        if self.held_id is None:
            return None
        return self._object_by_id(self.held_id)

    def _object_by_id(self, oid: int) -> WorldObject:
        for obj in self.objects:
            if obj.id == oid:
                return obj
        raise KeyError(f"no object with id {oid}")

    # -- reading ----------------------------------------------------------

    def snapshot(self) -> WorldState:
        return WorldState(
            joints=self.joints.copy(),
            tcp_pos=self.tcp_pos.copy(),
            tcp_yaw=self.tcp_yaw,
            objects=copy.deepcopy(self.objects),
            workspace=self.cfg.scene.workspace,
            box_region=self.cfg.scene.box_region,
            sim_time=self.sim_time,
            rng_seed=self.rng_seed,
            contact_force=self.contact_force,
        )
