"""System configuration: arm chain, gripper, grasp rules, scene geometry, ports.

Everything the simulator and the services need to agree on lives here and can
be loaded from a single JSON file (``vilas <cmd> --config stack.json``).
Defaults match the reference hardware constants: 0.922 m reach, 52 mm gripper
stroke, 2-50 N force range, a 0.40 x 0.30 m tabletop workspace with ten
objects, and a fixed deposit box.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "ArmConfig",
    "GripperConfig",
    "GraspConfig",
    "SceneConfig",
    "CameraConfig",
    "PortsConfig",
    "SystemConfig",
    "OBJECT_PRESETS",
    "load_config",
]


@dataclass
class ArmConfig:
    # Chain: base yaw, shoulder pitch, elbow pitch, wrist pitch, wrist roll,
    # wrist yaw. Link lengths follow the three pitch joints and sum to reach.
    link_lengths: tuple[float, float, float] = (0.425, 0.395, 0.102)
    joint_axes: tuple[str, ...] = ("z", "y", "y", "y", "x", "z")
    joint_limits: tuple[tuple[float, float], ...] = (
        (-3.05, 3.05),
        (-2.10, 2.10),
        (-2.80, 2.80),
        (-2.90, 2.90),
        (-3.05, 3.05),
        (-3.05, 3.05),
    )
    max_joint_velocity: tuple[float, ...] = (3.0, 3.0, 3.0, 4.0, 4.0, 4.0)
    reach: float = 0.922

    def validate(self) -> None:
        if len(self.link_lengths) != 3:
            raise ValueError("arm chain uses exactly 3 link lengths")
        if abs(sum(self.link_lengths) - self.reach) > 1e-9:
            raise ValueError(
                f"link lengths sum {sum(self.link_lengths)} != reach {self.reach}"
            )
        if len(self.joint_limits) != 6 or len(self.max_joint_velocity) != 6:
            raise ValueError("need limits and velocities for 6 joints")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ValueError(f"joint limit [{lo}, {hi}] is empty")
        for v in self.max_joint_velocity:
            if v <= 0:
                raise ValueError("max joint velocity must be positive")


@dataclass
class GripperConfig:
    stroke: float = 0.052  # meters, fully open width at g=0
    force_min: float = 2.0  # newtons
    force_max: float = 50.0
    contact_stiffness: float = 2000.0  # N/m of over-closure
    compliant_extension: bool = True
    compliance_window: float = 0.006  # admissible over-closure with the soft tips
    rigid_window: float = 0.001  # admissible over-closure with bare fingers
    force_cap_soft: float = 10.0  # contact force ceiling with the soft tips
    speed: float = 4.0  # normalized closure units per second

    def validate(self) -> None:
        if not 0 < self.force_min < self.force_max:
            raise ValueError("need 0 < force_min < force_max")
        if self.stroke <= 0:
            raise ValueError("stroke must be positive")
        if self.compliance_window < 0 or self.rigid_window < 0:
            raise ValueError("closure windows must be non-negative")
        if self.rigid_window >= self.compliance_window:
            raise ValueError("rigid window must be narrower than compliance window")
        if not self.force_cap_soft < self.force_max:
            raise ValueError("soft force cap must sit below force_max")


@dataclass
class GraspConfig:
    grasp_radius: float = 0.015  # max horizontal TCP-to-center distance
    grasp_height_band: float = 0.020  # max |tcp_z - object top|
    approach_margin: float = 0.004  # closure may stop this far above diameter
    lift_height: float = 0.10  # tcp_z above which a held object counts as lifted
    diameter_range: tuple[float, float] = (0.018, 0.024)
    min_separation: float = 0.030


@dataclass
class SceneConfig:
    # Axis-aligned rectangles as [[x0, y0], [x1, y1]] in meters. The deposit
    # box sits inside the workspace so the top-down view covers both.
    workspace: tuple[tuple[float, float], tuple[float, float]] = (
        (0.25, -0.15),
        (0.65, 0.15),
    )
    box_region: tuple[tuple[float, float], tuple[float, float]] = (
        (0.26, 0.04),
        (0.36, 0.14),
    )
    n_objects: int = 10
    object_kind: str = "grape"
    # Home pose target for the TCP; chosen outside the camera footprint so a
    # reset scene renders only background, box and objects.
    home_tcp: tuple[float, float, float] = (0.70, 0.0, 0.25)

    def workspace_size(self) -> tuple[float, float]:
        (x0, y0), (x1, y1) = self.workspace
        return (x1 - x0, y1 - y0)


@dataclass
class CameraConfig:
    native_width: int = 640
    native_height: int = 480
    out_width: int = 224
    out_height: int = 224
    rate_hz: float = 30.0
    wrist_window: tuple[float, float] = (0.10, 0.075)  # meters covered by wrist view


@dataclass
class PortsConfig:
    arm: int = 5601
    gripper: int = 5602
    policy_mq: int = 5603
    bridge: int = 5604
    camera: int = 5605
    teleop_tap: int = 5606

    def arm_addr(self) -> str:
        return f"127.0.0.1:{self.arm}"

    def gripper_addr(self) -> str:
        return f"127.0.0.1:{self.gripper}"

    def camera_addr(self) -> str:
        return f"127.0.0.1:{self.camera}"


# Object presets: (diameter_range_m, rgb color). The cherry task reuses the
# whole stack and changes only these constants.
OBJECT_PRESETS: dict[str, dict] = {
    "grape": {"diameter_range": (0.018, 0.024), "color": (106, 36, 130)},
    "cherry": {"diameter_range": (0.020, 0.026), "color": (188, 26, 48)},
}


@dataclass
class SystemConfig:
    arm: ArmConfig = field(default_factory=ArmConfig)
    gripper: GripperConfig = field(default_factory=GripperConfig)
    grasp: GraspConfig = field(default_factory=GraspConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    ports: PortsConfig = field(default_factory=PortsConfig)
    sim_tick_hz: float = 250.0

    def validate(self) -> "SystemConfig":
        self.arm.validate()
        self.gripper.validate()
        if self.scene.object_kind not in OBJECT_PRESETS:
            raise ValueError(f"unknown object kind {self.scene.object_kind!r}")
        return self

    def with_object(self, kind: str) -> "SystemConfig":
        preset = OBJECT_PRESETS[kind]
        cfg = dataclasses.replace(
            self,
            scene=dataclasses.replace(self.scene, object_kind=kind),
            grasp=dataclasses.replace(
                self.grasp, diameter_range=tuple(preset["diameter_range"])
            ),
        )
        return cfg.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "SystemConfig":
        def build(target, data):
            kwargs = {}
            for f in dataclasses.fields(target):
                if f.name not in data:
                    continue
                v = data[f.name]
                if isinstance(v, list):
                    v = _tuplify(v)
                kwargs[f.name] = v
            return target(**kwargs)

        cfg = cls(
            arm=build(ArmConfig, raw.get("arm", {})),
            gripper=build(GripperConfig, raw.get("gripper", {})),
            grasp=build(GraspConfig, raw.get("grasp", {})),
            scene=build(SceneConfig, raw.get("scene", {})),
            camera=build(CameraConfig, raw.get("camera", {})),
            ports=build(PortsConfig, raw.get("ports", {})),
            sim_tick_hz=raw.get("sim_tick_hz", 250.0),
        )
        return cfg.validate()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def load_config(path: str | Path | None = None) -> SystemConfig:
    """Load a config file, or defaults when no path is given."""
    if path is None:
        return SystemConfig().validate()
    raw = json.loads(Path(path).read_text())
    return SystemConfig.from_dict(raw)


def addr_from_env(var: str, default: str) -> str:
    """Resolve a service address: explicit CLI value wins, else VILAS_* env."""
    return os.environ.get(var, default)
