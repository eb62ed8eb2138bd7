"""Arm kinematics for the simulated 6-DoF manipulator.

Chain layout (zero pose = fully extended along +x at base height):

    base yaw (z) -> shoulder pitch (y) -> link 0
                 -> elbow pitch (y)    -> link 1
                 -> wrist pitch (y)    -> link 2
                 -> wrist roll (x) -> wrist yaw (z) -> TCP

Positive pitch tilts the following link downward (rotation about +y maps +x
toward -z). The reported TCP pose is the position of the chain tip plus the
heading of the tool x-axis projected onto the ground plane.
"""

from __future__ import annotations

import math

import numpy as np

from ..config import ArmConfig

__all__ = [
    "JointLimitError",
    "UnreachableError",
    "clamp_joints",
    "forward_kinematics",
    "inverse_kinematics",
]


class JointLimitError(ValueError):
    """A joint value lies outside its configured limits."""


class UnreachableError(ValueError):
    """No joint solution reaches the requested TCP pose."""


def _rot(axis: str, a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    raise ValueError(f"unknown joint axis {axis!r}")


def clamp_joints(arm: ArmConfig, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    lo = np.array([l for l, _ in arm.joint_limits])
    hi = np.array([h for _, h in arm.joint_limits])
    return np.clip(q, lo, hi)


def check_limits(arm: ArmConfig, q) -> None:
    q = np.asarray(q, dtype=float)
    for i, ((lo, hi), v) in enumerate(zip(arm.joint_limits, q)):
        if not lo - 1e-12 <= v <= hi + 1e-12:
            raise JointLimitError(f"joint {i} value {v:.4f} outside [{lo}, {hi}]")


def forward_kinematics(arm: ArmConfig, q) -> tuple[np.ndarray, float]:
    """TCP position (m) and yaw (rad) for the given joint vector.

    Raises :class:`JointLimitError` for out-of-limit joints; callers that
    integrate motion clamp before calling.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (6,):
        raise ValueError(f"expected 6 joint values, got shape {q.shape}")
    check_limits(arm, q)

    # Links attach after the three pitch joints (indices 1, 2, 3).
    link_after = {1: arm.link_lengths[0], 2: arm.link_lengths[1], 3: arm.link_lengths[2]}
    rot = np.eye(3)
    pos = np.zeros(3)
    for i, axis in enumerate(arm.joint_axes):
        rot = rot @ _rot(axis, q[i])
        if i in link_after:
            pos = pos + rot @ np.array([link_after[i], 0.0, 0.0])
    yaw = math.atan2(rot[1, 0], rot[0, 0])
    return pos, yaw


def inverse_kinematics(
    arm: ArmConfig,
    target: np.ndarray | tuple[float, float, float],
    tool_pitch: float = math.pi / 2,
    wrist_roll: float = 0.0,
    wrist_yaw: float = 0.0,
) -> np.ndarray:
    """Joint vector placing the TCP at ``target``.

    ``tool_pitch`` is the cumulative pitch of the tool axis (pi/2 points the
    tool straight down, the natural grasp approach). Solves the base yaw
    analytically and the three pitch joints as a planar 3R chain; prefers the
    elbow-raised branch, falling back to the other branch when joint limits
    exclude it.
    """
    x, y, z = (float(v) for v in target)
    l1, l2, l3 = arm.link_lengths
    q0 = math.atan2(y, x)
    r = math.hypot(x, y)

    # Plane coordinates (a horizontal along the reach direction, b vertical).
    # A cumulative pitch of alpha advances by (cos a, -sin a) per unit length.
    wa = r - l3 * math.cos(tool_pitch)
    wb = z + l3 * math.sin(tool_pitch)

    d2 = wa * wa + wb * wb
    cos_elbow = (d2 - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if not -1.0 - 1e-9 <= cos_elbow <= 1.0 + 1e-9:
        raise UnreachableError(f"target {target} outside planar reach")
    cos_elbow = max(-1.0, min(1.0, cos_elbow))

    lo = np.array([l for l, _ in arm.joint_limits])
    hi = np.array([h for _, h in arm.joint_limits])
    solutions = []
    for elbow in (math.acos(cos_elbow), -math.acos(cos_elbow)):
        # Standard-orientation planar angles, then negate for the pitch-down
        # convention used by the chain.
        t1 = math.atan2(wb, wa) - math.atan2(
            l2 * math.sin(elbow), l1 + l2 * math.cos(elbow)
        )
        a1 = -t1
        a2 = -elbow
        a3 = tool_pitch - a1 - a2
        q = np.array([q0, a1, a2, a3, wrist_roll, wrist_yaw])
        if np.all(q >= lo - 1e-9) and np.all(q <= hi + 1e-9):
            # Elbow height selects the preferred branch deterministically.
            elbow_z = -l1 * math.sin(a1)
            solutions.append((elbow_z, q))
    if not solutions:
        raise UnreachableError(f"target {target} violates joint limits")
    solutions.sort(key=lambda s: -s[0])
    q = np.clip(solutions[0][1], lo, hi)

    pos, _ = forward_kinematics(arm, q)
    if np.linalg.norm(pos - np.array([x, y, z])) > 1e-6:
        raise UnreachableError(f"IK residual too large for target {target}")
    return q
