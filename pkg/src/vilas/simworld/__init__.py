"""Kinematic world: arm chain, gripper contact rules, scene, and renderer."""

from .arm import (
    JointLimitError,
    UnreachableError,
    clamp_joints,
    forward_kinematics,
    inverse_kinematics,
)
from .render import png_decode, png_encode, render, resize_to_policy
from .world import (
    DEPOSITED,
    DROPPED,
    FREE,
    HELD,
    GraspOutcome,
    JointState,
    PlacementError,
    SimCommandError,
    World,
    WorldObject,
    WorldState,
    attempt_grasp,
    opening_width,
    scatter_objects,
)

__all__ = [
    "JointLimitError",
    "UnreachableError",
    "clamp_joints",
    "forward_kinematics",
    "inverse_kinematics",
    "png_decode",
    "png_encode",
    "render",
    "resize_to_policy",
    "DEPOSITED",
    "DROPPED",
    "FREE",
    "HELD",
    "GraspOutcome",
    "JointState",
    "PlacementError",
    "SimCommandError",
    "World",
    "WorldObject",
    "WorldState",
    "attempt_grasp",
    "opening_width",
    "scatter_objects",
]
