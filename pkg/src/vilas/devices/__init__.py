"""Device services: arm, gripper, and camera endpoints over the transport."""

from .services import DeviceHub, WorldHandle, ZERO_PAD

__all__ = ["DeviceHub", "WorldHandle", "ZERO_PAD"]
