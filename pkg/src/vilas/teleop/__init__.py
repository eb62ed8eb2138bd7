"""Leader-to-follower forwarding: sources, calibration, loop, and bridge."""

from .bridge import BridgeServer
from .loop import (
    CalibrationError,
    LeaderCalibration,
    TeleopLoop,
    TeleopStats,
    calibrate,
    teleop_loop,
)
from .sources import BridgeSource, LatestCell, ReplaySource, ScriptedSource

__all__ = [
    "BridgeServer",
    "CalibrationError",
    "LeaderCalibration",
    "TeleopLoop",
    "TeleopStats",
    "calibrate",
    "teleop_loop",
    "BridgeSource",
    "LatestCell",
    "ReplaySource",
    "ScriptedSource",
]
