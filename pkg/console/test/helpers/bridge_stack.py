"""Launches devices + bridge teleop in one process for console tests.

Prints one JSON line with the chosen ports, then serves until stdin closes.
The virtual clock lets a 40 s recording finish in a few wall seconds while
operator input arrives live over the bridge WebSocket.
"""

import json
import sys
import threading

from vilas.clock import SystemClock, VirtualClock
from vilas.config import SystemConfig
from vilas.devices import DeviceHub
from vilas.teleop import BridgeServer, BridgeSource, LeaderCalibration, TeleopLoop


def main() -> None:
    clock_kind = sys.argv[1] if len(sys.argv) > 1 else "virtual"
    records_dir = sys.argv[2] if len(sys.argv) > 2 else "episodes"
    max_frames = int(sys.argv[3]) if len(sys.argv) > 3 else 1200
    clock = VirtualClock() if clock_kind == "virtual" else SystemClock()

    cfg = SystemConfig().validate()
    hub = DeviceHub(cfg, clock=clock, seed=4, ports=(0, 0, 0))
    source = BridgeSource()
    loop = TeleopLoop(
        source=source, calibration=LeaderCalibration.identity(),
        arm_addr=hub.addr("arm"), grip_addr=hub.addr("gripper"),
        cfg=cfg, clock=clock)
    bridge = BridgeServer(
        source, loop.action_tap, cfg, arm_addr=hub.addr("arm"),
        camera_addr=hub.addr("camera"), records_dir=records_dir, port=0,
        clock=clock, max_frames=max_frames)
    threading.Thread(target=loop.run, daemon=True).start()

    print(json.dumps({"bridge_port": bridge.port, "ports": hub.ports}),
          flush=True)
    try:
        sys.stdin.read()  # run until the parent closes our stdin
    finally:
        loop.stop()
        bridge.close()
        hub.close()


if __name__ == "__main__":
    main()
