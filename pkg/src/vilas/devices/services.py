"""Arm, gripper, and camera services around one shared world.

Simulated time is driven by a fixed 250 Hz integration grid, decoupled from
request cadence: every access first catches the world up to the current clock
time in whole 4 ms steps, so observation latency never perturbs dynamics and
a request-quiet world still moves toward its last targets.
"""

from __future__ import annotations

import base64
import math
import threading

from ..clock import Clock, SystemClock
from ..config import SystemConfig
from ..simworld import World, png_encode, render, resize_to_policy
from ..transport import Envelope, Server, ServiceError

__all__ = ["WorldHandle", "DeviceHub", "ZERO_PAD"]

ZERO_PAD = [0.0] * 7


class WorldHandle:
    """Single-writer owner of the world with lazy fixed-step catch-up."""

    def __init__(self, cfg: SystemConfig, clock: Clock | None = None,
                 seed: int = 0, max_backlog_s: float = 2.0):
        self.cfg = cfg
        self.clock = clock or SystemClock()
        self.world = World(cfg, seed=seed)
        self.dt = 1.0 / cfg.sim_tick_hz
        self.max_backlog_s = max_backlog_s
        self._lock = threading.RLock()
        self._anchor = self.clock.now()
        self._steps_done = 0

    def advance(self) -> None:
        """Catch the world up to now in whole integration steps."""
        with self._lock:
            due = int((self.clock.now() - self._anchor) / self.dt)
            backlog = due - self._steps_done
            cap = int(self.max_backlog_s / self.dt)
            if backlog > cap:
                # Host stall (real clock only): drop the oldest backlog
                # instead of spiraling; motion semantics stay rate-limited.
                self._steps_done = due - cap
                backlog = cap
            for _ in range(backlog):
                self.world.step(self.dt)
                self._steps_done += 1

    def snapshot(self):
        with self._lock:
            self.advance()
            return self.world.snapshot()

    def mutate(self, fn):
        """Run ``fn(world)`` after catch-up, under the writer lock."""
        with self._lock:
            self.advance()
            return fn(self.world)

    def reset(self, seed: int, n_objects: int | None = None) -> None:
        with self._lock:
            self.world.reset(seed, n_objects=n_objects)
            self._anchor = self.clock.now()
            self._steps_done = 0


def _require(cond: bool, code: str, message: str) -> None:
    if not cond:
        raise ServiceError(code, message)


def _vector(body: dict, key: str, length: int) -> list[float]:
    value = body.get(key)
    _require(isinstance(value, list) and len(value) == length, "bad-arity",
             f"{key} must be a list of {length} numbers")
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ServiceError("bad-value", f"{key} contains non-numeric entries")
    _require(all(math.isfinite(v) for v in out), "bad-value",
             f"{key} contains non-finite entries")
    return out


class DeviceHub:
    """Hosts the three device services on their TCP ports.

    Message types: ``arm.command``, ``arm.state``, ``grip.command``,
    ``grip.state``, ``cam.get``, ``state.get``, plus ``sys.reset`` and the
    privileged ``world.debug`` (accepted on every port for convenience).
    ``state.get`` lives on the camera service so one round trip yields a
    complete observation with a single capture timestamp.
    """

    def __init__(self, cfg: SystemConfig, clock: Clock | None = None,
                 seed: int = 0, ports: tuple[int, int, int] | None = None):
        self.cfg = cfg
        self.clock = clock or SystemClock()
        self.handle = WorldHandle(cfg, self.clock, seed=seed)
        if ports is None:
            ports = (cfg.ports.arm, cfg.ports.gripper, cfg.ports.camera)
        self._cam_lock = threading.Lock()
        self._cam_window = -1
        self._cam_cache: dict | None = None
        self.arm_server = Server(ports[0], self._handle_arm,
                                 clock=self.clock, name="arm")
        self.grip_server = Server(ports[1], self._handle_grip,
                                  clock=self.clock, name="gripper")
        self.cam_server = Server(ports[2], self._handle_cam,
                                 clock=self.clock, name="camera")

    @property
    def ports(self) -> dict[str, int]:
        return {
            "arm": self.arm_server.port,
            "gripper": self.grip_server.port,
            "camera": self.cam_server.port,
        }

    def addr(self, service: str) -> str:
        return f"127.0.0.1:{self.ports[service]}"

    def close(self) -> None:
        self.arm_server.close()
        self.grip_server.close()
        self.cam_server.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- shared handlers ----------------------------------------------------

    def _handle_common(self, env: Envelope):
        if env.t == "sys.reset":
            seed = int(env.body.get("seed", 0))
            n = env.body.get("n_objects")
            self.handle.reset(seed, n_objects=None if n is None else int(n))
            with self._cam_lock:
                self._cam_window = -1
                self._cam_cache = None
            return "sys.reset", {"ok": True, "seed": seed}
        if env.t == "world.debug":
            snap = self.handle.snapshot()
            return "world.debug", {
                "sim_time": snap.sim_time,
                "seed": snap.rng_seed,
                "joints": snap.joints.flat(),
                "tcp": {"pos": [float(v) for v in snap.tcp_pos],
                        "yaw": snap.tcp_yaw},
                "contact_force": snap.contact_force,
                "objects": [
                    {
                        "id": o.id,
                        "center": [float(v) for v in o.center],
                        "diameter": o.diameter,
                        "status": o.status,
                    }
                    for o in snap.objects
                ],
            }
        raise ServiceError("unknown-type", f"unsupported message type {env.t!r}")

    def _handle_arm(self, env: Envelope, session: dict):
        if env.t == "arm.command":
            q = _vector(env.body, "q_target", 6)
            applied = self.handle.mutate(lambda w: w.set_arm_target(q))
            return "arm.command", {"ok": True,
                                   "q_target": [float(v) for v in applied]}
        if env.t == "arm.state":
            snap = self.handle.snapshot()
            return "arm.state", {
                "q": [float(v) for v in snap.joints.q],
                "tcp": {"pos": [float(v) for v in snap.tcp_pos],
                        "yaw": snap.tcp_yaw},
                "t_ms": self.clock.now_ms(),
            }
        return self._handle_common(env)

    def _handle_grip(self, env: Envelope, session: dict):
        gr = self.cfg.gripper
        if env.t == "grip.command":
            g = env.body.get("g")
            _require(isinstance(g, (int, float)) and math.isfinite(g),
                     "bad-value", "g must be a finite number")
            _require(0.0 <= g <= 1.0, "bad-value", "g outside [0, 1]")
            force = env.body.get("force")
            clamped = False
            applied_force = None
            if force is not None:
                applied_force = min(max(float(force), gr.force_min), gr.force_max)
                clamped = applied_force != float(force)
            speed = env.body.get("speed")
            self.handle.mutate(lambda w: w.set_grip_target(
                float(g), force=applied_force,
                speed=None if speed is None else float(speed)))
            body = {"ok": True, "g": float(g)}
            if force is not None:
                body["force_applied"] = applied_force
                body["force_clamped"] = clamped
            return "grip.command", body
        if env.t == "grip.state":
            snap = self.handle.snapshot()
            width = gr.stroke * (1.0 - snap.joints.g)
            return "grip.state", {
                "g": snap.joints.g,
                "width_mm": width * 1000.0,
                "contact_force": snap.contact_force,
                "t_ms": self.clock.now_ms(),
            }
        return self._handle_common(env)

    # -- camera ---------------------------------------------------------------

    def _capture(self) -> dict:
        """Render both cameras at most once per 30 Hz window."""
        cam = self.cfg.camera
        window = int(self.clock.now() * cam.rate_hz)
        with self._cam_lock:
            if window == self._cam_window and self._cam_cache is not None:
                return self._cam_cache
            snap = self.handle.snapshot()
            images = {}
            for name in ("base", "wrist"):
                native = render(snap, name, self.cfg)
                small = resize_to_policy(native, cam)
                images[name] = base64.b64encode(png_encode(small)).decode("ascii")
            self._cam_cache = {
                "images": images,
                "t_ms": self.clock.now_ms(),
                "joints": snap.joints.flat(),
                "tcp": {"pos": [float(v) for v in snap.tcp_pos],
                        "yaw": snap.tcp_yaw},
            }
            self._cam_window = window
            return self._cam_cache

    def _handle_cam(self, env: Envelope, session: dict):
        if env.t == "cam.get":
            which = env.body.get("camera", "both")
            _require(which in ("base", "wrist", "both"), "unknown-camera",
                     f"no camera named {which!r}")
            shot = self._capture()
            images = shot["images"]
            if which != "both":
                images = {which: images[which]}
            return "cam.get", {"images": images, "t_ms": shot["t_ms"]}
        if env.t == "state.get":
            # Fresh joints (matching arm.state/grip.state) paired with the
            # latest cached image pair; t_ms is the images' shared capture
            # timestamp.
            shot = self._capture()
            snap = self.handle.snapshot()
            return "state.get", {
                "joints": snap.joints.flat(),
                "tcp": {"pos": [float(v) for v in snap.tcp_pos],
                        "yaw": snap.tcp_yaw},
                "images": dict(shot["images"]),
                "prompt": str(env.body.get("prompt", "")),
                "pad": list(ZERO_PAD),
                "t_ms": shot["t_ms"],
            }
        return self._handle_common(env)
