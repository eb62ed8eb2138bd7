"""WebSocket operator bridge: the wire between a browser console and teleop.

The bridge is the single authority for leader input: console clients send
``lead.set``/``lead.grip`` at whatever rate they manage (sample-and-hold fills
the gap to the 83.3 Hz loop), ``rec.start``/``rec.stop`` drive the episode
recorder, and every client receives ``view.state`` (10 Hz) and ``view.frame``
(5 Hz) streams. One controller owns the input channel at a time; additional
sessions are read-only observers and get a ``busy`` error if they try to
drive.

Messages are plain JSON texts (the WebSocket layer frames them; no length
prefix). See ``console/schema.json`` for the full message catalogue.
"""

from __future__ import annotations

import json
import logging
import threading

import numpy as np

from ..clock import Clock, SystemClock
from ..config import SystemConfig
from ..recorder import RecordSession
from ..transport import Connection, WsConnection, WsServer
from .sources import BridgeSource

__all__ = ["BridgeServer"]

log = logging.getLogger(__name__)

VIEW_STATE_HZ = 10.0
VIEW_FRAME_HZ = 5.0


class BridgeServer:
    """Bridge between WebSocket operator sessions and the teleop loop."""

    def __init__(self, source: BridgeSource, action_tap, cfg: SystemConfig,
                 arm_addr: str, camera_addr: str, records_dir: str,
                 port: int = 0, clock: Clock | None = None,
                 record_rate_hz: float = 30.0, max_frames: int = 1200):
        self.source = source
        self.action_tap = action_tap
        self.cfg = cfg
        self.arm_addr = arm_addr
        self.camera_addr = camera_addr
        self.records_dir = records_dir
        self.clock = clock or SystemClock()
        self.record_rate_hz = record_rate_hz
        self.max_frames = max_frames

        self._lock = threading.Lock()
        self._sessions: list[WsConnection] = []
        self._controller: WsConnection | None = None
        self._q: np.ndarray | None = None
        self._g = 0.0
        self._recorder: RecordSession | None = None
        self._recorder_thread: threading.Thread | None = None
        self.last_episode_path = None

        self._stop = threading.Event()
        self.server = WsServer(port, self._session, clock=SystemClock(),
                               name="bridge")
        self.port = self.server.port
        self._view_thread = threading.Thread(
            target=self._view_loop, name="bridge-view", daemon=True)
        self._view_thread.start()

    # -- session handling ---------------------------------------------------

    def _session(self, conn: WsConnection) -> None:
        with self._lock:
            self._sessions.append(conn)
            is_controller = self._controller is None
            if is_controller:
                self._controller = conn
        self._send(conn, {"t": "hello", "role":
                          "controller" if is_controller else "observer"})
        try:
            while not self._stop.is_set():
                _, payload = conn.recv_message()
                try:
                    msg = json.loads(payload.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    self._send(conn, {"t": "error", "code": "bad-json",
                                      "message": "payload is not JSON"})
                    continue
                self._handle(conn, msg)
        finally:
            with self._lock:
                if conn in self._sessions:
                    self._sessions.remove(conn)
                if self._controller is conn:
                    self._controller = None
                    # Operator vanished mid-recording: cut the episode but
                    # keep it loadable.
                    if self._recorder is not None and self._recorder.active:
                        self._recorder.stop(truncated=True)

    def _handle(self, conn: WsConnection, msg: dict) -> None:
        t = msg.get("t")
        if t in ("lead.set", "lead.grip") and conn is not self._controller:
            self._send(conn, {"t": "error", "code": "busy",
                              "message": "another controller owns this bridge"})
            return
        if t == "lead.set":
            q = msg.get("q")
            if not isinstance(q, list) or len(q) != 6:
                self._send(conn, {"t": "error", "code": "bad-arity",
                                  "message": "lead.set q must have 6 entries"})
                return
            self._q = np.asarray([float(v) for v in q])
            self._push()
        elif t == "lead.grip":
            g = msg.get("g")
            if not isinstance(g, (int, float)) or not 0.0 <= float(g) <= 1.0:
                self._send(conn, {"t": "error", "code": "bad-value",
                                  "message": "lead.grip g must be in [0, 1]"})
                return
            self._g = float(g)
            self._push()
        elif t == "rec.start":
            self._rec_start(conn, str(msg.get("prompt", "")))
        elif t == "rec.stop":
            self._rec_stop(conn)
        else:
            self._send(conn, {"t": "error", "code": "unknown-type",
                              "message": f"unsupported message type {t!r}"})

    def _push(self) -> None:
        if self._q is not None:
            self.source.push(np.concatenate([self._q, [self._g]]),
                             self.clock.now())

    # -- recording ------------------------------------------------------------

    def _rec_start(self, conn: WsConnection, prompt: str) -> None:
        with self._lock:
            if self._recorder is not None and self._recorder.active:
                self._send(conn, {"t": "error", "code": "recording",
                                  "message": "a recording is already running"})
                return

            def tap():
                action, t, _ = self.action_tap.get()
                if action is None:
                    return None
                return list(action), t * 1000.0

            session = RecordSession(
                self.camera_addr, tap, prompt, self.records_dir,
                rate_hz=self.record_rate_hz, max_frames=self.max_frames,
                clock=self.clock,
                config_snapshot={"bridge": True})
            self._recorder = session
            thread = threading.Thread(target=self._record_run, args=(session,),
                                      name="bridge-recorder", daemon=True)
            self._recorder_thread = thread
            thread.start()
        self._send(conn, {"t": "rec.start", "ok": True,
                          "episode_id": session.episode_id})

    def _record_run(self, session: RecordSession) -> None:
        try:
            self.last_episode_path = str(session.run())
            log.info("episode recorded: %s", self.last_episode_path)
        except Exception:
            log.exception("recording failed")

    def _rec_stop(self, conn: WsConnection) -> None:
        with self._lock:
            session = self._recorder
            thread = self._recorder_thread
        if session is None:
            self._send(conn, {"t": "error", "code": "not-recording",
                              "message": "no recording is running"})
            return
        session.stop()
        if thread is not None:
            thread.join(timeout=10.0)
        self._send(conn, {"t": "rec.stop", "ok": True,
                          "episode_id": session.episode_id,
                          "frames": session.frames_captured,
                          "path": self.last_episode_path,
                          "truncated": session.truncated})

    # -- view streaming ---------------------------------------------------------

    def _view_loop(self) -> None:
        debug: Connection | None = None
        camera: Connection | None = None
        period = 1.0 / VIEW_STATE_HZ
        frame_every = int(round(VIEW_STATE_HZ / VIEW_FRAME_HZ))
        tick = 0
        while not self._stop.is_set():
            self.clock.sleep(period)
            if not self._sessions:
                continue
            try:
                if debug is None:
                    debug = Connection(self.arm_addr, clock=self.clock)
                if camera is None:
                    camera = Connection(self.camera_addr, clock=self.clock)
                state = self._view_state(debug)
                self._broadcast(state)
                if tick % frame_every == 0:
                    shot = camera.request("cam.get", {}).body
                    self._broadcast({"t": "view.frame",
                                     "images": shot["images"],
                                     "t_ms": shot["t_ms"]})
            except (ConnectionError, OSError, RuntimeError) as exc:
                log.warning("view loop device hiccup: %s", exc)
                for c in (debug, camera):
                    if c is not None:
                        c.close()
                debug = camera = None
            tick += 1

    def _view_state(self, debug: Connection) -> dict:
        body = debug.request("world.debug", {}).body
        rec = self._recorder
        return {
            "t": "view.state",
            "joints": body["joints"],
            "tcp": body["tcp"],
            "objects": [{"id": o["id"], "status": o["status"]}
                        for o in body["objects"]],
            "recorder": {
                "active": bool(rec is not None and rec.active),
                "frames": 0 if rec is None else rec.frames_captured,
                "episode_id": None if rec is None else rec.episode_id,
            },
            "t_ms": self.clock.now_ms(),
        }

    def _broadcast(self, msg: dict) -> None:
        payload = json.dumps(msg)
        with self._lock:
            targets = list(self._sessions)
        for conn in targets:
            self._send(conn, payload)

    def _send(self, conn: WsConnection, msg) -> None:
        payload = msg if isinstance(msg, str) else json.dumps(msg)
        try:
            conn.send_message(payload)
        except Exception:
            with self._lock:
                if conn in self._sessions:
                    self._sessions.remove(conn)

    def close(self) -> None:
        self._stop.set()
        if self._recorder is not None and self._recorder.active:
            self._recorder.stop(truncated=True)
        self.server.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
