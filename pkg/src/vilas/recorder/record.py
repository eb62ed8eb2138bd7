"""Synchronized 30 Hz episode capture during a teleop session.

Each tick pairs the freshest camera images (cached per 30 Hz window on the
service side), the current follower state, and the last calibrated leader
command from the action tap, all by sample-and-hold. Frames are written as
they arrive and the episode directory appears atomically on completion.
"""

from __future__ import annotations

import base64
import datetime
import logging
import threading
import uuid

from ..clock import Clock, SystemClock
from ..transport import Connection, RequestTimeout
from .episode import EpisodeMeta, EpisodeWriter

__all__ = ["RecordSession", "record"]

log = logging.getLogger(__name__)


class TapClient:
    """Action source backed by the teleop tap service."""

    def __init__(self, addr: str, clock: Clock):
        self.conn = Connection(addr, clock=clock)

    def __call__(self):
        reply = self.conn.request("teleop.tap", {})
        if reply.body.get("action") is None:
            return None
        return reply.body["action"], reply.body["t_ms"]

    def close(self) -> None:
        self.conn.close()


class RecordSession:
    """One recording; drive with run() and stop with stop().

    ``action_source`` is a callable returning ``(action7, t_ms)`` or ``None``
    before the first command; it is either an in-process latest-value tap or
    a :class:`TapClient` talking to a separate teleop process.
    """

    def __init__(self, camera_addr: str, action_source, prompt: str,
                 out_root, rate_hz: float = 30.0, max_frames: int = 1200,
                 clock: Clock | None = None, episode_id: str | None = None,
                 seed: int | None = None, config_snapshot: dict | None = None):
        self.camera_addr = camera_addr
        self.action_source = action_source
        self.prompt = prompt
        self.out_root = out_root
        self.rate_hz = rate_hz
        self.max_frames = max_frames
        self.clock = clock or SystemClock()
        self.episode_id = episode_id or uuid.uuid4().hex[:12]
        self.seed = seed
        self.config_snapshot = config_snapshot or {}
        self._stop = threading.Event()
        self.result_path = None
        self.truncated = False
        self.frames_captured = 0
        self.active = False
        self._stop_truncated = False

    def stop(self, truncated: bool = False) -> None:
        """Finish the episode; ``truncated`` marks an externally cut session."""
        self._stop_truncated = truncated
        self._stop.set()

    def run(self):
        clock = self.clock
        writer = EpisodeWriter(self.out_root, episode_id=self.episode_id)
        cam = Connection(self.camera_addr, clock=clock)
        period = 1.0 / self.rate_hz
        truncated = False
        self.active = True
        try:
            with clock.working():
                next_tick = clock.now()
                while not self._stop.is_set() and writer.frame_count < self.max_frames:
                    clock.sleep_until(next_tick)
                    if self._stop.is_set():
                        break
                    next_tick += period
                    try:
                        self._capture_frame(writer, cam)
                        self.frames_captured = writer.frame_count
                    except (RequestTimeout, ConnectionError, OSError) as exc:
                        # Device went away mid-episode: keep what we have,
                        # mark the episode truncated.
                        log.warning("recording truncated: %s", exc)
                        truncated = True
                        break
        except Exception:
            writer.abort()
            raise
        finally:
            self.active = False
            cam.close()
        truncated = truncated or self._stop_truncated
        meta = EpisodeMeta(
            episode_id=writer.episode_id,
            prompt=self.prompt,
            record_rate_hz=self.rate_hz,
            frame_count=writer.frame_count,
            created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
            seed=self.seed,
            truncated=truncated,
            config=self.config_snapshot,
        )
        self.truncated = truncated
        self.result_path = writer.finalize(meta)
        return self.result_path

    def _capture_frame(self, writer: EpisodeWriter, cam: Connection) -> None:
        obs = cam.request("state.get", {"prompt": self.prompt}).body
        state = obs["joints"]
        tapped = self.action_source()
        if tapped is None:
            # No leader command yet: hold the current follower state.
            action = list(state)
        else:
            action = list(tapped[0])
        writer.add_frame(
            t_ms=self.clock.now_ms(),
            state=state,
            action=action,
            prompt=self.prompt,
            png_base=base64.b64decode(obs["images"]["base"]),
            png_wrist=base64.b64decode(obs["images"]["wrist"]),
        )


def record(camera_addr: str, action_source, prompt: str, out_root,
           rate_hz: float = 30.0, max_frames: int = 1200,
           clock: Clock | None = None, **kwargs):
    """One-shot convenience wrapper around :class:`RecordSession`."""
    session = RecordSession(
        camera_addr, action_source, prompt, out_root,
        rate_hz=rate_hz, max_frames=max_frames, clock=clock, **kwargs)
    return session.run()
