"""On-disk episode format: load, validate, and write atomically.

Layout per episode:

    <episode_id>/
      meta.json            # EpisodeMeta
      states.jsonl         # one object per frame:
                           #   {"index", "t_ms", "state": [7], "action": [7],
                           #    "prompt"}
      cam_base/000000.png  # 224x224 RGB, one per frame
      cam_wrist/000000.png

Recording happens in a hidden temp directory that is renamed into place on
completion, so a crash can never leave a directory the loader accepts.
"""

from __future__ import annotations

import dataclasses
import json
import os
import shutil
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

__all__ = [
    "IntegrityError",
    "EpisodeMeta",
    "EpisodeFrame",
    "EpisodeWriter",
    "load_episode",
    "iter_frames",
]

STATES_FILE = "states.jsonl"
META_FILE = "meta.json"
CAM_DIRS = ("cam_base", "cam_wrist")


class IntegrityError(RuntimeError):
    """An episode directory is missing data or inconsistent with its meta."""

    def __init__(self, message: str, file: str | None = None,
                 frame_index: int | None = None):
        detail = message
        if file is not None:
            detail += f" (file: {file}"
            if frame_index is not None:
                detail += f", frame {frame_index}"
            detail += ")"
        super().__init__(detail)
        self.file = file
        self.frame_index = frame_index


@dataclass
class EpisodeMeta:
    episode_id: str
    prompt: str
    record_rate_hz: float
    frame_count: int
    created_at: str
    seed: int | None = None
    truncated: bool = False
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "EpisodeMeta":
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in raw.items() if k in known})


@dataclass
class EpisodeFrame:
    index: int
    t_ms: float
    state: list[float]
    action: list[float]
    prompt: str
    image_base: Path
    image_wrist: Path

    def record(self) -> dict:
        return {
            "index": self.index,
            "t_ms": self.t_ms,
            "state": self.state,
            "action": self.action,
            "prompt": self.prompt,
        }


class EpisodeWriter:
    """Streaming writer with atomic completion."""

    def __init__(self, out_root: str | Path, episode_id: str | None = None):
        self.episode_id = episode_id or uuid.uuid4().hex[:12]
        self.out_root = Path(out_root)
        self.final_dir = self.out_root / self.episode_id
        if self.final_dir.exists():
            raise FileExistsError(f"episode {self.episode_id} already exists")
        self.tmp_dir = self.out_root / f".tmp-{self.episode_id}"
        self.tmp_dir.mkdir(parents=True)
        for cam in CAM_DIRS:
            (self.tmp_dir / cam).mkdir()
        self._states = open(self.tmp_dir / STATES_FILE, "w", encoding="utf-8")
        self.frame_count = 0
        self._last_t_ms: float | None = None

    def add_frame(self, t_ms: float, state, action, prompt: str,
                  png_base: bytes, png_wrist: bytes) -> int:
        if self._last_t_ms is not None and t_ms <= self._last_t_ms:
            raise ValueError(
                f"frame timestamps must increase: {t_ms} after {self._last_t_ms}")
        index = self.frame_count
        record = {
            "index": index,
            "t_ms": float(t_ms),
            "state": [float(v) for v in state],
            "action": [float(v) for v in action],
            "prompt": prompt,
        }
        if len(record["state"]) != 7 or len(record["action"]) != 7:
            raise ValueError("state and action must have exactly 7 entries")
        name = f"{index:06d}.png"
        (self.tmp_dir / "cam_base" / name).write_bytes(png_base)
        (self.tmp_dir / "cam_wrist" / name).write_bytes(png_wrist)
        self._states.write(json.dumps(record) + "\n")
        self.frame_count += 1
        self._last_t_ms = t_ms
        return index

    def finalize(self, meta: EpisodeMeta) -> Path:
        """Write meta and atomically rename the temp dir into place."""
        meta.frame_count = self.frame_count
        self._states.flush()
        os.fsync(self._states.fileno())
        self._states.close()
        (self.tmp_dir / META_FILE).write_text(
            json.dumps(meta.to_dict(), indent=2) + "\n")
        os.rename(self.tmp_dir, self.final_dir)
        return self.final_dir

    def abort(self) -> None:
        try:
            self._states.close()
        except OSError:
            pass
        shutil.rmtree(self.tmp_dir, ignore_errors=True)


def load_episode(path: str | Path) -> tuple[EpisodeMeta, Iterator[EpisodeFrame]]:
    """Open a complete episode; verifies structure before streaming frames.

    Frame payloads come back exactly as written (states and actions are
    parsed from the same JSON that the writer emitted; images stay on disk
    untouched).
    """
    path = Path(path)
    meta_path = path / META_FILE
    if not meta_path.is_file():
        raise IntegrityError("episode is missing its meta", file=str(meta_path))
    meta = EpisodeMeta.from_dict(json.loads(meta_path.read_text()))
    states_path = path / STATES_FILE
    if not states_path.is_file():
        raise IntegrityError("episode is missing states", file=str(states_path))
    with open(states_path, encoding="utf-8") as fh:
        n_lines = sum(1 for _ in fh)
    if n_lines != meta.frame_count:
        raise IntegrityError(
            f"meta says {meta.frame_count} frames but found {n_lines}",
            file=str(states_path))
    for cam in CAM_DIRS:
        if not (path / cam).is_dir():
            raise IntegrityError("camera directory missing", file=str(path / cam))
        n_imgs = sum(1 for _ in (path / cam).glob("*.png"))
        if n_imgs != meta.frame_count:
            raise IntegrityError(
                f"{cam} holds {n_imgs} images for {meta.frame_count} frames",
                file=str(path / cam))
    return meta, iter_frames(path, meta)


def iter_frames(path: str | Path, meta: EpisodeMeta) -> Iterator[EpisodeFrame]:
    path = Path(path)
    last_t: float | None = None
    with open(path / STATES_FILE, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IntegrityError(f"corrupt frame record: {exc}",
                                     file=STATES_FILE, frame_index=lineno)
            if rec.get("index") != lineno:
                raise IntegrityError("frame index mismatch",
                                     file=STATES_FILE, frame_index=lineno)
            if last_t is not None and rec["t_ms"] <= last_t:
                raise IntegrityError("timestamps not strictly increasing",
                                     file=STATES_FILE, frame_index=lineno)
            last_t = rec["t_ms"]
            name = f"{lineno:06d}.png"
            base = path / "cam_base" / name
            wrist = path / "cam_wrist" / name
            for img in (base, wrist):
                if not img.is_file():
                    raise IntegrityError("frame image missing",
                                         file=str(img), frame_index=lineno)
            yield EpisodeFrame(
                index=rec["index"], t_ms=rec["t_ms"], state=rec["state"],
                action=rec["action"], prompt=rec.get("prompt", meta.prompt),
                image_base=base, image_wrist=wrist)
