"""Observation and action-chunk documents exchanged with policy servers.

Both protocols carry the exact same JSON documents; only the framing differs
(4-byte length prefix vs. one binary WebSocket message). Serialization goes
through one canonical writer so the payload bytes are identical across
protocols for identical inputs.
"""

from __future__ import annotations

import numpy as np

from ..transport import Connection, RequestTimeout, dumps_document

__all__ = [
    "ChunkShapeError",
    "ObservationUnavailable",
    "Observation",
    "ActionChunk",
    "fetch_observation",
    "observation_document",
    "observation_payload",
    "parse_chunk_document",
    "chunk_document",
]


class ChunkShapeError(RuntimeError):
    """Reply did not parse into a valid chunk of the configured horizon."""


class ObservationUnavailable(RuntimeError):
    """A device did not answer; the control loop holds position."""


class Observation:
    """Unified policy input: joints, dual images, prompt, zero pad."""

    def __init__(self, joints, images: dict[str, str], prompt: str, t_ms: float):
        self.joints = [float(v) for v in joints]
        if len(self.joints) != 7:
            raise ValueError("observation joints must have 7 entries")
        self.images = images
        self.prompt = prompt
        self.pad = [0.0] * 7
        self.t_ms = float(t_ms)


class ActionChunk:
    """H x 7 action matrix from one inference call."""

    def __init__(self, actions: np.ndarray, horizon: int, seq: int,
                 issued_at_ms: float):
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (horizon, 7):
            raise ChunkShapeError(
                f"chunk shape {actions.shape} != ({horizon}, 7)")
        if not np.all(np.isfinite(actions)):
            raise ChunkShapeError("chunk contains non-finite entries")
        self.actions = actions
        self.horizon = horizon
        self.seq = seq
        self.issued_at_ms = issued_at_ms
        # Real policies drift slightly out of range on the gripper channel;
        # clamp rather than reject.
        self.gripper_clamped = bool(
            np.any(actions[:, 6] < 0) or np.any(actions[:, 6] > 1))
        self.actions[:, 6] = np.clip(self.actions[:, 6], 0.0, 1.0)


def fetch_observation(camera_conn: Connection, prompt: str,
                      timeout: float = 5.0) -> Observation:
    """One ``state.get`` round trip -> a complete observation."""
    try:
        body = camera_conn.request(
            "state.get", {"prompt": prompt}, timeout=timeout).body
    except (RequestTimeout, ConnectionError, OSError) as exc:
        raise ObservationUnavailable(str(exc)) from exc
    return Observation(
        joints=body["joints"], images=body["images"],
        prompt=body["prompt"], t_ms=body["t_ms"])


def observation_document(obs: Observation, req_id: int) -> dict:
    """Canonical inference-request document (field order is part of the
    contract: both protocol adapters must emit identical bytes)."""
    return {
        "t": "infer",
        "id": req_id,
        "joints": obs.joints,
        "images": {"base": obs.images["base"], "wrist": obs.images["wrist"]},
        "prompt": obs.prompt,
        "pad": obs.pad,
        "t_ms": obs.t_ms,
    }


def observation_payload(obs: Observation, req_id: int) -> bytes:
    return dumps_document(observation_document(obs, req_id))


def chunk_document(actions, horizon: int, seq: int, req_id: int | None) -> dict:
    doc = {"t": "chunk"}
    if req_id is not None:
        doc["id"] = req_id
    doc["seq"] = seq
    doc["horizon"] = horizon
    doc["actions"] = [[float(v) for v in row] for row in np.asarray(actions)]
    return doc


def parse_chunk_document(doc: dict, horizon: int, issued_at_ms: float) -> ActionChunk:
    if doc.get("t") == "error":
        raise ChunkShapeError(
            f"policy error reply: {doc.get('code')}: {doc.get('message')}")
    if doc.get("t") != "chunk":
        raise ChunkShapeError(f"unexpected reply type {doc.get('t')!r}")
    if int(doc.get("horizon", -1)) != horizon:
        raise ChunkShapeError(
            f"server horizon {doc.get('horizon')} != configured {horizon}")
    return ActionChunk(
        actions=np.array(doc["actions"], dtype=float),
        horizon=horizon,
        seq=int(doc.get("seq", 0)),
        issued_at_ms=issued_at_ms,
    )
