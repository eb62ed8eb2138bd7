"""Length-prefixed JSON framing.

Wire format: a 4-byte big-endian payload byte count followed by a UTF-8 JSON
object serialized with no whitespace. Every message carries a string field
``t`` (its type); requests and replies additionally carry an integer ``id``
that replies must echo. Frames above 16 MiB are rejected on both sides.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

__all__ = [
    "MAX_FRAME_BYTES",
    "ProtocolError",
    "OversizeFrameError",
    "Envelope",
    "dumps_document",
    "encode",
    "FrameDecoder",
]

MAX_FRAME_BYTES = 16 * 1024 * 1024
_HEADER = struct.Struct(">I")


class ProtocolError(RuntimeError):
    """Wire-level violation; the connection must be closed."""


class OversizeFrameError(ProtocolError):
    """Declared or actual payload exceeds the 16 MiB cap."""


@dataclass
class Envelope:
    """One message: type, optional request id, and a type-specific body."""

    t: str
    id: int | None = None
    body: dict = field(default_factory=dict)

    def document(self) -> dict:
        doc: dict = {"t": self.t}
        if self.id is not None:
            doc["id"] = self.id
        doc.update(self.body)
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "Envelope":
        if not isinstance(doc, dict) or not isinstance(doc.get("t"), str):
            raise ProtocolError(f"payload is not an envelope: {doc!r}")
        body = {k: v for k, v in doc.items() if k not in ("t", "id")}
        return cls(t=doc["t"], id=doc.get("id"), body=body)


def dumps_document(doc: dict) -> bytes:
    """Canonical serialization: compact separators, insertion-ordered keys."""
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode(message: Envelope | dict) -> bytes:
    """Frame an envelope (or a raw JSON document) for the wire."""
    doc = message.document() if isinstance(message, Envelope) else message
    payload = dumps_document(doc)
    if len(payload) > MAX_FRAME_BYTES:
        raise OversizeFrameError(f"payload of {len(payload)} bytes exceeds cap")
    return _HEADER.pack(len(payload)) + payload


class FrameDecoder:
    """Incremental decoder tolerant of arbitrary fragmentation.

    Feed raw bytes as they arrive; complete envelopes come back in order and
    partial trailing bytes are retained for the next feed.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Envelope]:
        self._buf.extend(data)
        out: list[Envelope] = []
        while True:
            if len(self._buf) < _HEADER.size:
                return out
            (length,) = _HEADER.unpack_from(self._buf)
            if length > MAX_FRAME_BYTES:
                raise OversizeFrameError(f"declared length {length} exceeds cap")
            if len(self._buf) < _HEADER.size + length:
                return out
            payload = bytes(self._buf[_HEADER.size:_HEADER.size + length])
            del self._buf[:_HEADER.size + length]
            try:
                doc = json.loads(payload.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ProtocolError(f"payload is not valid JSON: {exc}") from exc
            out.append(Envelope.from_document(doc))

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)
