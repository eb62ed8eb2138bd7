"""Message framing and request-reply sessions shared by every service."""

from .channel import Connection, RequestTimeout, Server, ServiceError, parse_addr
from .framing import (
    MAX_FRAME_BYTES,
    Envelope,
    FrameDecoder,
    OversizeFrameError,
    ProtocolError,
    dumps_document,
    encode,
)
from .ws import WsClosed, WsConnection, WsError, WsServer, ws_connect

__all__ = [
    "Connection",
    "RequestTimeout",
    "Server",
    "ServiceError",
    "parse_addr",
    "MAX_FRAME_BYTES",
    "Envelope",
    "FrameDecoder",
    "OversizeFrameError",
    "ProtocolError",
    "dumps_document",
    "encode",
    "WsClosed",
    "WsConnection",
    "WsError",
    "WsServer",
    "ws_connect",
]
