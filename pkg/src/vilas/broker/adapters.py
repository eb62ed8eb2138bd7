"""Protocol adapters for the two policy-serving interfaces.

``mq``: one length-prefixed frame per direction over the request-reply TCP
channel. ``ws``: one binary WebSocket message per direction. Both carry the
identical observation/chunk JSON documents; switching servers is a matter of
address plus adapter name. Latency is measured at the adapter from request
send to chunk parse-complete.
"""

from __future__ import annotations

import json
import socket
import struct

from ..clock import Clock, SystemClock
from ..transport import FrameDecoder, ws_connect
from ..transport.channel import parse_addr
from .observation import (
    ActionChunk,
    Observation,
    observation_payload,
    parse_chunk_document,
)

__all__ = ["PolicyTransportError", "PolicyTimeout", "MqAdapter", "WsAdapter",
           "make_adapter"]


class PolicyTransportError(RuntimeError):
    """Connect/read/write failure, distinct from a timeout."""


class PolicyTimeout(RuntimeError):
    """The policy server did not answer within the deadline."""


class _AdapterBase:
    def __init__(self, addr: str, clock: Clock | None = None,
                 connect_timeout: float = 5.0):
        self.addr = addr
        self.clock = clock or SystemClock()
        self.connect_timeout = connect_timeout
        self._next_id = 1

    def call(self, obs: Observation, horizon: int,
             timeout: float = 5.0) -> tuple[ActionChunk, float]:
        """Send one observation, await one chunk; returns (chunk, latency_ms)."""
        req_id = self._next_id
        self._next_id += 1
        payload = observation_payload(obs, req_id)
        t0 = self.clock.now()
        try:
            reply = self._roundtrip(payload, timeout)
        except (TimeoutError, socket.timeout) as exc:
            raise PolicyTimeout(str(exc)) from exc
        except (ConnectionError, OSError) as exc:
            raise PolicyTransportError(str(exc)) from exc
        doc = json.loads(reply.decode("utf-8")) if isinstance(reply, bytes) else reply
        chunk = parse_chunk_document(doc, horizon, issued_at_ms=self.clock.now_ms())
        latency_ms = (self.clock.now() - t0) * 1000.0
        return chunk, latency_ms

    def _roundtrip(self, payload: bytes, timeout: float):
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MqAdapter(_AdapterBase):
    """Length-prefixed frames over a dedicated TCP connection."""

    def __init__(self, addr: str, clock: Clock | None = None,
                 connect_timeout: float = 5.0):
        super().__init__(addr, clock, connect_timeout)
        host, port = parse_addr(addr)
        try:
            self.sock = socket.create_connection((host, port),
                                                 timeout=connect_timeout)
        except OSError as exc:
            raise PolicyTransportError(f"connect to {addr} failed: {exc}") from exc
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._decoder = FrameDecoder()

    def _roundtrip(self, payload: bytes, timeout: float) -> dict:
        self.clock.msg_sent()
        self.sock.sendall(struct.pack(">I", len(payload)) + payload)
        self.sock.settimeout(timeout)
        while True:
            with self.clock.io_wait():
                data = self.sock.recv(65536)
            if not data:
                raise ConnectionError("policy server closed the connection")
            envelopes = self._decoder.feed(data)
            if envelopes:
                self.clock.msg_received()
                return envelopes[0].document()

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class WsAdapter(_AdapterBase):
    """One binary WebSocket message per direction."""

    def __init__(self, addr: str, clock: Clock | None = None,
                 connect_timeout: float = 5.0):
        super().__init__(addr, clock, connect_timeout)
        try:
            self.conn = ws_connect(addr, clock=self.clock,
                                   connect_timeout=connect_timeout)
        except OSError as exc:
            raise PolicyTransportError(f"connect to {addr} failed: {exc}") from exc

    def _roundtrip(self, payload: bytes, timeout: float) -> bytes:
        self.conn.send_message(payload)
        _, reply = self.conn.recv_message(timeout=timeout)
        return reply

    def close(self) -> None:
        self.conn.close()


def make_adapter(protocol: str, addr: str, clock: Clock | None = None,
                 connect_timeout: float = 5.0) -> _AdapterBase:
    if protocol == "mq":
        return MqAdapter(addr, clock, connect_timeout)
    if protocol == "ws":
        return WsAdapter(addr, clock, connect_timeout)
    raise ValueError(f"unknown policy protocol {protocol!r}")
