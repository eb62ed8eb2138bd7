"""Minimal WebSocket transport (RFC 6455 subset).

Supports the handshake, binary/text messages with continuation frames,
ping/pong, and close. Client frames are masked as the RFC requires, so the
server side is compatible with browser and Node clients. Implemented over
blocking sockets (not asyncio) so the same clock instrumentation as the
framed TCP channel applies: one logical message counts as one in-flight unit.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
import threading

from ..clock import Clock, SystemClock

__all__ = ["WsError", "WsClosed", "WsConnection", "WsServer", "ws_connect"]

_MAGIC = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_MAX_MESSAGE = 16 * 1024 * 1024

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WsError(RuntimeError):
    pass


class WsClosed(WsError):
    """The peer closed the connection."""


def _accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _MAGIC).encode()).digest()
    return base64.b64encode(digest).decode()


class WsConnection:
    """One WebSocket endpoint; send is thread-safe, recv single-consumer."""

    def __init__(self, sock: socket.socket, clock: Clock, mask_outgoing: bool,
                 initial: bytes = b""):
        self.sock = sock
        self.clock = clock
        self.mask_outgoing = mask_outgoing
        self._send_lock = threading.Lock()
        # Bytes that arrived coalesced with the handshake belong to us.
        self._buf = bytearray(initial)
        self.closed = False

    # -- sending ----------------------------------------------------------

    def send_message(self, payload: bytes | str) -> None:
        if isinstance(payload, str):
            opcode, data = OP_TEXT, payload.encode("utf-8")
        else:
            opcode, data = OP_BINARY, bytes(payload)
        self.clock.msg_sent()
        try:
            self._send_frame(opcode, data)
        except OSError as exc:
            self.clock.msg_received()
            raise WsClosed(f"send failed: {exc}") from exc

    def _send_frame(self, opcode: int, data: bytes) -> None:
        head = bytearray([0x80 | opcode])
        n = len(data)
        mask_bit = 0x80 if self.mask_outgoing else 0
        if n < 126:
            head.append(mask_bit | n)
        elif n < 1 << 16:
            head.append(mask_bit | 126)
            head += struct.pack(">H", n)
        else:
            head.append(mask_bit | 127)
            head += struct.pack(">Q", n)
        if self.mask_outgoing:
            mask = os.urandom(4)
            head += mask
            data = _mask_bytes(data, mask)
        with self._send_lock:
            self.sock.sendall(bytes(head) + data)

    # -- receiving --------------------------------------------------------

    def recv_message(self, timeout: float | None = None) -> tuple[int, bytes]:
        """Next complete data message as (opcode, payload).

        Control frames are handled inline: pings are answered, a close frame
        raises :class:`WsClosed`.
        """
        parts: list[bytes] = []
        first_opcode: int | None = None
        while True:
            fin, opcode, payload = self._read_frame(timeout)
            if opcode == OP_PING:
                self._send_frame(OP_PONG, payload)
                continue
            if opcode == OP_PONG:
                continue
            if opcode == OP_CLOSE:
                self._close_quietly(reply=True)
                raise WsClosed("peer sent close")
            if opcode in (OP_TEXT, OP_BINARY):
                if first_opcode is not None:
                    raise WsError("interleaved data messages")
                first_opcode = opcode
            elif opcode == OP_CONT:
                if first_opcode is None:
                    raise WsError("continuation without a start frame")
            else:
                raise WsError(f"unsupported opcode {opcode:#x}")
            parts.append(payload)
            if sum(map(len, parts)) > _MAX_MESSAGE:
                raise WsError("message exceeds size cap")
            if fin:
                self.clock.msg_received()
                return first_opcode, b"".join(parts)

    def _read_frame(self, timeout: float | None) -> tuple[bool, int, bytes]:
        header = self._read_exact(2, timeout)
        b0, b1 = header[0], header[1]
        fin = bool(b0 & 0x80)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", self._read_exact(2, timeout))
        elif length == 127:
            (length,) = struct.unpack(">Q", self._read_exact(8, timeout))
        if length > _MAX_MESSAGE:
            raise WsError(f"frame length {length} exceeds cap")
        mask = self._read_exact(4, timeout) if masked else None
        payload = self._read_exact(length, timeout)
        if mask:
            payload = _mask_bytes(payload, mask)
        return fin, opcode, payload

    def _read_exact(self, n: int, timeout: float | None) -> bytes:
        while len(self._buf) < n:
            self.sock.settimeout(timeout)
            try:
                with self.clock.io_wait():
                    chunk = self.sock.recv(65536)
            except socket.timeout as exc:
                raise TimeoutError("websocket read timed out") from exc
            if not chunk:
                self.closed = True
                raise WsClosed("connection dropped")
            self._buf.extend(chunk)
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    # -- teardown ---------------------------------------------------------

    def close(self) -> None:
        self._close_quietly(reply=False)

    def _close_quietly(self, reply: bool) -> None:
        if not self.closed:
            self.closed = True
            try:
                self._send_frame(OP_CLOSE, b"")
            except OSError:
                pass
        if not reply:
            try:
                self.sock.close()
            except OSError:
                pass


def _mask_bytes(data: bytes, mask: bytes) -> bytes:
    if not data:
        return data
    reps = -(-len(data) // 4)
    key = (mask * reps)[: len(data)]
    return (int.from_bytes(data, "big") ^ int.from_bytes(key, "big")).to_bytes(
        len(data), "big")


def _read_http_head(sock: socket.socket) -> tuple[bytes, bytes]:
    """HTTP header block plus any frame bytes that rode along with it."""
    data = bytearray()
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise WsError("connection closed during handshake")
        data.extend(chunk)
        if len(data) > 65536:
            raise WsError("oversized handshake")
    head, _, leftover = bytes(data).partition(b"\r\n\r\n")
    return head + b"\r\n\r\n", leftover


class WsServer:
    """Accepts WebSocket connections and runs ``on_session(conn)`` per client."""

    def __init__(self, port: int, on_session, clock: Clock | None = None,
                 host: str = "127.0.0.1", name: str = "ws"):
        self.clock = clock or SystemClock()
        self.on_session = on_session
        self.name = name
        self._listener = socket.create_server((host, port))
        self.port = self._listener.getsockname()[1]
        self._stop = threading.Event()
        threading.Thread(target=self._accept_loop, name=f"{name}-accept",
                         daemon=True).start()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                with self.clock.io_wait():
                    sock, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handshake_and_run, args=(sock,),
                             name=f"{self.name}-session", daemon=True).start()

    def _handshake_and_run(self, sock: socket.socket) -> None:
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            head, leftover = _read_http_head(sock)
            lines = head.decode("latin-1").split("\r\n")
            headers = {}
            for line in lines[1:]:
                if ":" in line:
                    k, v = line.split(":", 1)
                    headers[k.strip().lower()] = v.strip()
            key = headers.get("sec-websocket-key")
            if not key or "upgrade" not in headers.get("connection", "").lower():
                sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
                sock.close()
                return
            sock.sendall(
                (
                    "HTTP/1.1 101 Switching Protocols\r\n"
                    "Upgrade: websocket\r\n"
                    "Connection: Upgrade\r\n"
                    f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n\r\n"
                ).encode("latin-1")
            )
        except (OSError, WsError):
            sock.close()
            return
        conn = WsConnection(sock, self.clock, mask_outgoing=False,
                            initial=leftover)
        try:
            self.on_session(conn)
        except (WsClosed, TimeoutError, OSError):
            pass
        finally:
            conn.close()

    def close(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def ws_connect(addr: str, clock: Clock | None = None, path: str = "/",
               connect_timeout: float = 5.0) -> WsConnection:
    """Open a client WebSocket connection to ``host:port``."""
    from .channel import parse_addr

    host, port = parse_addr(addr)
    sock = socket.create_connection((host, port), timeout=connect_timeout)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    key = base64.b64encode(os.urandom(16)).decode()
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    ).encode("latin-1")
    sock.sendall(request)
    head, leftover = _read_http_head(sock)
    status = head.split(b"\r\n", 1)[0]
    if b"101" not in status:
        sock.close()
        raise WsError(f"handshake rejected: {status.decode('latin-1')}")
    expected = _accept_key(key).encode()
    if expected not in head:
        sock.close()
        raise WsError("handshake accept key mismatch")
    sock.settimeout(None)
    return WsConnection(sock, clock or SystemClock(), mask_outgoing=True,
                        initial=leftover)
