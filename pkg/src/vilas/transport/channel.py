"""Request-reply sessions over TCP.

One logical client owns a connection at a time and alternates strictly
between request and reply; servers handle each connection serially but accept
many connections. All blocking socket operations are clock-instrumented so
the virtual clock can tell in-flight work from true quiescence.
"""

from __future__ import annotations

import logging
import socket
import threading

from ..clock import Clock, SystemClock
from .framing import Envelope, FrameDecoder, ProtocolError, encode

__all__ = [
    "RequestTimeout",
    "ServiceError",
    "Connection",
    "Server",
    "parse_addr",
]

log = logging.getLogger(__name__)


class RequestTimeout(RuntimeError):
    """No reply arrived within the deadline."""


class ServiceError(RuntimeError):
    """The server answered with an error reply."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def parse_addr(addr: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    """Accept ``host:port`` or bare ``port``."""
    if ":" in addr:
        host, port = addr.rsplit(":", 1)
        return host or default_host, int(port)
    return default_host, int(addr)


def _recv_some(sock: socket.socket, clock: Clock, timeout: float | None) -> bytes:
    sock.settimeout(timeout)
    try:
        with clock.io_wait():
            data = sock.recv(65536)
    except socket.timeout as exc:
        raise RequestTimeout("timed out waiting for data") from exc
    if not data:
        raise ConnectionError("peer closed the connection")
    return data


class Connection:
    """Client side of a request-reply session."""

    def __init__(self, addr: str, clock: Clock | None = None,
                 connect_timeout: float = 5.0):
        self.clock = clock or SystemClock()
        host, port = parse_addr(addr)
        self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._decoder = FrameDecoder()
        self._next_id = 1
        self._lock = threading.Lock()

    def request(self, t: str, body: dict | None = None, timeout: float = 5.0,
                raise_on_error: bool = True) -> Envelope:
        """Send one request and block for its reply.

        The reply must echo the request id; a mismatch is a protocol error.
        Error replies raise :class:`ServiceError` unless told otherwise.
        """
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            env = Envelope(t=t, id=req_id, body=body or {})
            self.send_raw(encode(env))
            reply = self._read_frame(timeout)
        if reply.id != req_id:
            raise ProtocolError(f"reply id {reply.id} != request id {req_id}")
        if raise_on_error and reply.t == "error":
            raise ServiceError(
                reply.body.get("code", "error"), reply.body.get("message", ""))
        return reply

    def send_raw(self, frame: bytes) -> None:
        self.clock.msg_sent()
        self.sock.sendall(frame)

    def _read_frame(self, timeout: float | None) -> Envelope:
        while True:
            got = self._decoder.feed(_recv_some(self.sock, self.clock, timeout))
            if got:
                if len(got) > 1:
                    raise ProtocolError("unsolicited pipelined reply")
                self.clock.msg_received()
                return got[0]

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Server:
    """TCP listener dispatching framed requests to a handler.

    ``handler(envelope, session) -> (reply_t, body)``; raising
    :class:`ServiceError` produces an error reply, any other exception is
    reported as ``internal`` and logged, so no request goes unanswered.
    """

    def __init__(self, port: int, handler, clock: Clock | None = None,
                 host: str = "127.0.0.1", name: str = "service"):
        self.clock = clock or SystemClock()
        self.handler = handler
        self.name = name
        self._listener = socket.create_server((host, port))
        self.port = self._listener.getsockname()[1]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"{name}-accept", daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                with self.clock.io_wait():
                    conn, _ = self._listener.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            th = threading.Thread(
                target=self._session, args=(conn,),
                name=f"{self.name}-session", daemon=True)
            th.start()
            self._threads.append(th)

    def _session(self, conn: socket.socket) -> None:
        decoder = FrameDecoder()
        session: dict = {}
        try:
            while not self._stop.is_set():
                try:
                    envelopes = decoder.feed(_recv_some(conn, self.clock, None))
                except ConnectionError:
                    return
                except ProtocolError as exc:
                    log.warning("%s: closing on protocol error: %s", self.name, exc)
                    return
                for env in envelopes:
                    self.clock.msg_received()
                    with self.clock.working():
                        reply = self._dispatch(env, session)
                        frame = encode(reply)
                        self.clock.msg_sent()
                        try:
                            conn.sendall(frame)
                        except OSError:
                            self.clock.msg_received()
                            return
        finally:
            conn.close()
            on_close = session.get("_on_close")
            if callable(on_close):
                try:
                    on_close()
                except Exception:
                    log.exception("%s: session close hook failed", self.name)

    def _dispatch(self, env: Envelope, session: dict) -> Envelope:
        try:
            reply_t, body = self.handler(env, session)
            return Envelope(t=reply_t, id=env.id, body=body)
        except ServiceError as exc:
            return Envelope(t="error", id=env.id,
                            body={"code": exc.code, "message": exc.message})
        except Exception as exc:  # never die silently on a request
            log.exception("%s: handler failed on %s", self.name, env.t)
            return Envelope(t="error", id=env.id,
                            body={"code": "internal", "message": str(exc)})

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
