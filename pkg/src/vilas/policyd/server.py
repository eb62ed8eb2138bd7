"""Policy server speaking both inference protocols.

The same handler backs a length-prefixed TCP listener (``mq``) and a
WebSocket listener (``ws``): parse the observation document, wait out one
injected-latency sample, reply with an H x 7 chunk document. Replies stay in
per-connection FIFO order because each session handles its requests
serially; latency samples are drawn in server-wide call order.
"""

from __future__ import annotations

import json
import logging

import numpy as np

from ..clock import Clock, SystemClock
from ..transport import Envelope, Server, ServiceError, WsServer
from ..transport.framing import dumps_document
from ..broker.observation import chunk_document
from .latency import LatencyProfile, LatencySampler

__all__ = ["PolicyServer"]

log = logging.getLogger(__name__)


def _validate_observation(doc: dict) -> None:
    joints = doc.get("joints")
    if not isinstance(joints, list) or len(joints) != 7:
        raise ValueError("observation joints must be a list of 7 numbers")
    if not all(isinstance(v, (int, float)) for v in joints):
        raise ValueError("observation joints must be numeric")
    images = doc.get("images")
    if not isinstance(images, dict) or set(images) != {"base", "wrist"}:
        raise ValueError("observation must carry base and wrist images")


class PolicyServer:
    """Serves one policy kind over any subset of {mq, ws}."""

    def __init__(self, policy_factory, horizon: int,
                 protocols=("mq", "ws"),
                 latency: LatencyProfile | None = None,
                 clock: Clock | None = None,
                 mq_port: int = 0, ws_port: int = 0):
        self.policy_factory = policy_factory
        self.horizon = horizon
        self.clock = clock or SystemClock()
        self.sampler = LatencySampler(latency or LatencyProfile())
        self.mq_server = None
        self.ws_server = None
        if "mq" in protocols:
            self.mq_server = Server(mq_port, self._handle_mq,
                                    clock=self.clock, name="policy-mq")
        if "ws" in protocols:
            self.ws_server = WsServer(ws_port, self._ws_session,
                                      clock=self.clock, name="policy-ws")

    @property
    def mq_addr(self) -> str | None:
        return f"127.0.0.1:{self.mq_server.port}" if self.mq_server else None

    @property
    def ws_addr(self) -> str | None:
        return f"127.0.0.1:{self.ws_server.port}" if self.ws_server else None

    def addr(self, protocol: str) -> str:
        addr = self.mq_addr if protocol == "mq" else self.ws_addr
        if addr is None:
            raise ValueError(f"protocol {protocol!r} not being served")
        return addr

    def close(self) -> None:
        if self.mq_server:
            self.mq_server.close()
        if self.ws_server:
            self.ws_server.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- shared inference path ---------------------------------------------

    def _session_state(self, session: dict) -> dict:
        if "policy" not in session:
            policy = self.policy_factory()
            session["policy"] = policy
            session["seq"] = 0
            if hasattr(policy, "close"):
                session["_on_close"] = policy.close
        return session

    def _infer(self, doc: dict, session: dict) -> dict:
        _validate_observation(doc)
        state = self._session_state(session)
        delay_ms = self.sampler.next_ms()
        if delay_ms > 0:
            self.clock.sleep(delay_ms / 1000.0)
        state["seq"] += 1
        actions = np.asarray(state["policy"].chunk_for(doc), dtype=float)
        if actions.shape != (self.horizon, 7):
            raise RuntimeError(
                f"policy produced shape {actions.shape}, wanted "
                f"({self.horizon}, 7)")
        return chunk_document(actions, self.horizon, state["seq"], doc.get("id"))

    # -- mq protocol ---------------------------------------------------------

    def _handle_mq(self, env: Envelope, session: dict):
        if env.t != "infer":
            raise ServiceError("unknown-type", f"unsupported type {env.t!r}")
        try:
            reply = self._infer(env.document(), session)
        except ValueError as exc:
            raise ServiceError("bad-observation", str(exc))
        body = {k: v for k, v in reply.items() if k not in ("t", "id")}
        return "chunk", body

    # -- ws protocol -----------------------------------------------------------

    def _ws_session(self, conn) -> None:
        session: dict = {}
        try:
            while True:
                _, payload = conn.recv_message()
                with self.clock.working():
                    reply = self._ws_reply(payload, session)
                conn.send_message(reply)
        finally:
            policy = session.get("policy")
            if policy is not None and hasattr(policy, "close"):
                policy.close()

    def _ws_reply(self, payload: bytes, session: dict) -> bytes:
        try:
            doc = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return dumps_document(
                {"t": "error", "code": "bad-json", "message": str(exc)})
        if not isinstance(doc, dict) or doc.get("t") != "infer":
            return dumps_document(
                {"t": "error", "id": doc.get("id") if isinstance(doc, dict) else None,
                 "code": "unknown-type", "message": "expected an infer document"})
        try:
            return dumps_document(self._infer(doc, session))
        except ValueError as exc:
            return dumps_document(
                {"t": "error", "id": doc.get("id"), "code": "bad-observation",
                 "message": str(exc)})
        except Exception as exc:  # diagnostics instead of a dead session
            log.exception("ws inference failed")
            return dumps_document(
                {"t": "error", "id": doc.get("id"), "code": "internal",
                 "message": str(exc)})
