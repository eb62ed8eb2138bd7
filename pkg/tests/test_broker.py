import json
import time

import numpy as np
import pytest

from vilas.broker import (
    ActionChunk,
    BrokerConfig,
    ChunkShapeError,
    DeployLoop,
    MqAdapter,
    Observation,
    PolicyUnavailable,
    WsAdapter,
    observation_payload,
    parse_chunk_document,
)
from vilas.clock import VirtualClock
from vilas.policyd import LatencyProfile
from vilas.runtime import Stack
from vilas.transport import Connection, Server, WsServer
from vilas.transport.framing import dumps_document


def make_obs() -> Observation:
    return Observation(joints=[0.1] * 6 + [0.5],
                       images={"base": "aGk=", "wrist": "aG8="},
                       prompt="pick", t_ms=123.0)


def test_chunk_validation():
    with pytest.raises(ChunkShapeError):
        ActionChunk(np.zeros((49, 7)), horizon=50, seq=1, issued_at_ms=0)
    with pytest.raises(ChunkShapeError):
        ActionChunk(np.full((50, 7), np.nan), horizon=50, seq=1, issued_at_ms=0)
    chunk = ActionChunk(np.zeros((16, 7)), horizon=16, seq=1, issued_at_ms=0)
    assert chunk.actions.shape == (16, 7)


def test_gripper_column_clamped_not_rejected():
    actions = np.zeros((16, 7))
    actions[:, 6] = 1.7
    chunk = ActionChunk(actions, horizon=16, seq=1, issued_at_ms=0)
    assert chunk.gripper_clamped
    assert np.all(chunk.actions[:, 6] == 1.0)


def test_parse_chunk_checks_horizon():
    doc = {"t": "chunk", "seq": 1, "horizon": 16,
           "actions": [[0.0] * 7] * 16}
    with pytest.raises(ChunkShapeError):
        parse_chunk_document(doc, horizon=50, issued_at_ms=0)
    chunk = parse_chunk_document(doc, horizon=16, issued_at_ms=0)
    assert chunk.seq == 1


def test_observation_payload_deterministic_bytes():
    obs = make_obs()
    a = observation_payload(obs, 3)
    b = observation_payload(obs, 3)
    assert a == b
    doc = json.loads(a)
    assert doc["pad"] == [0.0] * 7
    assert doc["t"] == "infer" and doc["id"] == 3


class PayloadRecorder:
    """Mock policy server on both protocols that records raw request bytes."""

    def __init__(self, horizon=50):
        self.horizon = horizon
        self.mq_payloads: list[bytes] = []
        self.ws_payloads: list[bytes] = []

        def mq_handler(env, session):
            self.mq_payloads.append(dumps_document(env.document()))
            return "chunk", {"seq": 1, "horizon": self.horizon,
                             "actions": [[0.0] * 7] * self.horizon}

        self.mq = Server(0, mq_handler, name="mock-mq")

        def ws_session(conn):
            while True:
                _, payload = conn.recv_message()
                self.ws_payloads.append(payload)
                doc = json.loads(payload)
                conn.send_message(dumps_document(
                    {"t": "chunk", "id": doc.get("id"), "seq": 1,
                     "horizon": self.horizon,
                     "actions": [[0.0] * 7] * self.horizon}))

        self.ws = WsServer(0, ws_session, name="mock-ws")

    def close(self):
        self.mq.close()
        self.ws.close()


def test_cross_protocol_observation_bytes_identical():
    server = PayloadRecorder()
    try:
        obs = make_obs()
        mq = MqAdapter(f"127.0.0.1:{server.mq.port}")
        chunk_a, _ = mq.call(obs, 50)
        mq.close()
        ws = WsAdapter(f"127.0.0.1:{server.ws.port}")
        chunk_b, _ = ws.call(obs, 50)
        ws.close()
        # Wait for the server threads to record both payloads.
        deadline = time.time() + 2.0
        while (not server.mq_payloads or not server.ws_payloads) \
                and time.time() < deadline:
            time.sleep(0.01)
        assert server.mq_payloads[0] == server.ws_payloads[0]
        assert np.array_equal(chunk_a.actions, chunk_b.actions)
    finally:
        server.close()


def test_mq_adapter_against_ws_server_fails_cleanly():
    server = PayloadRecorder()
    try:
        from vilas.broker.adapters import PolicyTimeout, PolicyTransportError
        adapter = MqAdapter(f"127.0.0.1:{server.ws.port}")
        with pytest.raises((PolicyTransportError, PolicyTimeout,
                            ChunkShapeError, Exception)):
            adapter.call(make_obs(), 50, timeout=0.5)
        adapter.close()
    finally:
        server.close()


def run_deploy(protocol, horizon, duration_s, latency=None,
               control_rate=20.0):
    clock = VirtualClock()
    with Stack(clock=clock, policy_kind="zeros", horizon=horizon,
               protocols=(protocol,), latency=latency) as stack:
        broker = DeployLoop(
            BrokerConfig(policy_addr=stack.policy_addr(protocol),
                         protocol=protocol, horizon=horizon,
                         control_rate_hz=control_rate, prompt="t"),
            arm_addr=stack.arm_addr, grip_addr=stack.grip_addr,
            camera_addr=stack.camera_addr, clock=clock)
        return broker.run(duration_s=duration_s)


def test_h16_spacing_800ms():
    log = run_deploy("mq", horizon=16, duration_s=20.0)
    times = log.inference_times()
    gaps = np.diff(times)
    assert np.allclose(gaps, 800.0, atol=50.0)
    assert len(log.ticks()) == 400


def test_dispatch_index_never_skips_or_repeats():
    log = run_deploy("mq", horizon=16, duration_s=10.0)
    ks = [e["k"] for e in log.ticks()]
    for i, k in enumerate(ks):
        assert k == i % 16
    seqs = [e["seq"] for e in log.ticks()]
    assert seqs == sorted(seqs)


def test_hold_during_inference_no_commands_in_gap():
    # With injected latency, no tick may be dispatched inside the blocking
    # inference window; spacing equals horizon/rate plus measured latency.
    profile = LatencyProfile(mean_ms=200.0, std_ms=0.0, seed=1)
    log = run_deploy("mq", horizon=16, duration_s=10.0, latency=profile)
    infer = [e for e in log.events if e["event"] == "inference"]
    ticks = log.ticks()
    for ev in infer:
        start = ev["t_send_ms"]
        end = start + ev["latency_ms"]
        inside = [t for t in ticks if start < t["t_ms"] < end]
        assert not inside
    gaps = np.diff(log.inference_times())
    assert np.allclose(gaps, 800.0 + 200.0, atol=50.0)


def test_malformed_chunk_is_retried_then_fatal():
    calls = {"n": 0}

    def bad_handler(env, session):
        calls["n"] += 1
        return "chunk", {"seq": 1, "horizon": 50,
                         "actions": [[0.0] * 7] * 49}  # wrong shape

    server = Server(0, bad_handler, name="bad-policy")
    clock = VirtualClock()
    try:
        with Stack(clock=clock) as stack:
            broker = DeployLoop(
                BrokerConfig(policy_addr=f"127.0.0.1:{server.port}",
                             protocol="mq", horizon=50,
                             inference_retries=3),
                arm_addr=stack.arm_addr, grip_addr=stack.grip_addr,
                camera_addr=stack.camera_addr, clock=clock)
            with pytest.raises(PolicyUnavailable):
                broker.run(duration_s=5.0)
            errors = [e for e in broker.run_log.events
                      if e["event"] == "inference-error"]
            assert len(errors) == 4  # initial try + 3 retries
            assert calls["n"] == 4
    finally:
        server.close()


def test_inference_timeout_retries_then_aborts():
    # Stalling policy server, real clock: each attempt times out.
    def stall_session(conn):
        while True:
            conn.recv_message()
            # never reply

    server = WsServer(0, stall_session, name="stall")
    try:
        with Stack() as stack:
            broker = DeployLoop(
                BrokerConfig(policy_addr=f"127.0.0.1:{server.port}",
                             protocol="ws", horizon=50,
                             inference_timeout_s=0.2, inference_retries=2),
                arm_addr=stack.arm_addr, grip_addr=stack.grip_addr,
                camera_addr=stack.camera_addr)
            t0 = time.monotonic()
            with pytest.raises(PolicyUnavailable):
                broker.run(duration_s=5.0)
            assert time.monotonic() - t0 < 3.0
    finally:
        server.close()


def test_observation_joints_echo_device_state():
    clock = VirtualClock()
    with Stack(clock=clock, policy_kind="zeros", horizon=16,
               protocols=("mq",)) as stack:
        from vilas.broker.observation import fetch_observation
        cam = Connection(stack.camera_addr, clock=clock)
        arm = Connection(stack.arm_addr, clock=clock)
        grip = Connection(stack.grip_addr, clock=clock)
        obs = fetch_observation(cam, "check")
        assert obs.pad == [0.0] * 7
        q = arm.request("arm.state", {}).body["q"]
        g = grip.request("grip.state", {}).body["g"]
        assert np.allclose(obs.joints[:6], q)
        assert obs.joints[6] == pytest.approx(g)
        for c in (cam, arm, grip):
            c.close()
