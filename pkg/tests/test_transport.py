import random
import string
import threading
import time

import pytest

from vilas.transport import (
    Connection,
    Envelope,
    FrameDecoder,
    OversizeFrameError,
    ProtocolError,
    RequestTimeout,
    Server,
    ServiceError,
    encode,
)


def test_encode_ping_exact_bytes():
    # {"t":"ping"} is 12 UTF-8 bytes; header is its big-endian count.
    data = encode(Envelope(t="ping"))
    assert data.hex() == "0000000c" + b'{"t":"ping"}'.hex()


def test_encode_empty_object_header():
    data = encode({})
    assert data[:4] == bytes([0, 0, 0, 2])
    assert data[4:] == b"{}"


def test_roundtrip_identity():
    env = Envelope(t="obs", id=7, body={"x": [1, 2.5, "s"], "nested": {"k": None}})
    decoder = FrameDecoder()
    (out,) = decoder.feed(encode(env))
    assert out == env


def test_single_byte_fragmentation():
    env = Envelope(t="state", id=3, body={"v": 42})
    blob = encode(env)
    decoder = FrameDecoder()
    outs = []
    for i in range(len(blob)):
        outs += decoder.feed(blob[i:i + 1])
    assert outs == [env]


def test_two_frames_one_read():
    a = Envelope(t="a", id=1)
    b = Envelope(t="b", id=2, body={"q": [0] * 6})
    decoder = FrameDecoder()
    outs = decoder.feed(encode(a) + encode(b))
    assert outs == [a, b]


def random_envelope(rnd: random.Random) -> Envelope:
    def value(depth=0):
        kinds = ["int", "float", "str", "bool", "null"]
        if depth < 2:
            kinds += ["list", "dict"]
        kind = rnd.choice(kinds)
        if kind == "int":
            return rnd.randint(-10**9, 10**9)
        if kind == "float":
            return rnd.uniform(-1e6, 1e6)
        if kind == "str":
            return "".join(rnd.choices(string.printable, k=rnd.randint(0, 30)))
        if kind == "bool":
            return rnd.random() < 0.5
        if kind == "null":
            return None
        if kind == "list":
            return [value(depth + 1) for _ in range(rnd.randint(0, 4))]
        return {f"k{i}": value(depth + 1) for i in range(rnd.randint(0, 4))}

    body = {f"f{i}": value() for i in range(rnd.randint(0, 5))}
    req_id = rnd.randint(1, 10**6) if rnd.random() < 0.7 else None
    t = "".join(rnd.choices(string.ascii_lowercase + ".", k=rnd.randint(1, 12)))
    return Envelope(t=t, id=req_id, body=body)


def fuzz_roundtrip(n_envelopes: int, seed: int) -> None:
    rnd = random.Random(seed)
    envs = [random_envelope(rnd) for _ in range(n_envelopes)]
    blob = b"".join(encode(e) for e in envs)
    decoder = FrameDecoder()
    outs = []
    pos = 0
    while pos < len(blob):
        step = rnd.randint(1, 4096)
        outs += decoder.feed(blob[pos:pos + step])
        pos += step
    assert decoder.pending_bytes == 0
    assert len(outs) == len(envs)
    for got, want in zip(outs, envs):
        assert got == want


def test_fragmentation_fuzz_1000():
    fuzz_roundtrip(1000, seed=1234)


def test_declared_oversize_rejected():
    decoder = FrameDecoder()
    with pytest.raises(OversizeFrameError):
        decoder.feed(bytes([0xFF, 0xFF, 0xFF, 0xFF]))


def test_payload_oversize_rejected():
    with pytest.raises(OversizeFrameError):
        encode(Envelope(t="big", body={"blob": "x" * (17 * 1024 * 1024)}))


def test_invalid_json_payload_is_protocol_error():
    decoder = FrameDecoder()
    payload = b"not json"
    with pytest.raises(ProtocolError):
        decoder.feed(len(payload).to_bytes(4, "big") + payload)


def echo_handler(env: Envelope, session: dict):
    if env.t == "ping":
        return "pong", dict(env.body)
    if env.t == "slow":
        time.sleep(0.5)
        return "pong", {}
    raise ServiceError("unknown-type", f"unsupported {env.t!r}")


@pytest.fixture
def echo_server():
    with Server(0, echo_handler, name="echo") as server:
        yield server


def test_request_reply_echo(echo_server):
    with Connection(f"127.0.0.1:{echo_server.port}") as conn:
        reply = conn.request("ping", {"v": 1})
        assert reply.t == "pong"
        assert reply.body == {"v": 1}
        assert reply.id == 1


def test_thousand_sequential_requests_ids_in_order(echo_server):
    with Connection(f"127.0.0.1:{echo_server.port}") as conn:
        for i in range(1, 1001):
            reply = conn.request("ping", {"i": i})
            assert reply.id == i
            assert reply.body["i"] == i


def test_unknown_type_gets_error_reply(echo_server):
    with Connection(f"127.0.0.1:{echo_server.port}") as conn:
        with pytest.raises(ServiceError) as err:
            conn.request("nope", {})
        assert err.value.code == "unknown-type"


def test_request_timeout_not_hang(echo_server):
    with Connection(f"127.0.0.1:{echo_server.port}") as conn:
        with pytest.raises(RequestTimeout):
            conn.request("slow", {}, timeout=0.05)


def test_request_after_server_close_errors(echo_server):
    conn = Connection(f"127.0.0.1:{echo_server.port}")
    conn.request("ping", {})
    echo_server.close()
    # Give the listener a moment to drop sessions.
    deadline = time.time() + 2.0
    with pytest.raises((ConnectionError, RequestTimeout, OSError)):
        while time.time() < deadline:
            conn.request("ping", {}, timeout=0.2)
    conn.close()


def test_concurrent_connections_are_isolated(echo_server):
    errors = []

    def worker(n):
        try:
            with Connection(f"127.0.0.1:{echo_server.port}") as conn:
                for i in range(50):
                    reply = conn.request("ping", {"n": n, "i": i})
                    assert reply.body == {"n": n, "i": i}
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(n,)) for n in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors


def test_reply_id_mismatch_is_protocol_error():
    import socket as socket_mod
    import threading as threading_mod

    listener = socket_mod.create_server(("127.0.0.1", 0))
    port = listener.getsockname()[1]

    def bad_server():
        conn, _ = listener.accept()
        decoder = FrameDecoder()
        while True:
            data = conn.recv(65536)
            if not data:
                return
            for env in decoder.feed(data):
                # Echo with a wrong id: clients must reject this.
                conn.sendall(encode(Envelope(t="pong", id=(env.id or 0) + 7)))

    th = threading_mod.Thread(target=bad_server, daemon=True)
    th.start()
    with Connection(f"127.0.0.1:{port}") as conn:
        with pytest.raises(ProtocolError):
            conn.request("ping", {})
    listener.close()
