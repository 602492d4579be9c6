import socket
import struct
import threading

import numpy as np
import pytest

from spnn.errors import ConnectRefused, FrameCorrupt, FrameTooLarge, HandshakeTimeout
from spnn.transport import (
    HEADER_BYTES,
    MAGIC,
    MsgType,
    NetworkConfig,
    SimEndpoint,
    SimNetwork,
    TcpEndpoint,
    WireFrame,
)


def free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def test_frame_round_trip_every_type():
    rng = np.random.default_rng(0)
    for kind in MsgType:
        payload = rng.bytes(int(rng.integers(0, 200)))
        frame = WireFrame(12345, 7, kind, payload)
        decoded, consumed = WireFrame.decode(frame.encode())
        assert consumed == frame.wire_size
        assert decoded == frame


def test_frame_bad_magic():
    data = bytearray(WireFrame(1, 1, MsgType.CONTROL, b"x").encode())
    data[0] ^= 0xFF
    with pytest.raises(FrameCorrupt):
        WireFrame.decode(bytes(data))


def test_frame_truncated_payload():
    data = WireFrame(1, 1, MsgType.CONTROL, b"hello").encode()
    with pytest.raises(FrameCorrupt):
        WireFrame.decode(data[:-2])
    with pytest.raises(FrameCorrupt):
        WireFrame.decode(data[:10])


def test_frame_too_large_declared():
    header = struct.pack("<IIQQB", MAGIC, 2**31 + 1, 0, 0, int(MsgType.CONTROL))
    with pytest.raises(FrameTooLarge):
        WireFrame.decode(header)


def test_one_mebibyte_frame_round_trips():
    payload = np.random.default_rng(1).bytes(2**20)
    frame = WireFrame(9, 3, MsgType.SHARE_TRANSFER, payload)
    decoded, _ = WireFrame.decode(frame.encode())
    assert decoded.payload == payload


def test_network_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(bandwidth_bps=0)
    with pytest.raises(ValueError):
        NetworkConfig(loss_rate=1.0)


def test_sim_delivery_time_formula():
    # 1,250,000 wire bytes at 100 Mbps, zero latency -> 0.1 s
    net = SimNetwork(NetworkConfig(bandwidth_bps=100e6, latency_s=0.0))
    payload = bytes(1_250_000 - HEADER_BYTES)
    deliver_t = net.send("a", "b", WireFrame(1, 1, MsgType.SHARE_TRANSFER, payload))
    assert deliver_t == pytest.approx(0.1, rel=1e-12)
    net.recv("b", "a")
    assert net.now == pytest.approx(0.1, rel=1e-12)


def test_sim_zero_payload_time_is_header_serialisation_plus_latency():
    cfg = NetworkConfig(bandwidth_bps=1e6, latency_s=0.25)
    net = SimNetwork(cfg)
    deliver_t = net.send("a", "b", WireFrame(1, 1, MsgType.CONTROL, b""))
    assert deliver_t == pytest.approx(0.25 + HEADER_BYTES * 8 / 1e6, rel=1e-12)


def test_sim_fifo_and_monotone_delivery_under_random_schedules():
    rng = np.random.default_rng(2)
    for _ in range(200):
        net = SimNetwork(NetworkConfig(bandwidth_bps=float(rng.integers(10_000, 10_000_000)),
                                       latency_s=float(rng.uniform(0, 0.01))))
        sizes = rng.integers(0, 5000, size=50)
        sent = []
        for i, size in enumerate(sizes):
            if rng.random() < 0.3:
                net.advance(float(rng.uniform(0, 0.01)))
            sent.append(net.send("a", "b", WireFrame(1, i, MsgType.SHARE_TRANSFER,
                                                     bytes(int(size)))))
        assert all(b >= a for a, b in zip(sent, sent[1:]))
        received = [net.recv("b", "a").step for _ in range(50)]
        assert received == list(range(50))


def test_sim_stats_accounting():
    net = SimNetwork(NetworkConfig(bandwidth_bps=1e6, latency_s=0.0))
    ep_a, ep_b = SimEndpoint(net, "a"), SimEndpoint(net, "b")
    frames = [WireFrame(1, i, MsgType.SHARE_TRANSFER, bytes(100)) for i in range(10)]
    for frame in frames:
        ep_a.send("b", frame)
    for _ in frames:
        ep_b.recv("a")
    stats = net.stats()[("a", "b")]
    assert stats.bytes_sent == stats.bytes_received == 10 * (HEADER_BYTES + 100)
    assert stats.frames == 10
    assert stats.simulated_elapsed == pytest.approx(10 * (HEADER_BYTES + 100) * 8 / 1e6)


def test_sim_advance_charges_compute():
    net = SimNetwork()
    net.advance(1.5)
    net.advance(0.25)
    assert net.now == pytest.approx(1.75)
    assert net.compute_seconds == pytest.approx(1.75)


def test_tcp_loopback_echo_1000_frames():
    ports = {"a": f"127.0.0.1:{free_port()}", "b": f"127.0.0.1:{free_port()}"}
    session = 42
    results = {}

    def run_b():
        ep = TcpEndpoint("b", ports, session)
        for _ in range(1000):
            frame = ep.recv("a")
            ep.send("a", WireFrame(session, frame.step, frame.msg_type, frame.payload))
        results["b_stats"] = ep.stats()
        ep.close()

    tb = threading.Thread(target=run_b, daemon=True)
    tb.start()
    ep = TcpEndpoint("a", ports, session)
    rng = np.random.default_rng(3)
    payloads = [rng.bytes(int(rng.integers(0, 2000))) for _ in range(1000)]
    for i, payload in enumerate(payloads):
        ep.send("b", WireFrame(session, i, MsgType.SHARE_TRANSFER, payload))
    echoed = [ep.recv("b") for _ in range(1000)]
    tb.join(timeout=30)
    assert [f.step for f in echoed] == list(range(1000))
    assert [f.payload for f in echoed] == payloads
    total = sum(HEADER_BYTES + len(p) for p in payloads)
    assert ep.stats()["b"].bytes_sent == total
    assert ep.stats()["b"].bytes_received == total
    ep.close()


def test_tcp_handshake_session_mismatch():
    ports = {"a": f"127.0.0.1:{free_port()}", "b": f"127.0.0.1:{free_port()}"}
    errors = {}

    def run_b():
        try:
            TcpEndpoint("b", ports, session_id=1, timeout=3)
        except HandshakeTimeout as exc:
            errors["b"] = exc

    tb = threading.Thread(target=run_b, daemon=True)
    tb.start()
    with pytest.raises(HandshakeTimeout):
        TcpEndpoint("a", ports, session_id=2, timeout=3)
    tb.join(timeout=10)
    assert isinstance(errors.get("b"), HandshakeTimeout)


def test_tcp_connect_refused():
    ports = {"a": f"127.0.0.1:{free_port()}", "b": f"127.0.0.1:{free_port()}"}
    with pytest.raises(ConnectRefused):
        TcpEndpoint("a", ports, session_id=1, timeout=0.5)


def test_sim_loss_rate_drops_frames():
    import random

    net = SimNetwork(NetworkConfig(bandwidth_bps=1e6, latency_s=0.0, loss_rate=0.5),
                     drop_rng=random.Random(4))
    for i in range(200):
        net.send("a", "b", WireFrame(1, i, MsgType.CONTROL, b""))
    delivered = net._link("a", "b").queue.qsize()
    assert 60 <= delivered <= 140  # roughly half survive
    assert net.stats()[("a", "b")].frames == 200  # sends are still counted


def test_tcp_bind_address_override(monkeypatch):
    # role b accepts; its configured bind host is overridden by the env var
    monkeypatch.setenv("SPNN_BIND_ADDR", "127.0.0.1")
    port_b = free_port()
    ports = {"a": f"127.0.0.1:{free_port()}", "b": f"0.0.0.0:{port_b}"}
    done = {}

    def run_b():
        ep = TcpEndpoint("b", ports, 7)
        ep.send("a", WireFrame(7, 1, MsgType.CONTROL, b"hi"))
        done["b"] = ep

    tb = threading.Thread(target=run_b, daemon=True)
    tb.start()
    dial = dict(ports, b=f"127.0.0.1:{port_b}")
    ep = TcpEndpoint("a", dial, 7)
    assert ep.recv("b").payload == b"hi"
    tb.join(timeout=10)
    assert done["b"]._listener.getsockname()[0] == "127.0.0.1"
    ep.close()
    done["b"].close()
