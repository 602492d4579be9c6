"""Message framing plus two interchangeable transports.

Wire format (little endian):

    magic:      u32 = 0x53504E4E ("SPNN")
    length:     u32   payload byte count
    session_id: u64
    step:       u64   per-direction sequence number, strictly increasing
    msg_type:   u8
    payload:    bytes

The simulated transport is a discrete-event network with store-and-forward
links: a frame sent at time t on a link free at t_free arrives at
``max(t, t_free) + bytes * 8 / bandwidth + latency``, preserving FIFO order
per link and counting every byte.  Role compute time is charged to the same
clock through :meth:`SimNetwork.advance`.  The TCP transport carries the same
frames over real sockets with one writer thread per connection so that
lockstep protocol phases cannot deadlock on full send buffers.
"""

from __future__ import annotations

import enum
import os
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass

from .errors import (
    ConnectRefused,
    FrameCorrupt,
    FrameTooLarge,
    HandshakeTimeout,
    LinkClosed,
    PeerClosed,
)

MAGIC = 0x53504E4E  # "SPNN"
_HEADER = struct.Struct("<IIQQB")
HEADER_BYTES = _HEADER.size  # 25
MAX_PAYLOAD = 2**31


class MsgType(enum.IntEnum):
    TRIPLE_DEAL = 1
    SHARE_TRANSFER = 2
    HIDDEN_LAYER_UP = 3
    LAST_HIDDEN_TO_A = 4
    HEAD_GRAD_DOWN = 5
    INPUT_GRAD_DOWN = 6
    CONTROL = 7
    CIPHERTEXT_TRANSFER = 8
    KEY_DISTRIBUTION = 9


@dataclass(frozen=True)
class WireFrame:
    session_id: int
    step: int
    msg_type: MsgType
    payload: bytes

    def encode(self) -> bytes:
        if len(self.payload) > MAX_PAYLOAD:
            raise FrameTooLarge(f"payload of {len(self.payload)} bytes exceeds 2^31")
        return _HEADER.pack(MAGIC, len(self.payload), self.session_id, self.step,
                            int(self.msg_type)) + self.payload

    @property
    def wire_size(self) -> int:
        return HEADER_BYTES + len(self.payload)

    @classmethod
    def decode(cls, data: bytes) -> tuple["WireFrame", int]:
        """Parse one frame from a complete buffer; returns (frame, bytes consumed)."""
        if len(data) < HEADER_BYTES:
            raise FrameCorrupt("truncated header")
        magic, length, session_id, step, msg_type = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FrameCorrupt(f"bad magic 0x{magic:08x}")
        if length > MAX_PAYLOAD:
            raise FrameTooLarge(f"declared payload of {length} bytes exceeds 2^31")
        end = HEADER_BYTES + length
        if len(data) < end:
            raise FrameCorrupt("truncated payload")
        try:
            kind = MsgType(msg_type)
        except ValueError as exc:
            raise FrameCorrupt(f"unknown msg_type {msg_type}") from exc
        return cls(session_id, step, kind, bytes(data[HEADER_BYTES:end])), end


@dataclass
class NetworkConfig:
    bandwidth_bps: float = 100e6
    latency_s: float = 0.001
    loss_rate: float = 0.0

    def __post_init__(self):
        if self.bandwidth_bps <= 0:
            raise ValueError("bandwidth must be positive")
        if not 0 <= self.loss_rate < 1:
            raise ValueError("loss_rate must be in [0, 1)")


@dataclass
class LinkStats:
    bytes_sent: int = 0
    bytes_received: int = 0
    frames: int = 0
    simulated_elapsed: float = 0.0


class _SimLink:
    def __init__(self):
        self.queue: queue.Queue = queue.Queue()
        self.t_free = 0.0
        self.stats = LinkStats()
        self.open = True
        self.last_delivery = 0.0


class SimNetwork:
    """Single-clock discrete-event network shared by all roles of a session.

    Thread safe: role threads send/recv concurrently; the virtual clock only
    ever moves forward.  Total simulated time decomposes exactly into charged
    compute time plus per-frame serialization and latency, which the sweep
    tooling exploits to re-price one recorded epoch at other bandwidths.
    """

    def __init__(self, config: NetworkConfig | None = None, drop_rng=None):
        self.config = config or NetworkConfig()
        self._links: dict[tuple[str, str], _SimLink] = {}
        self._lock = threading.Lock()
        self.now = 0.0
        self.compute_seconds = 0.0
        self._drop_rng = drop_rng
        self._aborted = False

    def _link(self, src: str, dst: str) -> _SimLink:
        with self._lock:
            return self._links.setdefault((src, dst), _SimLink())

    def close_link(self, src: str, dst: str):
        self._link(src, dst).open = False

    def send(self, src: str, dst: str, frame: WireFrame) -> float:
        """Queue a frame for delivery; returns its simulated delivery time."""
        link = self._link(src, dst)
        if not link.open:
            raise LinkClosed(f"link {src}->{dst} is closed")
        nbytes = frame.wire_size
        with self._lock:
            start = max(self.now, link.t_free)
            tx = nbytes * 8.0 / self.config.bandwidth_bps
            link.t_free = start + tx
            deliver_t = link.t_free + self.config.latency_s
            link.stats.bytes_sent += nbytes
            link.stats.frames += 1
            dropped = (
                self._drop_rng is not None
                and self.config.loss_rate > 0
                and self._drop_rng.random() < self.config.loss_rate
            )
        if not dropped:
            link.queue.put((deliver_t, frame))
        return deliver_t

    def abort(self):
        """Poison every link so blocked receivers fail fast with LinkClosed."""
        with self._lock:
            self._aborted = True
            links = list(self._links.values())
        for link in links:
            link.queue.put(None)

    def recv(self, dst: str, src: str) -> WireFrame:
        """Blocking FIFO receive; advances the clock to the delivery time."""
        link = self._link(src, dst)
        if self._aborted:
            raise LinkClosed("session aborted")
        item = link.queue.get()
        if item is None:
            raise LinkClosed("session aborted")
        deliver_t, frame = item
        with self._lock:
            self.now = max(self.now, deliver_t)
            link.stats.bytes_received += frame.wire_size
            link.stats.simulated_elapsed = max(link.stats.simulated_elapsed, deliver_t)
            link.last_delivery = deliver_t
        return frame

    def advance(self, seconds: float):
        """Charge role compute time to the simulated clock."""
        with self._lock:
            self.now += seconds
            self.compute_seconds += seconds

    def stats(self) -> dict[tuple[str, str], LinkStats]:
        with self._lock:
            return {
                k: LinkStats(v.stats.bytes_sent, v.stats.bytes_received,
                             v.stats.frames, v.stats.simulated_elapsed)
                for k, v in self._links.items()
            }


class SimEndpoint:
    """One role's handle onto a SimNetwork."""

    def __init__(self, network: SimNetwork, role: str):
        self.network = network
        self.role = role

    def send(self, dst: str, frame: WireFrame):
        self.network.send(self.role, dst, frame)

    def recv(self, src: str) -> WireFrame:
        return self.network.recv(self.role, src)

    def advance(self, seconds: float):
        self.network.advance(seconds)

    def close(self):
        pass


# -- TCP transport ------------------------------------------------------------------


def _read_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    got = 0
    while got < count:
        chunk = sock.recv(count - got)
        if not chunk:
            raise PeerClosed("peer closed the connection mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> WireFrame:
    header = _read_exact(sock, HEADER_BYTES)
    magic, length = struct.unpack_from("<II", header)
    if magic != MAGIC:
        raise FrameCorrupt(f"bad magic 0x{magic:08x}")
    if length > MAX_PAYLOAD:
        raise FrameTooLarge(f"declared payload of {length} bytes exceeds 2^31")
    frame, _ = WireFrame.decode(header + _read_exact(sock, length))
    return frame


class _Connection:
    """A framed socket with a writer thread, so sends never block the protocol."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.inbox: queue.Queue = queue.Queue()
        self.outbox: queue.Queue = queue.Queue()
        self.stats = LinkStats()
        self.alive = True
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._writer = threading.Thread(target=self._write_loop, daemon=True)
        self._reader.start()
        self._writer.start()

    def _read_loop(self):
        try:
            while True:
                frame = read_frame(self.sock)
                self.stats.bytes_received += frame.wire_size
                self.inbox.put(frame)
        except (PeerClosed, OSError):
            self.alive = False
            self.inbox.put(None)

    def _write_loop(self):
        while True:
            frame = self.outbox.get()
            if frame is None:
                return
            try:
                data = frame.encode()
                self.sock.sendall(data)
                self.stats.bytes_sent += len(data)
                self.stats.frames += 1
            except OSError:
                self.alive = False
                return

    def send(self, frame: WireFrame):
        if not self.alive:
            raise PeerClosed("connection is down")
        self.outbox.put(frame)

    def recv(self) -> WireFrame:
        frame = self.inbox.get()
        if frame is None:
            raise PeerClosed("peer closed the connection")
        return frame

    def close(self):
        self.outbox.put(None)
        self._writer.join(timeout=2)
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def _parse_endpoint(value: str) -> tuple[str, int]:
    host, port = value.rsplit(":", 1)
    return host, int(port)


class TcpEndpoint:
    """Full-mesh TCP node: dials lexicographically larger roles, accepts smaller.

    The handshake exchanges Control frames carrying the dialer's role name;
    a session_id mismatch aborts the connection, surfacing as
    HandshakeTimeout at the dialer.
    """

    def __init__(self, role: str, endpoints: dict[str, str], session_id: int,
                 timeout: float = 10.0):
        self.role = role
        self.session_id = session_id
        self.timeout = timeout
        self._conns: dict[str, _Connection] = {}
        peers = [r for r in endpoints if r != role]
        host, port = _parse_endpoint(endpoints[role])
        host = os.environ.get("SPNN_BIND_ADDR", host)
        accept_from = [r for r in peers if r < role]
        dial_to = {r: endpoints[r] for r in peers if r > role}

        self._listener = None
        accepted: dict[str, _Connection] = {}
        if accept_from:
            self._listener = socket.create_server((host, port))
            self._listener.settimeout(timeout)

            def accept_loop():
                try:
                    while len(accepted) < len(accept_from):
                        sock, _ = self._listener.accept()
                        hello = read_frame(sock)
                        if (hello.msg_type != MsgType.CONTROL
                                or hello.session_id != self.session_id):
                            sock.close()
                            continue
                        peer = hello.payload.decode("utf-8")
                        sock.sendall(WireFrame(self.session_id, 0, MsgType.CONTROL,
                                               self.role.encode()).encode())
                        accepted[peer] = _Connection(sock)
                except (socket.timeout, OSError, FrameCorrupt, PeerClosed):
                    pass

            acceptor = threading.Thread(target=accept_loop, daemon=True)
            acceptor.start()
        else:
            acceptor = None

        for peer, addr in dial_to.items():
            self._conns[peer] = self._dial(peer, addr)

        if acceptor is not None:
            acceptor.join(timeout=timeout)
            if acceptor.is_alive() or len(accepted) != len(accept_from):
                raise HandshakeTimeout(
                    f"{role}: handshake incomplete, got peers {sorted(accepted)}"
                )
            self._conns.update(accepted)

    def _dial(self, peer: str, addr: str) -> _Connection:
        host, port = _parse_endpoint(addr)
        deadline = time.monotonic() + self.timeout
        last_err = None
        while time.monotonic() < deadline:
            try:
                sock = socket.create_connection((host, port), timeout=self.timeout)
                break
            except OSError as exc:
                last_err = exc
                time.sleep(0.05)
        else:
            raise ConnectRefused(f"cannot reach {peer} at {addr}: {last_err}")
        sock.sendall(WireFrame(self.session_id, 0, MsgType.CONTROL,
                               self.role.encode()).encode())
        sock.settimeout(self.timeout)
        try:
            reply = read_frame(sock)
        except (PeerClosed, socket.timeout) as exc:
            raise HandshakeTimeout(f"no handshake reply from {peer}") from exc
        if reply.session_id != self.session_id:
            raise HandshakeTimeout(f"{peer} answered for session {reply.session_id}")
        sock.settimeout(None)
        return _Connection(sock)

    def send(self, dst: str, frame: WireFrame):
        self._conns[dst].send(frame)

    def recv(self, src: str) -> WireFrame:
        return self._conns[src].recv()

    def advance(self, seconds: float):
        pass  # wall time is real on this transport

    def stats(self) -> dict[str, LinkStats]:
        return {peer: conn.stats for peer, conn in self._conns.items()}

    def close(self):
        for conn in self._conns.values():
            conn.close()
        if self._listener is not None:
            self._listener.close()
