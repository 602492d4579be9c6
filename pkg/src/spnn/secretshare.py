"""Two-party additive secret sharing over Z_{2^ell}.

A secret ``a`` is split as ``a = share_0 + share_1 (mod 2^ell)`` where
``share_1`` is uniform, so either share alone is statistically independent of
the secret.  Addition is local; multiplication consumes one Beaver triple
``(u, v, w = u*v)`` and opens the masked differences ``e = a - u`` and
``f = b - v``.  The protocol functions below are written from one party's
perspective and run in lockstep: both parties call the same function on their
own shares and channel ends (see :func:`run_pairwise` for in-process use).

Share-transfer wire format: matrix header (rows: u32, cols: u32, little
endian) followed by row-major ring values, each ``ceil(ell / 8)`` bytes little
endian.
"""

from __future__ import annotations

import queue
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChannelClosed,
    DimensionMismatch,
    PartyMismatch,
    TripleReuse,
    TripleShapeMismatch,
)
from .fixedpoint import FixedPointCodec

_HEADER = struct.Struct("<II")


# -- wire codec ---------------------------------------------------------------

def matrix_to_bytes(values: np.ndarray, codec: FixedPointCodec) -> bytes:
    """Serialize a 2-D uint64 ring matrix."""
    values = np.ascontiguousarray(values, dtype="<u8")
    if values.ndim != 2:
        raise DimensionMismatch(f"expected 2-D matrix, got shape {values.shape}")
    width = (codec.ell + 7) // 8
    raw = values.tobytes()
    if width != 8:
        raw = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 8)[:, :width].tobytes()
    return _HEADER.pack(*values.shape) + raw


def matrix_from_bytes(data: bytes, codec: FixedPointCodec) -> np.ndarray:
    """Inverse of :func:`matrix_to_bytes`."""
    rows, cols = _HEADER.unpack_from(data)
    width = (codec.ell + 7) // 8
    body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    if body.size != rows * cols * width:
        raise DimensionMismatch("matrix payload size does not match header")
    if width != 8:
        padded = np.zeros((rows * cols, 8), dtype=np.uint8)
        padded[:, :width] = body.reshape(-1, width)
        body = padded.reshape(-1)
    return body.view("<u8").reshape(rows, cols).astype(np.uint64)


def matrix_wire_size(rows: int, cols: int, codec: FixedPointCodec) -> int:
    return _HEADER.size + rows * cols * ((codec.ell + 7) // 8)


# -- channels -----------------------------------------------------------------

class PairwiseChannel:
    """One party's end of a bidirectional FIFO message port.

    Subclasses provide ``_send_raw`` / ``_recv_raw``; byte counters are
    maintained here so every transport reports identical accounting.
    """

    def __init__(self, party: int):
        self.party = party
        self.bytes_sent = 0
        self.bytes_received = 0

    def send(self, payload: bytes) -> None:
        self.bytes_sent += len(payload)
        self._send_raw(payload)

    def recv(self) -> bytes:
        payload = self._recv_raw()
        self.bytes_received += len(payload)
        return payload

    def _send_raw(self, payload: bytes) -> None:
        raise NotImplementedError

    def _recv_raw(self) -> bytes:
        raise NotImplementedError


class LocalChannel(PairwiseChannel):
    """In-memory channel pair backed by FIFO queues."""

    def __init__(self, party, outbox, inbox):
        super().__init__(party)
        self._outbox = outbox
        self._inbox = inbox
        self._closed = False

    @classmethod
    def make_pair(cls) -> tuple["LocalChannel", "LocalChannel"]:
        q01, q10 = queue.Queue(), queue.Queue()
        return cls(0, q01, q10), cls(1, q10, q01)

    def close(self):
        self._closed = True
        self._outbox.put(None)

    def _send_raw(self, payload):
        if self._closed:
            raise ChannelClosed("channel is closed")
        self._outbox.put(payload)

    def _recv_raw(self):
        item = self._inbox.get()
        if item is None:
            raise ChannelClosed("peer closed the channel")
        return item


def run_pairwise(fn0, fn1):
    """Run two party closures in lockstep threads, returning their results.

    Exceptions from either party propagate to the caller.
    """
    results: list = [None, None]
    errors: list = [None, None]

    def wrap(i, fn):
        try:
            results[i] = fn()
        except BaseException as exc:  # re-raised below
            errors[i] = exc

    t1 = threading.Thread(target=wrap, args=(1, fn1), daemon=True)
    t1.start()
    wrap(0, fn0)
    t1.join()
    for exc in errors:
        if exc is not None:
            raise exc
    return results[0], results[1]


# -- share containers ---------------------------------------------------------

@dataclass(frozen=True)
class Share:
    """One party's additive share of a scalar secret."""

    party: int
    value: np.uint64


@dataclass
class ShareMatrix:
    """One party's additive share of a matrix secret (row-major uint64)."""

    party: int
    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape


@dataclass
class BeaverTriple:
    """One party's halves of a multiplication triple (u, v, w = u*v).

    Scalar triples hold 0-d arrays; matmul triples hold (n, d), (d, m) and
    (n, m) matrices.  A triple is single-use: reuse breaks privacy and raises.
    """

    party: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    consumed: bool = field(default=False)

    def mark_consumed(self):
        if self.consumed:
            raise TripleReuse("Beaver triple already consumed")
        self.consumed = True


# -- sharing / reconstruction --------------------------------------------------

def shr(secret, codec: FixedPointCodec, rng: np.random.Generator) -> tuple[Share, Share]:
    """Split a scalar ring secret: party 1 receives uniform r, party 0 keeps secret - r."""
    r = codec.random(rng)
    return Share(0, codec.sub(secret, r)), Share(1, r)


def rec(s0: Share, s1: Share, codec: FixedPointCodec):
    """Reconstruct a scalar secret from both parties' shares."""
    if s0.party == s1.party:
        raise PartyMismatch(f"both shares belong to party {s0.party}")
    return codec.add(s0.value, s1.value)


def shr_matrix(secret: np.ndarray, codec: FixedPointCodec, rng: np.random.Generator):
    r = codec.random(rng, np.asarray(secret).shape)
    return ShareMatrix(0, codec.sub(secret, r)), ShareMatrix(1, r)


def rec_matrix(m0: ShareMatrix, m1: ShareMatrix, codec: FixedPointCodec) -> np.ndarray:
    if m0.party == m1.party:
        raise PartyMismatch(f"both share matrices belong to party {m0.party}")
    if m0.shape != m1.shape:
        raise DimensionMismatch(f"share shapes differ: {m0.shape} vs {m1.shape}")
    return codec.add(m0.values, m1.values)


def add_shared(a: ShareMatrix, b: ShareMatrix, codec: FixedPointCodec) -> ShareMatrix:
    """Local addition of two shared matrices; no communication."""
    if a.party != b.party:
        raise PartyMismatch("operands belong to different parties")
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return ShareMatrix(a.party, codec.add(a.values, b.values))


# -- triple generation (trusted dealer) ----------------------------------------

def gen_scalar_triple(codec: FixedPointCodec, rng: np.random.Generator):
    """Dealer-side generation of one scalar triple, returned as per-party halves."""
    u, v = codec.random(rng), codec.random(rng)
    w = codec.mul(u, v)
    u0, v0, w0 = codec.random(rng), codec.random(rng), codec.random(rng)
    t0 = BeaverTriple(0, u0, v0, w0)
    t1 = BeaverTriple(1, codec.sub(u, u0), codec.sub(v, v0), codec.sub(w, w0))
    return t0, t1


def gen_matmul_triple(codec: FixedPointCodec, rng: np.random.Generator, n: int, d: int, m: int):
    """Dealer-side generation of a matrix triple shaped ((n,d), (d,m), (n,m))."""
    u = codec.random(rng, (n, d))
    v = codec.random(rng, (d, m))
    w = codec.matmul(u, v)
    u0 = codec.random(rng, (n, d))
    v0 = codec.random(rng, (d, m))
    w0 = codec.random(rng, (n, m))
    t0 = BeaverTriple(0, u0, v0, w0)
    t1 = BeaverTriple(1, codec.sub(u, u0), codec.sub(v, v0), codec.sub(w, w0))
    return t0, t1


def dealer_gen_triples(codec, rng, count: int, shape: tuple[int, int, int] | None = None):
    """Generate `count` triples (scalar when shape is None), as two per-party lists."""
    halves = [
        gen_scalar_triple(codec, rng) if shape is None else gen_matmul_triple(codec, rng, *shape)
        for _ in range(count)
    ]
    return [h[0] for h in halves], [h[1] for h in halves]


# -- multiplication protocols ---------------------------------------------------

def beaver_mul(a: Share, b: Share, triple: BeaverTriple, ch: PairwiseChannel,
               codec: FixedPointCodec) -> Share:
    """One party's side of a scalar Beaver multiplication.

    Opens e = a - u and f = b - v (one message of two ring elements each way)
    and outputs this party's share of a*b.
    """
    party = triple.party
    if a.party != party or b.party != party or ch.party != party:
        raise PartyMismatch("share / triple / channel party indices disagree")
    triple.mark_consumed()
    e_own = codec.sub(a.value, triple.u)
    f_own = codec.sub(b.value, triple.v)
    ch.send(matrix_to_bytes(np.array([[e_own, f_own]], dtype=np.uint64), codec))
    other = matrix_from_bytes(ch.recv(), codec)
    e = codec.add(e_own, other[0, 0])
    f = codec.add(f_own, other[0, 1])
    c = codec.add(codec.add(codec.mul(f, a.value), codec.mul(e, b.value)), triple.w)
    if party == 1:
        c = codec.sub(c, codec.mul(e, f))
    return Share(party, c)


def beaver_matmul(left: ShareMatrix, right: ShareMatrix, triple: BeaverTriple,
                  ch: PairwiseChannel, codec: FixedPointCodec) -> ShareMatrix:
    """One party's side of a shared matrix product via a matrix triple.

    Both parties open E = L - U and F = R - V in a single round; the output is
    this party's additive share of L @ R (no truncation applied here).
    """
    party = triple.party
    n, d = left.shape
    d2, m = right.shape
    if d != d2:
        raise DimensionMismatch(f"inner dimensions differ: {left.shape} @ {right.shape}")
    if triple.u.shape != (n, d) or triple.v.shape != (d, m) or triple.w.shape != (n, m):
        raise TripleShapeMismatch(
            f"triple shaped {triple.u.shape},{triple.v.shape},{triple.w.shape} "
            f"cannot multiply {left.shape} @ {right.shape}"
        )
    triple.mark_consumed()
    e_own = codec.sub(left.values, triple.u)
    f_own = codec.sub(right.values, triple.v)
    ch.send(matrix_to_bytes(e_own, codec) + matrix_to_bytes(f_own, codec))
    data = ch.recv()
    cut = matrix_wire_size(n, d, codec)
    e = codec.add(e_own, matrix_from_bytes(data[:cut], codec))
    f = codec.add(f_own, matrix_from_bytes(data[cut:], codec))
    c = codec.add(codec.add(codec.matmul(e, right.values), codec.matmul(left.values, f)), triple.w)
    if party == 1:
        c = codec.sub(c, codec.matmul(e, f))
    return ShareMatrix(party, c)


def matmul_shared(x: ShareMatrix, w: ShareMatrix, triples, ch: PairwiseChannel,
                  codec: FixedPointCodec) -> ShareMatrix:
    """One party's side of the full shared fixed-point matrix product.

    Computes the local product plus the two cross terms (one matrix triple
    each), then truncates this party's accumulated output share once.  Each
    party transmits 2*(n*d + d*m) ring elements across the two cross-term
    openings.
    """
    party = x.party
    if w.party != party:
        raise PartyMismatch("x and w shares belong to different parties")
    n, d = x.shape
    d2, m = w.shape
    if d != d2:
        raise DimensionMismatch(f"inner dimensions differ: {x.shape} @ {w.shape}")
    t_first, t_second = triples
    local = codec.matmul(x.values, w.values)
    zeros_x = ShareMatrix(party, np.zeros((n, d), dtype=np.uint64))
    zeros_w = ShareMatrix(party, np.zeros((d, m), dtype=np.uint64))
    # cross term <X>_0 . <W>_1 : party 0 supplies the left operand
    if party == 0:
        c1 = beaver_matmul(x, zeros_w, t_first, ch, codec)
        c2 = beaver_matmul(zeros_x, w, t_second, ch, codec)
    else:
        c1 = beaver_matmul(zeros_x, w, t_first, ch, codec)
        c2 = beaver_matmul(x, zeros_w, t_second, ch, codec)
    acc = codec.add(codec.add(local, c1.values), c2.values)
    return ShareMatrix(party, codec.truncate(acc))
