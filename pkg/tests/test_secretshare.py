import numpy as np
import pytest

from spnn.errors import (ChannelClosed, DimensionMismatch, PartyMismatch, TripleReuse,
                         TripleShapeMismatch)
from spnn.fixedpoint import FixedPointCodec
from spnn.secretshare import (
    BeaverTriple,
    LocalChannel,
    Share,
    ShareMatrix,
    add_shared,
    beaver_matmul,
    beaver_mul,
    dealer_gen_triples,
    gen_matmul_triple,
    gen_scalar_triple,
    matmul_shared,
    matrix_from_bytes,
    matrix_to_bytes,
    matrix_wire_size,
    rec,
    rec_matrix,
    run_pairwise,
    shr,
    shr_matrix,
)
from util import assert_uniform


class ZeroRng:
    """Degenerate randomness source: every draw is zero."""

    def integers(self, low, high, size=None, dtype=None):
        return np.zeros(size if size is not None else (), dtype=dtype)


def codec8():
    return FixedPointCodec(ell=8, frac_bits=2)


def test_wire_codec_round_trip():
    codec = FixedPointCodec()
    rng = np.random.default_rng(0)
    m = codec.random(rng, (5, 7))
    assert np.array_equal(matrix_from_bytes(matrix_to_bytes(m, codec), codec), m)
    assert len(matrix_to_bytes(m, codec)) == matrix_wire_size(5, 7, codec)


def test_wire_codec_packs_narrow_rings():
    codec = FixedPointCodec(ell=12, frac_bits=4)
    rng = np.random.default_rng(1)
    m = codec.random(rng, (3, 4))
    data = matrix_to_bytes(m, codec)
    assert len(data) == 8 + 12 * 2  # two bytes per 12-bit element
    assert np.array_equal(matrix_from_bytes(data, codec), m)


def test_shr_with_forced_zero_randomness():
    codec = codec8()
    s0, s1 = shr(np.uint64(42), codec, ZeroRng())
    assert int(s0.value) == 42 and int(s1.value) == 0


def test_shr_rec_exhaustive_small_ring():
    codec = codec8()
    rng = np.random.default_rng(2)
    for a in range(256):
        s0, s1 = shr(np.uint64(a), codec, rng)
        assert int(rec(s0, s1, codec)) == a


def test_share_marginal_uniform_and_secret_independent():
    codec = codec8()
    rng = np.random.default_rng(3)
    for secret in (0, 200):  # uniformity must not depend on the secret
        p0 = [int(shr(np.uint64(secret), codec, rng)[0].value) for _ in range(100_000)]
        assert_uniform(p0, 256, codec.modulus)


def test_rec_examples_and_party_check():
    codec = codec8()
    assert int(rec(Share(0, np.uint64(5)), Share(1, np.uint64(7)), codec)) == 12
    assert int(rec(Share(0, np.uint64(200)), Share(1, np.uint64(100)), codec)) == 44
    with pytest.raises(PartyMismatch):
        rec(Share(0, np.uint64(1)), Share(0, np.uint64(2)), codec)


def test_add_shared_is_local_and_correct():
    codec = FixedPointCodec()
    rng = np.random.default_rng(4)
    a = rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3))
    a0, a1 = shr_matrix(codec.encode(a), codec, rng)
    b0, b1 = shr_matrix(codec.encode(b), codec, rng)
    ch0, ch1 = LocalChannel.make_pair()
    c0 = add_shared(a0, b0, codec)
    c1 = add_shared(a1, b1, codec)
    assert ch0.bytes_sent == ch1.bytes_sent == 0
    got = codec.decode(rec_matrix(c0, c1, codec))
    assert np.allclose(got, a + b, atol=2**-15)
    # additive identity
    z = ShareMatrix(0, np.zeros((3, 3), dtype=np.uint64))
    same = add_shared(a0, z, codec)
    assert np.array_equal(same.values, a0.values)
    with pytest.raises(DimensionMismatch):
        add_shared(a0, ShareMatrix(0, np.zeros((2, 2), dtype=np.uint64)), codec)


def test_beaver_mul_worked_example():
    # a=3, b=5, triple (u=2, v=7, w=14) in Z_256; brute-force identity gives 15
    codec = codec8()
    a0, a1 = Share(0, np.uint64(1)), Share(1, np.uint64(2))
    b0, b1 = Share(0, np.uint64(4)), Share(1, np.uint64(1))
    t0 = BeaverTriple(0, np.uint64(2), np.uint64(3), np.uint64(10))
    t1 = BeaverTriple(1, np.uint64(0), np.uint64(4), np.uint64(4))
    ch0, ch1 = LocalChannel.make_pair()
    c0, c1 = run_pairwise(
        lambda: beaver_mul(a0, b0, t0, ch0, codec),
        lambda: beaver_mul(a1, b1, t1, ch1, codec),
    )
    assert int(rec(c0, c1, codec)) == 15
    # exactly two ring elements crossed the wire in each direction
    assert ch0.bytes_sent == ch1.bytes_sent == matrix_wire_size(1, 2, codec)


def test_beaver_mul_zero_absorbs():
    codec = codec8()
    rng = np.random.default_rng(5)
    a0, a1 = shr(np.uint64(0), codec, rng)
    b0, b1 = shr(np.uint64(177), codec, rng)
    t0, t1 = gen_scalar_triple(codec, rng)
    ch0, ch1 = LocalChannel.make_pair()
    c0, c1 = run_pairwise(
        lambda: beaver_mul(a0, b0, t0, ch0, codec),
        lambda: beaver_mul(a1, b1, t1, ch1, codec),
    )
    assert int(rec(c0, c1, codec)) == 0


def test_beaver_mul_exhaustive_z64():
    # every (a, b) pair in Z_{2^6} with fresh random triples
    codec = FixedPointCodec(ell=6, frac_bits=2)
    rng = np.random.default_rng(6)
    pairs = [(a, b) for a in range(64) for b in range(64)]
    shares = []
    triples = []
    for a, b in pairs:
        shares.append((shr(np.uint64(a), codec, rng), shr(np.uint64(b), codec, rng)))
        triples.append(gen_scalar_triple(codec, rng))
    ch0, ch1 = LocalChannel.make_pair()

    def party(i, ch):
        out = []
        for ((a0, a1), (b0, b1)), (t0, t1) in zip(shares, triples):
            a, b, t = (a0, b0, t0) if i == 0 else (a1, b1, t1)
            out.append(beaver_mul(a, b, t, ch, codec))
        return out

    res0, res1 = run_pairwise(lambda: party(0, ch0), lambda: party(1, ch1))
    got = [int(rec(c0, c1, codec)) for c0, c1 in zip(res0, res1)]
    want = [(a * b) % 64 for a, b in pairs]
    assert got == want


def test_triple_reuse_is_an_error():
    codec = codec8()
    rng = np.random.default_rng(7)
    t0, t1 = gen_scalar_triple(codec, rng)
    a = shr(np.uint64(3), codec, rng)
    b = shr(np.uint64(5), codec, rng)

    def mult():
        ch0, ch1 = LocalChannel.make_pair()
        return run_pairwise(
            lambda: beaver_mul(a[0], b[0], t0, ch0, codec),
            lambda: beaver_mul(a[1], b[1], t1, ch1, codec),
        )

    mult()
    with pytest.raises(TripleReuse):
        mult()


def test_dealer_triples_satisfy_defining_property():
    codec = codec8()
    rng = np.random.default_rng(8)
    t0s, t1s = dealer_gen_triples(codec, rng, 200)
    for t0, t1 in zip(t0s, t1s):
        u = int(codec.add(t0.u, t1.u))
        v = int(codec.add(t0.v, t1.v))
        w = int(codec.add(t0.w, t1.w))
        assert w == (u * v) % codec.modulus


def test_dealer_triple_shares_uniform():
    codec = codec8()
    rng = np.random.default_rng(9)
    t0s, _ = dealer_gen_triples(codec, rng, 10_000)
    assert_uniform([int(t.u) for t in t0s], 64, codec.modulus)


def test_dealer_matmul_triple():
    codec = FixedPointCodec()
    rng = np.random.default_rng(10)
    t0, t1 = gen_matmul_triple(codec, rng, 2, 2, 2)
    u = codec.add(t0.u, t1.u)
    v = codec.add(t0.v, t1.v)
    w = codec.add(t0.w, t1.w)
    assert np.array_equal(w, codec.matmul(u, v))


def run_matmul_shared(x_real, w_real, codec, rng):
    x0, x1 = shr_matrix(codec.encode(x_real), codec, rng)
    w0, w1 = shr_matrix(codec.encode(w_real), codec, rng)
    n, d = x_real.shape
    m = w_real.shape[1]
    ta, tb = gen_matmul_triple(codec, rng, n, d, m)
    ta2, tb2 = gen_matmul_triple(codec, rng, n, d, m)
    ch0, ch1 = LocalChannel.make_pair()
    c0, c1 = run_pairwise(
        lambda: matmul_shared(x0, w0, (ta, ta2), ch0, codec),
        lambda: matmul_shared(x1, w1, (tb, tb2), ch1, codec),
    )
    return c0, c1, ch0, ch1


def test_matmul_shared_matches_plaintext():
    codec = FixedPointCodec()
    rng = np.random.default_rng(11)
    x = rng.uniform(-2, 2, (4, 3))
    w = rng.uniform(-2, 2, (3, 2))
    c0, c1, ch0, ch1 = run_matmul_shared(x, w, codec, rng)
    got = codec.decode(rec_matrix(c0, c1, codec))
    assert np.max(np.abs(got - x @ w)) <= 3 * 2**-16
    # communication: 2*(n*d + d*m) ring elements per party, around two openings
    expected = 2 * (matrix_wire_size(4, 3, codec) + matrix_wire_size(3, 2, codec))
    assert ch0.bytes_sent == ch1.bytes_sent == expected


def test_matmul_shared_identity_weights():
    codec = FixedPointCodec()
    rng = np.random.default_rng(12)
    x = rng.uniform(-2, 2, (5, 4))
    c0, c1, _, _ = run_matmul_shared(x, np.eye(4), codec, rng)
    got = codec.decode(rec_matrix(c0, c1, codec))
    assert np.max(np.abs(got - x)) <= 2**-14


def test_matmul_shared_one_by_one_degenerates_to_scalar():
    codec = FixedPointCodec()
    rng = np.random.default_rng(13)
    x = np.array([[1.25]])
    w = np.array([[-2.5]])
    c0, c1, _, _ = run_matmul_shared(x, w, codec, rng)
    got = float(codec.decode(rec_matrix(c0, c1, codec))[0, 0])
    assert abs(got - (-3.125)) <= 2**-15


def test_matmul_shared_random_instances_bound():
    codec = FixedPointCodec()
    rng = np.random.default_rng(14)
    for _ in range(100):
        n, d, m = rng.integers(1, 7), int(rng.integers(1, 7)), int(rng.integers(1, 5))
        x = rng.uniform(-1, 1, (int(n), d))
        w = rng.uniform(-1, 1, (d, m))
        c0, c1, _, _ = run_matmul_shared(x, w, codec, rng)
        got = codec.decode(rec_matrix(c0, c1, codec))
        # d quantisation terms plus the +/-2 ulp truncation allowance
        assert np.max(np.abs(got - x @ w)) <= max(d, 2) * 2 ** (-codec.frac_bits + 1)


def test_beaver_matmul_shape_validation():
    codec = FixedPointCodec()
    rng = np.random.default_rng(15)
    t0, _ = gen_matmul_triple(codec, rng, 2, 2, 2)
    left = ShareMatrix(0, codec.random(rng, (3, 2)))
    right = ShareMatrix(0, codec.random(rng, (2, 2)))
    ch0, _ = LocalChannel.make_pair()
    with pytest.raises(TripleShapeMismatch):
        beaver_matmul(left, right, t0, ch0, codec)
    bad_right = ShareMatrix(0, codec.random(rng, (3, 2)))
    with pytest.raises(DimensionMismatch):
        beaver_matmul(left, bad_right, t0, ch0, codec)


def test_shared_truncation_failure_rate():
    # local per-share truncation fails catastrophically with probability about
    # 2^(ell_x + 1 - ell); elsewhere the result is within 1 ulp
    ell, lf, ell_x = 32, 8, 20
    codec = FixedPointCodec(ell=ell, frac_bits=lf)
    rng = np.random.default_rng(16)
    trials = 100_000
    secrets = rng.integers(-(2**ell_x), 2**ell_x, size=trials)
    z = (secrets % codec.modulus).astype(np.uint64)
    r = codec.random(rng, (trials,))
    z0 = codec.sub(z, r)
    got = codec.add(codec.truncate(z0), codec.truncate(r))
    want = codec.truncate(z)
    err = np.abs(codec.to_signed(codec.sub(got, want)))
    failures = int(np.count_nonzero(err > 1))
    bound = 2.0 ** (ell_x + 1 - ell) * trials
    assert failures <= 2.5 * bound
    assert failures >= 0.1 * bound  # the phenomenon is real, not absent


def test_channel_close_unblocks_peer():
    ch0, ch1 = LocalChannel.make_pair()
    ch0.close()
    with pytest.raises(ChannelClosed):
        ch0.send(b"late")
    with pytest.raises(ChannelClosed):
        ch1.recv()
