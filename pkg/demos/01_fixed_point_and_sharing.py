# Fixed-point ring arithmetic and additive secret sharing.
#
# Reals are embedded into Z_{2^64} with 16 fractional bits; a secret split
# into two additive shares is uniform from either side alone, and a Beaver
# triple turns one multiplication into two local evaluations plus one
# exchange of masked differences.

import numpy as np

from spnn.fixedpoint import FixedPointCodec
from spnn.secretshare import (
    LocalChannel,
    beaver_mul,
    gen_scalar_triple,
    rec,
    rec_matrix,
    run_pairwise,
    shr,
    shr_matrix,
    gen_matmul_triple,
    matmul_shared,
)

codec = FixedPointCodec()
print("encode(1.5)  =", int(codec.encode(1.5)), "(1.5 * 2^16)")
print("encode(-0.25) =", int(codec.encode(-0.25)), "(two's complement)")
print("decode(encode(pi)) =", float(codec.decode(codec.encode(np.pi))))

# a product of two encoded values carries 32 fractional bits; truncation
# brings it back to 16
prod = codec.mul(codec.encode(1.5), codec.encode(2.0))
print("1.5 * 2.0 via ring + truncate =", float(codec.decode(codec.truncate(prod))))

# sharing: either share alone is uniformly random
rng = np.random.default_rng(0)
secret = codec.encode(42.0)
s0, s1 = shr(secret, codec, rng)
print("\nshares of 42.0:", hex(int(s0.value)), hex(int(s1.value)))
print("reconstructed:", float(codec.decode(rec(s0, s1, codec))))

# Beaver multiplication: both parties run the same function in lockstep
a0, a1 = shr(codec.encode(3.0), codec, rng)
b0, b1 = shr(codec.encode(5.0), codec, rng)
t0, t1 = gen_scalar_triple(codec, rng)
ch0, ch1 = LocalChannel.make_pair()
c0, c1 = run_pairwise(
    lambda: beaver_mul(a0, b0, t0, ch0, codec),
    lambda: beaver_mul(a1, b1, t1, ch1, codec),
)
print("\n3.0 * 5.0 under sharing =", float(codec.decode(codec.truncate(rec(c0, c1, codec)))))
print("bytes per party for the masked opening:", ch0.bytes_sent)

# the same idea vectorised: a full shared matrix product with one triple per
# cross term
x = rng.uniform(-1, 1, (4, 3))
w = rng.uniform(-1, 1, (3, 2))
x0, x1 = shr_matrix(codec.encode(x), codec, rng)
w0, w1 = shr_matrix(codec.encode(w), codec, rng)
ta = gen_matmul_triple(codec, rng, 4, 3, 2)
tb = gen_matmul_triple(codec, rng, 4, 3, 2)
ch0, ch1 = LocalChannel.make_pair()
p0, p1 = run_pairwise(
    lambda: matmul_shared(x0, w0, (ta[0], tb[0]), ch0, codec),
    lambda: matmul_shared(x1, w1, (ta[1], tb[1]), ch1, codec),
)
got = codec.decode(rec_matrix(p0, p1, codec))
print("\nshared matmul error vs plaintext:", float(np.max(np.abs(got - x @ w))))
print("bytes per party:", ch0.bytes_sent, "(two openings of X- and W-sized masks)")
