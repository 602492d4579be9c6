"""Paillier additive homomorphic encryption with signed fixed-point plaintexts.

Simplified variant with generator ``g = n + 1``, so encryption is
``(1 + m*n) * r^n mod n^2`` and the private exponent equals Euler's phi.
Ciphertext addition is multiplication mod ``n^2``.  Reals are embedded into
``Z_n`` by scaling with ``2^frac_bits`` and mapping negatives to the upper
half of the plaintext space (decode threshold ``n / 2``).

Big-integer exponentiation is delegated to gmpy2 when available; the pure
Python fallback is an order of magnitude slower but correct.

Wire formats: ciphertext = u32 big-endian length prefix followed by big-endian
magnitude bytes; public key = the modulus n in the same framing.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass, field

from .errors import KeyMismatch, MalformedCiphertext, PlaintextOutOfRange, RangeError

try:
    import gmpy2

    def _powmod(base: int, exp: int, mod: int) -> int:
        return int(gmpy2.powmod(base, exp, mod))

except ImportError:  # pragma: no cover - exercised only without gmpy2
    def _powmod(base: int, exp: int, mod: int) -> int:
        return pow(base, exp, mod)


def _invert(a: int, mod: int) -> int:
    return pow(a, -1, mod)


DEFAULT_KEY_BITS = 2048
TEST_KEY_BITS = 512

_MR_ROUNDS = 40
_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def _is_probable_prime(n: int, rng: random.Random) -> bool:
    if n < 2 or n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(_MR_ROUNDS):
        a = rng.randrange(2, n - 1)
        x = _powmod(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if _is_probable_prime(candidate, rng):
            return candidate


# -- keys ----------------------------------------------------------------------

@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    n_sq: int = field(repr=False)

    @classmethod
    def from_modulus(cls, n: int) -> "PaillierPublicKey":
        return cls(n=n, n_sq=n * n)

    @property
    def g(self) -> int:
        return self.n + 1

    def to_bytes(self) -> bytes:
        raw = self.n.to_bytes((self.n.bit_length() + 7) // 8, "big")
        return struct.pack(">I", len(raw)) + raw

    @classmethod
    def from_bytes(cls, data: bytes) -> "PaillierPublicKey":
        (length,) = struct.unpack_from(">I", data)
        return cls.from_modulus(int.from_bytes(data[4 : 4 + length], "big"))

    def __eq__(self, other):
        return isinstance(other, PaillierPublicKey) and self.n == other.n


@dataclass(frozen=True)
class PaillierSecretKey:
    public: PaillierPublicKey
    p: int = field(repr=False)
    q: int = field(repr=False)
    lam: int = field(repr=False)  # phi(n) in the g = n + 1 variant
    mu: int = field(repr=False)
    # CRT residues for the basic decryption speedup
    _hp: int = field(repr=False)
    _hq: int = field(repr=False)
    _q_inv_p: int = field(repr=False)


@dataclass(frozen=True)
class PaillierKeypair:
    pk: PaillierPublicKey
    sk: PaillierSecretKey


@dataclass(frozen=True)
class Ciphertext:
    value: int
    n: int = field(repr=False)  # public modulus it was produced under

    def to_bytes(self) -> bytes:
        raw = self.value.to_bytes((self.value.bit_length() + 7) // 8 or 1, "big")
        return struct.pack(">I", len(raw)) + raw

    @classmethod
    def from_bytes(cls, data: bytes, pk: PaillierPublicKey) -> tuple["Ciphertext", int]:
        """Decode one length-prefixed ciphertext; returns (ct, bytes consumed)."""
        (length,) = struct.unpack_from(">I", data)
        value = int.from_bytes(data[4 : 4 + length], "big")
        return cls(value=value, n=pk.n), 4 + length


def _L(x: int, n: int) -> int:
    return (x - 1) // n


def keygen(bits: int = DEFAULT_KEY_BITS, rng: random.Random | None = None) -> PaillierKeypair:
    """Generate a keypair with an n of `bits` bits; deterministic under a seeded rng."""
    if bits < 16:
        raise ValueError("key size too small to be meaningful")
    rng = rng if rng is not None else random.SystemRandom()
    half = bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(half, rng)
        if p == q:
            continue
        n = p * q
        phi = (p - 1) * (q - 1)
        if n.bit_length() != bits or math.gcd(n, phi) != 1:
            continue
        break
    pk = PaillierPublicKey.from_modulus(n)
    g = pk.g
    p_sq, q_sq = p * p, q * q
    hp = _invert(_L(_powmod(g, p - 1, p_sq), p), p)
    hq = _invert(_L(_powmod(g, q - 1, q_sq), q), q)
    sk = PaillierSecretKey(
        public=pk, p=p, q=q, lam=phi, mu=_invert(phi % n, n),
        _hp=hp, _hq=hq, _q_inv_p=_invert(q, p),
    )
    return PaillierKeypair(pk=pk, sk=sk)


# -- core operations -------------------------------------------------------------

def encrypt(pk: PaillierPublicKey, m: int, rng: random.Random | None = None) -> Ciphertext:
    """Encrypt a plaintext in [0, n): c = (1 + m*n) * r^n mod n^2, r fresh."""
    if not 0 <= m < pk.n:
        raise PlaintextOutOfRange(f"plaintext must lie in [0, n), got {m}")
    rng = rng if rng is not None else random.SystemRandom()
    while True:
        r = rng.randrange(1, pk.n)
        if math.gcd(r, pk.n) == 1:
            break
    c = (1 + m * pk.n) % pk.n_sq * _powmod(r, pk.n, pk.n_sq) % pk.n_sq
    return Ciphertext(value=c, n=pk.n)


def decrypt(sk: PaillierSecretKey, ct: Ciphertext) -> int:
    """Exact plaintext recovery via CRT over p and q."""
    n = sk.public.n
    if ct.n != n:
        raise KeyMismatch("ciphertext was produced under a different public key")
    if not 0 < ct.value < sk.public.n_sq or math.gcd(ct.value, sk.public.n_sq) != 1:
        raise MalformedCiphertext("ciphertext fails range / gcd validity checks")
    p, q = sk.p, sk.q
    mp = _L(_powmod(ct.value, p - 1, p * p), p) * sk._hp % p
    mq = _L(_powmod(ct.value, q - 1, q * q), q) * sk._hq % q
    return (mq + q * ((mp - mq) * sk._q_inv_p % p)) % n


def add_ct(c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Homomorphic addition: ciphertext product decrypts to the plaintext sum."""
    if c1.n != c2.n:
        raise KeyMismatch("ciphertexts under different public keys")
    n_sq = c1.n * c1.n
    return Ciphertext(value=c1.value * c2.value % n_sq, n=c1.n)


# -- signed fixed-point plaintext embedding ---------------------------------------

class SignedEncoder:
    """Embed signed scaled reals into Z_n with decode threshold n/2.

    The magnitude bound must satisfy 2 * bound * 2^frac_bits < n so that the
    expected number of homomorphic additions cannot wrap the signed range.
    """

    def __init__(self, n: int, frac_bits: int = 16, bound: float = 2.0**40):
        if 2 * bound * 2.0**frac_bits >= n:
            raise ValueError("bound too large for this modulus")
        self.n = n
        self.frac_bits = frac_bits
        self.bound = bound
        self.scale = 2.0**frac_bits

    def encode_scaled(self, s: int) -> int:
        """Embed an already-scaled signed integer."""
        if abs(s) > self.bound * self.scale:
            raise RangeError(f"scaled magnitude {s} exceeds encoder bound")
        return s % self.n

    def encode_signed(self, x: float) -> int:
        if abs(x) > self.bound:
            raise RangeError(f"|{x}| exceeds encoder bound {self.bound}")
        magnitude = int(math.floor(abs(x) * self.scale + 0.5))
        return self.encode_scaled(-magnitude if x < 0 else magnitude)

    def decode_signed(self, m: int) -> float:
        if m > self.n // 2:
            m -= self.n
        return m / self.scale
