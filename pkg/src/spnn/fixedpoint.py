"""Fixed-point encoding of reals into the ring Z_{2^ell}.

Ring elements are plain ``numpy.uint64`` scalars or arrays holding values in
``[0, 2^ell)``.  Values in the upper half of the ring represent negatives via
the two's-complement convention.  All arithmetic wraps modulo ``2^ell``; for
``ell <= 64`` this is exact because native uint64 wrapping followed by masking
agrees with reduction mod ``2^ell``.

Reals are encoded as ``round(x * 2^frac_bits)`` with round-half-away-from-zero,
so a product of two encoded values carries ``2 * frac_bits`` fractional bits
and must be passed through :meth:`FixedPointCodec.truncate` once.
"""

from __future__ import annotations

import numpy as np

from .errors import RangeError

DEFAULT_ELL = 64
DEFAULT_FRAC_BITS = 16


class FixedPointCodec:
    """Parameters of the ring and the fixed-point embedding.

    ell:        ring bit width (2..64).
    frac_bits:  fractional bits; must satisfy 0 < frac_bits < ell / 2 so one
                multiplication of encoded values cannot leave the signed range
                for inputs bounded by 2^(ell/2 - frac_bits - 1).
    """

    def __init__(self, ell: int = DEFAULT_ELL, frac_bits: int = DEFAULT_FRAC_BITS):
        if not 2 <= ell <= 64:
            raise ValueError(f"ring width must be in [2, 64], got {ell}")
        if not 0 < frac_bits < ell / 2:
            raise ValueError(f"need 0 < frac_bits < ell/2, got {frac_bits} for ell={ell}")
        self.ell = ell
        self.frac_bits = frac_bits
        self.modulus = 1 << ell
        self.scale = float(1 << frac_bits)
        # |x| strictly below this encodes without overflowing the signed range
        self.limit = 2.0 ** (ell - frac_bits - 1)
        self._mask = np.uint64(self.modulus - 1)
        self._half = 1 << (ell - 1)

    def __repr__(self):
        return f"FixedPointCodec(ell={self.ell}, frac_bits={self.frac_bits})"

    def __eq__(self, other):
        return (
            isinstance(other, FixedPointCodec)
            and self.ell == other.ell
            and self.frac_bits == other.frac_bits
        )

    # -- encoding ------------------------------------------------------------

    def encode(self, x) -> np.ndarray:
        """Map reals to ring elements: round(x * 2^frac_bits) mod 2^ell.

        Rounding is half-away-from-zero, so encode is deterministic and
        sign-symmetric.  Raises RangeError when |x| reaches the representable
        limit 2^(ell - frac_bits - 1).
        """
        x = np.asarray(x, dtype=np.float64)
        if np.any(~np.isfinite(x)) or np.any(np.abs(x) >= self.limit):
            raise RangeError(f"value exceeds representable range |x| < {self.limit}")
        with np.errstate(over="ignore"):
            magnitude = np.floor(np.abs(x) * self.scale + 0.5).astype(np.uint64)
            out = np.where(x < 0, np.uint64(0) - magnitude, magnitude)
        return out & self._mask

    def decode(self, e) -> np.ndarray:
        """Inverse of encode up to the 2^-(frac_bits+1) rounding error."""
        return self.to_signed(e).astype(np.float64) / self.scale

    def to_signed(self, e) -> np.ndarray:
        """Exact signed (two's-complement) interpretation as int64."""
        e = np.asarray(e, dtype=np.uint64)
        s = e.astype(np.int64)  # two's-complement reinterpretation at ell = 64
        if self.ell == 64:
            return s
        return np.where(s >= self._half, s - self.modulus, s)

    def truncate(self, e) -> np.ndarray:
        """Signed arithmetic right shift by frac_bits, remapped into the ring.

        Applied to a product of two encoded values this drops the extra
        frac_bits fractional bits.
        """
        return self.truncate_bits(e, self.frac_bits)

    def truncate_bits(self, e, bits: int) -> np.ndarray:
        """Signed arithmetic right shift by an arbitrary bit count."""
        shifted = self.to_signed(e) >> np.int64(bits)
        with np.errstate(over="ignore"):
            return shifted.astype(np.uint64) & self._mask

    # -- wrapping ring arithmetic ---------------------------------------------

    def add(self, a, b) -> np.ndarray:
        with np.errstate(over="ignore"):
            return (np.asarray(a, np.uint64) + np.asarray(b, np.uint64)) & self._mask

    def sub(self, a, b) -> np.ndarray:
        with np.errstate(over="ignore"):
            return (np.asarray(a, np.uint64) - np.asarray(b, np.uint64)) & self._mask

    def mul(self, a, b) -> np.ndarray:
        with np.errstate(over="ignore"):
            return (np.asarray(a, np.uint64) * np.asarray(b, np.uint64)) & self._mask

    def neg(self, a) -> np.ndarray:
        with np.errstate(over="ignore"):
            return (np.uint64(0) - np.asarray(a, np.uint64)) & self._mask

    def matmul(self, a, b) -> np.ndarray:
        with np.errstate(over="ignore"):
            return (np.asarray(a, np.uint64) @ np.asarray(b, np.uint64)) & self._mask

    def random(self, rng: np.random.Generator, shape=()) -> np.ndarray:
        """Uniform ring elements."""
        return rng.integers(0, self.modulus, size=shape, dtype=np.uint64)


def ring_add(a, b, codec: FixedPointCodec) -> np.ndarray:
    return codec.add(a, b)


def ring_sub(a, b, codec: FixedPointCodec) -> np.ndarray:
    return codec.sub(a, b)


def ring_mul(a, b, codec: FixedPointCodec) -> np.ndarray:
    return codec.mul(a, b)
