"""Shared helpers for statistical assertions in tests."""

import numpy as np


def chi_square_stat(counts, expected):
    counts = np.asarray(counts, dtype=np.float64)
    return float(np.sum((counts - expected) ** 2 / expected))


def chi_square_critical(df: int, z: float = 3.09) -> float:
    # Wilson-Hilferty approximation; z = 3.09 puts alpha near 1e-3
    return df * (1 - 2.0 / (9 * df) + z * np.sqrt(2.0 / (9 * df))) ** 3


def assert_uniform(values, n_bins: int, modulus: int):
    """Chi-square uniformity check for ring-valued samples."""
    values = np.asarray(values).ravel()
    bins = (values.astype(np.float64) / modulus * n_bins).astype(np.int64)
    counts = np.bincount(bins, minlength=n_bins)
    expected = len(values) / n_bins
    stat = chi_square_stat(counts, expected)
    assert stat < chi_square_critical(n_bins - 1), (
        f"chi-square {stat:.1f} exceeds critical value for df={n_bins - 1}"
    )
