"""Numeric substrate: float64 matrices, a seedable RNG stream, elementwise ops.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. The helpers
here validate shapes and finiteness so that downstream modules can assume
clean inputs.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "RngStream",
    "as_matrix",
    "check_finite",
    "matmul",
    "relu",
    "standard_normal",
    "uniform",
]


def as_matrix(a, name: str = "array") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array (1-D input becomes a row)."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    check_finite(m, name)
    return m


def check_finite(a: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or infinite entries")


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.shape[0]}x{a.shape[1]} "
            f"times {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def relu(m) -> np.ndarray:
    """Elementwise ``max(0, x)``; nonpositive entries become exact zeros."""
    m = np.asarray(m, dtype=np.float64)
    # np.maximum(-0.0, 0.0) may return -0.0; where() gives a clean +0.0
    return np.where(m > 0.0, m, 0.0)


class RngStream:
    """Seeded random stream backed by numpy's PCG64 bit generator.

    Uniform doubles come from ``Generator.random`` (53-bit resolution on
    [0, 1)). Gaussian draws are produced by the Box-Muller transform on top
    of those uniforms rather than numpy's ziggurat, so the sample sequence is
    fully described by the uniform stream.

    Child streams for trial ``i`` use seed ``seed + i`` (see :meth:`child`).
    """

    def __init__(self, seed: int = 0):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"

    def child(self, index: int) -> "RngStream":
        return RngStream((self.seed + int(index)) % 2**64)

    def random(self, size) -> np.ndarray:
        """Uniform doubles on [0, 1)."""
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, high: int, size) -> np.ndarray:
        """Uniform integers on [0, high)."""
        return self._gen.integers(0, high, size=size)

    def standard_normal(self, rows: int, cols: int) -> np.ndarray:
        return standard_normal(self, rows, cols)

    def uniform(self, lo: float, hi: float, rows: int, cols: int) -> np.ndarray:
        return uniform(self, lo, hi, rows, cols)


def standard_normal(rng: RngStream, rows: int, cols: int) -> np.ndarray:
    """I.i.d. N(0, 1) matrix via Box-Muller.

    Each pair of uniforms (u1, u2) yields two normals; for an odd count the
    final sine output is dropped.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"rows and cols must be >= 1, got {rows}x{cols}")
    count = rows * cols
    pairs = (count + 1) // 2
    u = rng.random((pairs, 2))
    # 1 - u lies in (0, 1], so the log is finite
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * math.pi * u[:, 1]
    z = np.empty((pairs, 2))
    z[:, 0] = radius * np.cos(theta)
    z[:, 1] = radius * np.sin(theta)
    return z.reshape(-1)[:count].reshape(rows, cols)


def uniform(rng: RngStream, lo: float, hi: float, rows: int, cols: int) -> np.ndarray:
    """I.i.d. uniform matrix on [lo, hi)."""
    lo = float(lo)
    hi = float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("uniform bounds must be finite")
    if lo >= hi:
        raise ValueError(f"uniform requires lo < hi, got lo={lo}, hi={hi}")
    if rows < 1 or cols < 1:
        raise ValueError(f"rows and cols must be >= 1, got {rows}x{cols}")
    out = lo + (hi - lo) * rng.random((rows, cols))
    # rounding in lo + (hi - lo) * u can land exactly on hi
    return np.minimum(out, np.nextafter(hi, lo))
