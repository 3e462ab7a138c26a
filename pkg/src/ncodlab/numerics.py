"""Dense numeric primitives and the seeded random generator.

Vectors and matrices are plain ``numpy.float64`` arrays; nothing here
allocates wrapper types.

Random streams use the Philox-4x64 counter-based generator (via
``numpy.random.Philox``). A stream is fully determined by a 64-bit seed and
an optional stream name; named sub-streams are keyed with CRC-32 of the name
so they do not depend on Python's randomized ``hash``. Gaussian draws use
numpy's ziggurat sampler, which is platform independent.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import LengthMismatch, NegativeStd, ZeroVector

LOG_EPS = 1e-12
ZERO_NORM = 1e-30

_SEED_MASK = (1 << 64) - 1


class Rng:
    """Deterministic Philox stream.

    ``Rng(seed)`` and ``Rng(seed, "name")`` are independent streams; both are
    reproducible across runs and platforms.
    """

    def __init__(self, seed: int, stream: str | None = None):
        self.seed = int(seed) & _SEED_MASK
        self.stream = stream
        entropy = [self.seed]
        if stream is not None:
            entropy.append(zlib.crc32(stream.encode("utf-8")))
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def child(self, name: str) -> "Rng":
        """Independent named sub-stream of the same seed."""
        full = name if self.stream is None else f"{self.stream}/{name}"
        return Rng(self.seed, full)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, mean=0.0, std=1.0, size=None):
        return self._gen.normal(mean, std, size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream!r})"


def l2_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.sqrt(np.dot(v, v)))
    if not norm > ZERO_NORM:
        raise ZeroVector(f"cannot normalize vector with norm {norm:.3g}")
    return v / norm


def softmax(logits) -> np.ndarray:
    """Softmax over the last axis, max-shifted for overflow safety."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"dot of lengths {a.shape} and {b.shape}")
    return float(np.dot(a, b))


def safe_log(x):
    """``log(max(x, LOG_EPS))``."""
    return np.log(np.maximum(x, LOG_EPS))


def sample_gaussian(rng: Rng, mean: float, std: float) -> float:
    if std < 0:
        raise NegativeStd(f"std must be >= 0, got {std}")
    if std == 0:
        return float(mean)
    return float(rng.normal(mean, std))
