"""Deterministic pseudo-randomness for protocol construction.

Everything protocol-related (fold dealing, negative pairing, pair
subsampling, synthetic data) draws from SplitMix64, so runs are
bit-reproducible across platforms and NumPy versions.  SplitMix64 keeps a
single 64-bit state advanced by the golden-gamma increment and finalized
with two xor-shift-multiply rounds (Steele, Lea & Flood, OOPSLA 2014).
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _finalize(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def mix_seed(seed: int, *salts: int) -> int:
    """Derive an independent substream seed from ``seed`` and integer salts."""
    z = seed & _MASK
    for salt in salts:
        z = _finalize((z + _GAMMA) & _MASK) ^ (salt & _MASK)
    return _finalize((z + _GAMMA) & _MASK)


class Rng:
    """SplitMix64 generator with the handful of draws the toolkit needs."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _finalize(self._state)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK - (_MASK + 1) % n
        while True:
            u = self.next_u64()
            if u <= limit:
                return u % n

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates (Durstenfeld) shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n) via Floyd's algorithm, sorted."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        chosen: set[int] = set()
        for j in range(n - k, n):
            t = self.below(j + 1)
            chosen.add(t if t not in chosen else j)
        return sorted(chosen)

    def floats(self, n: int) -> np.ndarray:
        """n uniform float64 samples in [0, 1) with 53-bit resolution."""
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return out

    def normals(self, n: int) -> np.ndarray:
        """n standard-normal samples via Box-Muller on SplitMix64 uniforms."""
        m = (n + 1) // 2
        u1 = 1.0 - self.floats(m)  # (0, 1]: keeps log() finite
        u2 = self.floats(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        pairs = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return pairs[:n]
