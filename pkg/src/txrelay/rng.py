"""Seeded random streams.

All randomness in a run flows through :class:`SeededRng`, a thin wrapper over
:class:`random.Random` (MT19937). Its ``random()``/``getrandbits()`` output is
identical across platforms and CPython versions for a given integer seed.
Sub-streams are derived by hashing ``(seed, label)`` so that, e.g., the
topology does not change when the protocol consumes more draws.
"""

from __future__ import annotations

import hashlib
import math
import random
from typing import Sequence, TypeVar

T = TypeVar("T")

__all__ = ["BadRate", "SeededRng", "derive_seed", "sample_exponential"]


class BadRate(ValueError):
    """Raised for a non-positive exponential rate."""


def derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class SeededRng:
    __slots__ = ("seed", "_r")

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._r = random.Random(self.seed)

    def derive(self, label: str) -> "SeededRng":
        return SeededRng(derive_seed(self.seed, label))

    def random(self) -> float:
        return self._r.random()

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self._r.random()

    def randbelow(self, n: int) -> int:
        # getrandbits-based rejection sampling; unbiased and version-stable
        if n <= 0:
            raise ValueError("n must be positive")
        k = n.bit_length()
        r = self._r.getrandbits(k)
        while r >= n:
            r = self._r.getrandbits(k)
        return r

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self.randbelow(len(seq))]

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        """Uniform sample of ``k`` items without replacement (partial Fisher-Yates)."""
        pool = list(seq)
        n = len(pool)
        if not 0 <= k <= n:
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def expovariate(self, rate: float) -> float:
        return -math.log(1.0 - self._r.random()) / rate


def sample_exponential(rng: SeededRng, rate: float) -> float:
    """Draw one Exp(rate) delay in seconds."""
    if not rate > 0 or math.isinf(rate):
        raise BadRate(f"rate must be a positive finite number, got {rate!r}")
    return rng.expovariate(rate)
