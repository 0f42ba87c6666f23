"""Injectable randomness.

Production code draws from the OS; tests and seeded demo runs pass a
:class:`SeededEntropy` so that whole protocol runs are bit-reproducible.
"""
from __future__ import annotations

import hashlib
import os
import random


class SystemEntropy:
    def bytes(self, n: int) -> bytes:
        return os.urandom(n)

    def fork(self, label: str) -> "SystemEntropy":
        return self


class SeededEntropy:
    """Deterministic byte stream. Not for production key material."""

    def __init__(self, seed: int | str | bytes):
        if isinstance(seed, str):
            seed = seed.encode()
        if isinstance(seed, bytes):
            seed = int.from_bytes(hashlib.sha256(seed).digest(), "big")
        self._seed = seed
        self._rng = random.Random(seed)

    def bytes(self, n: int) -> bytes:
        return self._rng.randbytes(n)

    def fork(self, label: str) -> "SeededEntropy":
        """Independent child stream; the parent stream is not advanced."""
        return SeededEntropy(f"{self._seed}/{label}")


Entropy = SystemEntropy | SeededEntropy
