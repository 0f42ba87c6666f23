"""(n, n) XOR secret sharing with a digest guard on reconstruction."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

from .errors import IntegrityError


@dataclass(frozen=True)
class Share:
    index: int
    data: bytes

    def __repr__(self) -> str:
        return f"Share(index={self.index}, len={len(self.data)})"


@dataclass(frozen=True)
class ShareRecord:
    digest: bytes
    share: Share

    def to_json(self) -> dict:
        return {"d": self.digest.hex(), "i": self.share.index, "x": self.share.data.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> "ShareRecord":
        return cls(bytes.fromhex(obj["d"]), Share(int(obj["i"]), bytes.fromhex(obj["x"])))


class ShareError(ValueError):
    """Shares are missing, duplicated or of unequal length."""


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ShareError("length mismatch")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def xor_share(secret: bytes, n: int, random_bytes: Callable[[int], bytes]) -> list[Share]:
    """Shares 1..n-1 come straight from ``random_bytes``; share n absorbs the secret.

    The secret is only touched after all random shares have been drawn.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not secret:
        raise ValueError("secret must be non-empty")
    ell = len(secret)
    pads = [random_bytes(ell) for _ in range(n - 1)]
    last = bytes(secret)
    for p in pads:
        last = xor_bytes(last, p)
    return [Share(i + 1, p) for i, p in enumerate(pads)] + [Share(n, last)]


def _check_bundle(shares: list[Share]) -> int:
    if not shares:
        raise ShareError("no shares")
    n = len(shares)
    indices = sorted(s.index for s in shares)
    if indices != list(range(1, n + 1)):
        raise ShareError(f"expected one share per index 1..{n}, got {indices}")
    lengths = {len(s.data) for s in shares}
    if len(lengths) != 1:
        raise ShareError(f"share lengths differ: {sorted(lengths)}")
    return lengths.pop()


def xor_reconstruct_into(shares: list[Share], buf: bytearray) -> None:
    """XOR the shares into a caller-owned buffer (which the caller can zeroize)."""
    ell = _check_bundle(shares)
    if len(buf) != ell:
        raise ShareError("buffer length does not match share length")
    for i in range(ell):
        buf[i] = 0
    for s in shares:
        for i, byte in enumerate(s.data):
            buf[i] ^= byte


def xor_reconstruct(shares: list[Share]) -> bytes:
    ell = _check_bundle(shares)
    acc = 0
    for s in shares:
        acc ^= int.from_bytes(s.data, "big")
    return acc.to_bytes(ell, "big")


def secret_digest(secret: bytes) -> bytes:
    return hashlib.sha256(bytes(secret)).digest()


def guarded_reconstruct(records: list[ShareRecord], buf: bytearray | None = None) -> bytes | bytearray:
    """Reconstruct and check against the common digest.

    Raises ShareError if the records disagree on the digest and IntegrityError
    if the reconstruction does not hash to it. With ``buf`` the secret is
    written into that buffer (and wiped on failure) and the buffer is returned.
    """
    digests = {r.digest for r in records}
    if len(digests) != 1:
        raise ShareError("records carry different digests")
    (d,) = digests
    shares = [r.share for r in records]
    if buf is None:
        secret = xor_reconstruct(shares)
        if secret_digest(secret) != d:
            raise IntegrityError("reconstructed secret does not match its digest")
        return secret
    xor_reconstruct_into(shares, buf)
    if secret_digest(buf) != d:
        zeroize(buf)
        raise IntegrityError("reconstructed secret does not match its digest")
    return buf


def zeroize(buf: bytearray) -> None:
    for i in range(len(buf)):
        buf[i] = 0
