"""BLS12-381 group elements, scalars and an operation counter.

Points are held in canonical compressed form (48 bytes in G1, 96 in G2), so
equality and hashing are plain byte comparisons. All arithmetic is delegated
to the native ``_bls`` extension.
"""
from __future__ import annotations

import contextlib
import contextvars
import hashlib
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator

from . import _bls

ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
SCALAR_BYTES = 32

SIG_DST = b"BLS_SIG_BLS12381G1_XMD:SHA-256_SSWU_RO_NUL_"
POP_DST = b"BLS_POP_BLS12381G1_XMD:SHA-256_SSWU_RO_POP_"

_G1_INF = b"\xc0" + bytes(47)
_G2_INF = b"\xc0" + bytes(95)


# -- operation counting -------------------------------------------------------

_role: contextvars.ContextVar[str] = contextvars.ContextVar("dhpass_role", default="unattributed")


class OpCounter:
    """Thread-safe tally of group operations keyed by (role, kind)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: Counter[tuple[str, str]] = Counter()

    def bump(self, kind: str, amount: int = 1) -> None:
        key = (_role.get(), kind)
        with self._lock:
            self._counts[key] += amount

    def snapshot(self) -> Counter[tuple[str, str]]:
        with self._lock:
            return Counter(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


OPS = OpCounter()


@contextlib.contextmanager
def acting_as(role: str) -> Iterator[None]:
    """Attribute group operations performed inside the block to ``role``."""
    token = _role.set(role)
    try:
        yield
    finally:
        _role.reset(token)


def current_role() -> str:
    return _role.get()


@contextlib.contextmanager
def count_ops() -> Iterator[Counter[tuple[str, str]]]:
    """Yield a Counter that is filled with the operations done inside the block."""
    before = OPS.snapshot()
    delta: Counter[tuple[str, str]] = Counter()
    try:
        yield delta
    finally:
        after = OPS.snapshot()
        after.subtract(before)
        delta.update({k: v for k, v in after.items() if v})


# -- scalars -----------------------------------------------------------------

def scalar_to_bytes(k: int) -> bytes:
    return (k % ORDER).to_bytes(SCALAR_BYTES, "big")


def scalar_from_bytes(b: bytes) -> int:
    if len(b) != SCALAR_BYTES:
        raise ValueError("scalar encoding must be 32 bytes")
    k = int.from_bytes(b, "big")
    if k >= ORDER:
        raise ValueError("scalar not reduced modulo the group order")
    return k


def derive_scalar(label: bytes, material: bytes) -> int:
    """Map ``material`` to a nonzero scalar; re-hash with a counter on zero."""
    ctr = 0
    while True:
        h = hashlib.sha512(label + b"\x00" + material + ctr.to_bytes(4, "big")).digest()
        k = int.from_bytes(h, "big") % ORDER
        if k:
            return k
        ctr += 1


def inverse(k: int) -> int:
    if k % ORDER == 0:
        raise ZeroDivisionError("zero scalar has no inverse")
    return pow(k, -1, ORDER)


# -- group elements ------------------------------------------------------------

@dataclass(frozen=True)
class G1:
    data: bytes

    @classmethod
    def from_bytes(cls, b: bytes) -> "G1":
        b = bytes(b)
        _bls.g1_check(b)
        return cls(b)

    @classmethod
    def generator(cls) -> "G1":
        return cls(_G1_GEN)

    @classmethod
    def identity(cls) -> "G1":
        return cls(_G1_INF)

    @classmethod
    def hash(cls, msg: bytes, dst: bytes = SIG_DST) -> "G1":
        OPS.bump("hash_to_g1")
        return cls(_bls.g1_hash(msg, dst))

    def is_identity(self) -> bool:
        return self.data == _G1_INF

    def __mul__(self, k: int) -> "G1":
        OPS.bump("g1_exp")
        return G1(_bls.g1_mul(self.data, scalar_to_bytes(k)))

    __rmul__ = __mul__

    def __add__(self, other: "G1") -> "G1":
        return G1(_bls.g1_add(self.data, other.data))

    def __neg__(self) -> "G1":
        return G1(_bls.g1_neg(self.data))

    def __bytes__(self) -> bytes:
        return self.data

    def hex(self) -> str:
        return self.data.hex()


@dataclass(frozen=True)
class G2:
    data: bytes

    @classmethod
    def from_bytes(cls, b: bytes) -> "G2":
        b = bytes(b)
        _bls.g2_check(b)
        return cls(b)

    @classmethod
    def generator(cls) -> "G2":
        return cls(_G2_GEN)

    @classmethod
    def identity(cls) -> "G2":
        return cls(_G2_INF)

    def is_identity(self) -> bool:
        return self.data == _G2_INF

    def __mul__(self, k: int) -> "G2":
        OPS.bump("g2_exp")
        return G2(_bls.g2_mul(self.data, scalar_to_bytes(k)))

    __rmul__ = __mul__

    def __add__(self, other: "G2") -> "G2":
        return G2(_bls.g2_add(self.data, other.data))

    def __bytes__(self) -> bytes:
        return self.data

    def hex(self) -> str:
        return self.data.hex()


_G1_GEN = _bls.g1_generator()
_G2_GEN = _bls.g2_generator()


def g1_sum(points: Iterable[G1]) -> G1:
    acc = G1.identity()
    for p in points:
        acc = acc + p
    return acc


def g2_sum(points: Iterable[G2]) -> G2:
    acc = G2.identity()
    for p in points:
        acc = acc + p
    return acc


def pairings_equal(a: tuple[G1, G2], b: tuple[G1, G2]) -> bool:
    """Return e(a0, a1) == e(b0, b1), using one shared final exponentiation."""
    OPS.bump("pairing", 2)
    return _bls.pairing_product_is_one([(a[0].data, a[1].data), ((-b[0]).data, b[1].data)])
