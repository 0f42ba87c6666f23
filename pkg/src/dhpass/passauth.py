"""Password-derived client keys via a blinded, jointly keyed PRF.

The client sends ``alpha = H(tag, uid, pw)^rho``; each server raises it to its
key share; the client multiplies the answers and strips ``rho``. The result,
``H(tag, uid, pw)^(sum k_i)``, is hashed into a seed for a signing keypair.
Servers never see the password or anything that depends on it without
``rho`` mixed in.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .blindsig import PlainKeyPair, hash_to_group, sig_kgen
from .encoding import encode_fields
from .group import G1, ORDER, derive_scalar, g1_sum, inverse

OPRF_TAG = b"pesto-oprf"
SEED_TAG = b"pesto-seed"


@dataclass(frozen=True)
class OprfKeyShare:
    share: int = field(repr=False)
    epoch: int = 0

    def __post_init__(self) -> None:
        if self.share % ORDER == 0:
            raise ValueError("OPRF key share must be nonzero")


@dataclass(frozen=True)
class PasswordBlind:
    element: G1
    blinder: int = field(repr=False)


@dataclass(frozen=True)
class OprfEvaluation:
    index: int
    element: G1
    epoch: int = 0


@dataclass(frozen=True)
class DerivedSeed:
    data: bytes = field(repr=False)


@dataclass(frozen=True)
class ClientKeyMaterial:
    keypair: PlainKeyPair


class OprfError(ValueError):
    pass


def oprf_key_from_seed(seed: bytes) -> OprfKeyShare:
    return OprfKeyShare(derive_scalar(b"dhpass-oprf-key", bytes(seed)))


def _password_point(uid: str, pw: str) -> G1:
    if not uid or not pw:
        raise ValueError("uid and password must be non-empty")
    return hash_to_group(encode_fields([OPRF_TAG, uid, pw]))


def oprf_blind(uid: str, pw: str, entropy: bytes, *, blinder: int | None = None) -> PasswordBlind:
    rho = derive_scalar(b"dhpass-oprf-blind", bytes(entropy)) if blinder is None else blinder % ORDER
    if rho == 0:
        raise ValueError("blinder must be nonzero")
    return PasswordBlind(_password_point(uid, pw) * rho, rho)


def oprf_eval(key: OprfKeyShare, alpha: G1, index: int = 1) -> OprfEvaluation:
    if not isinstance(alpha, G1):
        raise TypeError("alpha must be a G1 element")
    if alpha.is_identity():
        raise OprfError("refusing to evaluate on the identity element")
    return OprfEvaluation(index, alpha * key.share, key.epoch)


def oprf_finalize(evals: list[OprfEvaluation], blind: PasswordBlind, uid: str, pw: str,
                  n: int | None = None) -> DerivedSeed:
    n = len(evals) if n is None else n
    indices = sorted(e.index for e in evals)
    if indices != list(range(1, n + 1)):
        raise OprfError(f"need one evaluation per index 1..{n}, got {indices}")
    if len({e.epoch for e in evals}) != 1:
        raise OprfError("evaluations come from different key epochs")
    unblinded = g1_sum(e.element for e in evals) * inverse(blind.blinder)
    digest = hashlib.sha256(encode_fields([SEED_TAG, uid, pw, unblinded.data])).digest()
    return DerivedSeed(digest)


def derive_client_keypair(seed: DerivedSeed) -> ClientKeyMaterial:
    return ClientKeyMaterial(sig_kgen(seed.data))
