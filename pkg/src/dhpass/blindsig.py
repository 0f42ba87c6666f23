"""Signature machinery.

Two schemes share one algebra (pairing-based short signatures, signatures in
G1 and keys in G2):

* a plain scheme for client and secure-element keys (``sig_*``);
* a distributed scheme whose key exists only as additive shares held by the
  issuer servers (``dsig_*``), with blinding for issuance and zero-sum
  refresh of the shares.

Signing is deterministic: ``sign(sk, m) = H(m)^sk``. A combined signature is
therefore byte-identical to the one a single holder of ``sum(sk_i)`` would
produce, and an unblinded signature is identical to a direct one.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .group import (
    G1, G2, ORDER, POP_DST, SIG_DST, derive_scalar, g1_sum, g2_sum, inverse,
    pairings_equal,
)

# -- types -------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    element: G1

    def to_bytes(self) -> bytes:
        return self.element.data

    @classmethod
    def from_bytes(cls, b: bytes) -> "Signature":
        return cls(G1.from_bytes(b))


@dataclass(frozen=True)
class PlainKeyPair:
    secret: int = field(repr=False)
    public: G2


@dataclass(frozen=True)
class SigningKeyShare:
    index: int
    share: int = field(repr=False)
    epoch: int = 0
    policy_label: str = ""

    def public_contribution(self) -> G2:
        return G2.generator() * self.share


@dataclass(frozen=True)
class VerificationKey:
    element: G2
    policy_label: str = ""

    def to_bytes(self) -> bytes:
        return self.element.data


@dataclass(frozen=True)
class PartialSignature:
    index: int
    element: G1
    epoch: int = 0


@dataclass(frozen=True)
class BlindedMessage:
    element: G1


@dataclass(frozen=True)
class BlindingTrapdoor:
    blinder: int = field(repr=False)
    message: bytes = field(repr=False)


@dataclass(frozen=True)
class KeyContribution:
    """One server's public share of a dealerless key, with proof of possession."""

    index: int
    public: G2
    pop: Signature


class KeygenError(ValueError):
    pass


class CombineError(ValueError):
    pass


# -- hashing -------------------------------------------------------------------


def hash_to_group(m: bytes) -> G1:
    if not m:
        raise ValueError("cannot hash an empty message")
    return G1.hash(bytes(m), SIG_DST)


# -- plain scheme ------------------------------------------------------------


def sig_kgen(seed: bytes) -> PlainKeyPair:
    sk = derive_scalar(b"dhpass-sig-kgen", bytes(seed))
    return PlainKeyPair(sk, G2.generator() * sk)


def sig_sign(secret: int, m: bytes) -> Signature:
    if secret % ORDER == 0:
        raise ValueError("secret scalar must be nonzero")
    return Signature(hash_to_group(m) * secret)


def _as_g2(public) -> G2:
    if isinstance(public, G2):
        return public
    if isinstance(public, VerificationKey):
        return public.element
    return G2.from_bytes(public)


def _as_sig(sig) -> G1:
    if isinstance(sig, Signature):
        return sig.element
    if isinstance(sig, G1):
        return sig
    return G1.from_bytes(sig)


def sig_vf(public, m: bytes, sig) -> bool:
    """Accept iff e(sig, g2) == e(H(m), public). Never raises on bad input."""
    try:
        pk = _as_g2(public)
        s = _as_sig(sig)
        if pk.is_identity() or s.is_identity() or not m:
            return False
        return pairings_equal((s, G2.generator()), (hash_to_group(bytes(m)), pk))
    except (ValueError, TypeError):
        return False


# -- proof of possession -------------------------------------------------------


def pop_prove(secret: int, public: G2) -> Signature:
    return Signature(G1.hash(public.data, POP_DST) * secret)


def pop_verify(public: G2, pop: Signature) -> bool:
    try:
        if public.is_identity() or pop.element.is_identity():
            return False
        return pairings_equal((pop.element, G2.generator()), (G1.hash(public.data, POP_DST), public))
    except (ValueError, TypeError):
        return False


# -- distributed scheme --------------------------------------------------------


def dsig_share_from_seed(index: int, seed: bytes, policy_label: str = "") -> SigningKeyShare:
    """Self-generated key share for one server (dealerless)."""
    sk = derive_scalar(b"dhpass-dsig-share", policy_label.encode() + b"\x00" + bytes(seed))
    return SigningKeyShare(index=index, share=sk, epoch=0, policy_label=policy_label)


def contribute(share: SigningKeyShare) -> KeyContribution:
    pub = share.public_contribution()
    return KeyContribution(share.index, pub, pop_prove(share.share, pub))


def aggregate_key(contributions: list[KeyContribution], n: int, policy_label: str = "") -> VerificationKey:
    """Check every proof of possession and multiply the contributions together."""
    indices = [c.index for c in contributions]
    if len(set(indices)) != len(indices):
        raise KeygenError("duplicate share index")
    if sorted(indices) != list(range(1, n + 1)):
        raise KeygenError(f"expected one contribution per index 1..{n}, got {sorted(indices)}")
    for c in contributions:
        if not pop_verify(c.public, c.pop):
            raise KeygenError(f"proof of possession failed for index {c.index}")
    pk = g2_sum(c.public for c in contributions)
    if pk.is_identity():
        raise KeygenError("aggregate key is the identity")
    return VerificationKey(pk, policy_label)


def dsig_kgen(n: int, seeds: list[bytes], policy_label: str = "",
              indices: list[int] | None = None) -> tuple[list[SigningKeyShare], VerificationKey]:
    """Run the dealerless ceremony locally: every share comes from its own seed."""
    if n < 1:
        raise KeygenError("n must be at least 1")
    if len(seeds) != n:
        raise KeygenError("need exactly one seed per share")
    indices = list(range(1, n + 1)) if indices is None else list(indices)
    if len(set(indices)) != len(indices):
        raise KeygenError("duplicate share index")
    shares = [dsig_share_from_seed(i, s, policy_label) for i, s in zip(indices, seeds)]
    vk = aggregate_key([contribute(s) for s in shares], n, policy_label)
    return shares, vk


def dsig_sign(share: SigningKeyShare, target: G1) -> PartialSignature:
    if not isinstance(target, G1):
        raise TypeError("partial signing target must be a G1 element")
    if target.is_identity():
        raise ValueError("refusing to sign the identity element")
    return PartialSignature(share.index, target * share.share, share.epoch)


def dsig_comb(partials: list[PartialSignature], n: int | None = None) -> Signature:
    if not partials:
        raise CombineError("no partial signatures")
    n = len(partials) if n is None else n
    indices = sorted(p.index for p in partials)
    if indices != list(range(1, n + 1)):
        missing = sorted(set(range(1, n + 1)) - set(indices))
        raise CombineError(f"need exactly one partial per index 1..{n}; missing {missing}, got {indices}")
    epochs = {p.epoch for p in partials}
    if len(epochs) != 1:
        raise CombineError(f"partials come from different epochs {sorted(epochs)}")
    return Signature(g1_sum(p.element for p in partials))


def dsig_vf(pk, m: bytes, sig) -> bool:
    return sig_vf(pk, m, sig)


def dsig_blind(m: bytes, entropy: bytes, *, blinder: int | None = None) -> tuple[BlindedMessage, BlindingTrapdoor]:
    """Blind ``m`` as H(m)^r. ``blinder`` overrides r (test hook)."""
    if not m:
        raise ValueError("cannot blind an empty message")
    r = derive_scalar(b"dhpass-blind", bytes(entropy)) if blinder is None else blinder % ORDER
    if r == 0:
        raise ValueError("blinder must be nonzero")
    beta = hash_to_group(m) * r
    return BlindedMessage(beta), BlindingTrapdoor(r, bytes(m))


def dsig_unblind(sig: Signature, trapdoor: BlindingTrapdoor) -> Signature:
    return Signature(sig.element * inverse(trapdoor.blinder))


def dsig_refresh_deltas(n: int, entropy: bytes) -> list[int]:
    """n scalars, uniform subject to summing to zero mod the group order."""
    if n < 2:
        raise ValueError("refresh needs at least two shares")
    deltas = []
    for i in range(n - 1):
        h = hashlib.sha512(b"dhpass-refresh\x00" + bytes(entropy) + i.to_bytes(4, "big")).digest()
        deltas.append(int.from_bytes(h, "big") % ORDER)
    deltas.append(-sum(deltas) % ORDER)
    return deltas


def apply_deltas(share: SigningKeyShare, deltas: list[int]) -> SigningKeyShare:
    new = (share.share + sum(deltas)) % ORDER
    if new == 0:
        raise ValueError("refresh produced a zero share")
    return SigningKeyShare(share.index, new, share.epoch + 1, share.policy_label)
