"""Adversary experiments: replay, tampering, issuer-side linkage, at-rest scans."""
from __future__ import annotations

import base64
import itertools
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from ..blindsig import VerificationKey, hash_to_group
from ..group import G1, G2, g1_sum, pairings_equal
from ..issuer import IssuanceView
from ..reader import Challenge, Reader, Reason, Token

log = logging.getLogger(__name__)

TOKEN_FIELDS = ("pp_id", "vid", "q", "t", "sig")


# -- replay / tamper --------------------------------------------------------------


def attack_replay(reader: Reader, token: Token, now: int | None = None) -> Reason:
    """Present an already-used token again, with or without a fresh session open."""
    return reader.verify_token(token, now)


def _flip(data: bytes, bit: int) -> bytes:
    b = bytearray(data)
    b[(bit // 8) % len(b)] ^= 1 << (bit % 8)
    return bytes(b)


def mutate(token: Token, field: str, bit: int) -> Token:
    """Flip one bit of one token field. Text fields flip a bit of their UTF-8
    bytes (falling back to appending a character if that breaks decoding)."""
    if field == "t":
        return replace(token, t=token.t ^ (1 << (bit % 63)))
    if field in ("q", "sig"):
        return replace(token, **{field: _flip(getattr(token, field), bit)})
    if field in ("pp_id", "vid"):
        raw = _flip(getattr(token, field).encode("utf-8"), bit)
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            text = getattr(token, field) + "\x00"
        return replace(token, **{field: text})
    raise ValueError(f"unknown token field {field!r}")


def random_mutation(token: Token, rng: random.Random) -> tuple[str, int, Token]:
    field = rng.choice(TOKEN_FIELDS)
    bit = rng.randrange(8 * 48)
    return field, bit, mutate(token, field, bit)


def arm(reader: Reader, token: Token) -> None:
    """Worst case for the reader: its open session already matches whatever
    fields the forged token claims and it has forgotten the nonce, so only
    the signature stands in the way."""
    with reader._lock:
        reader.state.used_nonces.discard(token.q)
        reader.state.active = Challenge(token.vid, token.q, token.t, token.pp_id)


def attack_tamper(reader: Reader, token: Token, field: str, bit: int, *, armed: bool = True,
                  now: int | None = None) -> Reason:
    forged = mutate(token, field, bit)
    if armed:
        arm(reader, forged)
    return reader.verify_token(forged, now)


# -- linkage ------------------------------------------------------------------------


@dataclass(frozen=True)
class IssuerView:
    """What a coalition of all n servers saw in one issuance."""

    uid: str
    pp_id: str
    blinded: G1
    combined: G1  # sum of all partials: the blinded signature


def collude(logs: Sequence[Sequence[IssuanceView]]) -> list[IssuerView]:
    """Merge every server's issuance log into per-issuance views."""
    grouped: dict[tuple[str, str, bytes], list[IssuanceView]] = {}
    order: list[tuple[str, str, bytes]] = []
    for log_ in logs:
        for v in log_:
            key = (v.uid, v.pp_id, v.blinded)
            if key not in grouped:
                grouped[key] = []
                order.append(key)
            grouped[key].append(v)
    out = []
    for key in order:
        parts = grouped[key]
        out.append(IssuerView(key[0], key[1], G1(key[2]), g1_sum(G1(p.partial) for p in parts)))
    return out


def link_score(view: IssuerView, token: Token, vk: G2) -> int:
    """Count relations that tie this issuance to this token."""
    h = hash_to_group(token.message())
    sig = G1(token.sig)
    g2 = G2.generator()
    score = 0
    score += view.blinded == h
    score += view.combined == sig
    # cross pairings: issuance-side group element against token-side one
    score += pairings_equal((view.combined, g2), (h, vk))
    score += pairings_equal((sig, g2), (view.blinded, vk))
    return score


def attack_linkage(views: Sequence[IssuerView], tokens: Sequence[Token],
                   keys: dict[str, VerificationKey], rng: random.Random) -> list[int]:
    """Guess which view produced each token.

    Returns ``assignment`` with ``assignment[k]`` the index into ``views``
    guessed for ``tokens[k]``. The best-scoring permutation wins; ties are
    broken uniformly at random.
    """
    if len(views) != len(tokens):
        raise ValueError("need as many views as tokens")
    scores = [[link_score(v, tok, keys[tok.pp_id].element) for v in views] for tok in tokens]
    best, best_perms = -1, []
    for perm in itertools.permutations(range(len(views))):
        s = sum(scores[k][perm[k]] for k in range(len(tokens)))
        if s > best:
            best, best_perms = s, [perm]
        elif s == best:
            best_perms.append(perm)
    return list(rng.choice(best_perms))


def linkage_accuracy(guess: Sequence[int], truth: Sequence[int]) -> float:
    return sum(g == t for g, t in zip(guess, truth)) / len(truth)


# -- at rest --------------------------------------------------------------------------


def needle_forms(needle: bytes) -> list[bytes]:
    """Raw bytes and the usual text encodings a store might use."""
    forms = [needle, needle.hex().encode(), needle.hex().upper().encode(), base64.b64encode(needle)]
    return [f for f in forms if f]


def scan_at_rest(paths: Iterable[str | Path], needles: Iterable[bytes]) -> list[tuple[Path, int]]:
    """Return ``(file, needle index)`` for every needle found in any file."""
    hits = []
    needles = list(needles)
    for p in paths:
        p = Path(p)
        files = sorted(x for x in p.rglob("*") if x.is_file()) if p.is_dir() else [p]
        for f in files:
            data = f.read_bytes()
            for i, nd in enumerate(needles):
                if any(form in data for form in needle_forms(nd)):
                    hits.append((f, i))
    return hits
