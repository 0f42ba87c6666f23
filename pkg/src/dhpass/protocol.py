"""Canonical tuples that parties sign or hash. Every party must agree on these
byte-for-byte, so they live in one place."""
from __future__ import annotations

from typing import Sequence

from .encoding import canonical_json, encode_fields, u32, u64

NONCE_BYTES = 16
CHALLENGE_NONCE_BYTES = 32


def _nonce_list(nonces: Sequence[bytes]) -> bytes:
    return encode_fields(u32(i) + bytes(nc) for i, nc in enumerate(nonces, start=1))


def enrolment_tuple(uid: str, client_key: bytes, se_key: bytes, consent: bytes,
                    nonces: Sequence[bytes]) -> bytes:
    # aux = consent followed by the per-server round-1 nonces
    aux = encode_fields([consent, _nonce_list(nonces)])
    return encode_fields([b"dhpass-enrol", uid, client_key, se_key, aux])


def issuance_tuple(uid: str, pp_id: str, nonces: Sequence[bytes], blinded: bytes) -> bytes:
    return encode_fields([b"dhpass-issue", uid, pp_id, _nonce_list(nonces), blinded])


def abort_tuple(uid: str, nonce: bytes) -> bytes:
    return encode_fields([b"dhpass-enrol-abort", uid, nonce])


def token_message(pp_id: str, vid: str, q: bytes, t: int) -> bytes:
    """The message m = (pp, vid, q, t) that the issuer signs blindly."""
    return encode_fields([pp_id, vid, q, u64(t)])


def authority_message(uid: str, record: bytes) -> bytes:
    return encode_fields([b"dhpass-ha-push", uid, record])


def peer_message(msg_type: str, sender: int, receiver: int, body: dict) -> bytes:
    return encode_fields([b"dhpass-peer", msg_type, u32(sender), u32(receiver), canonical_json(body)])
