import hashlib
import os

import pytest

import oracle
from dhpass.group import G1, ORDER
from dhpass.passauth import (
    OprfError, OprfEvaluation, OprfKeyShare, derive_client_keypair, oprf_blind, oprf_eval,
    oprf_finalize, oprf_key_from_seed,
)


def _run(keys, uid, pw, entropy=None, blinder=None):
    blind = oprf_blind(uid, pw, entropy or os.urandom(32), blinder=blinder)
    evals = [oprf_eval(k, blind.element, i) for i, k in enumerate(keys, start=1)]
    return oprf_finalize(evals, blind, uid, pw)


KEYS = [oprf_key_from_seed(bytes([i]) * 32) for i in range(1, 4)]


def test_unit_key_returns_alpha():
    alpha = G1.generator() * 99
    assert oprf_eval(OprfKeyShare(1), alpha).element == alpha


def test_zero_key_rejected():
    with pytest.raises(ValueError):
        OprfKeyShare(ORDER)


def test_eval_rejects_identity():
    with pytest.raises(OprfError):
        oprf_eval(KEYS[0], G1.identity())


def test_seed_matches_oracle():
    uid, pw = "alice", "hunter22"
    k = sum(key.share for key in KEYS) % ORDER
    point_input = oracle.encode_fields([b"pesto-oprf", uid, pw])
    unblinded = oracle.pow_hash(point_input, k)
    expected = hashlib.sha256(oracle.encode_fields([b"pesto-seed", uid, pw, unblinded])).digest()
    assert _run(KEYS, uid, pw).data == expected


def test_blinding_cancels():
    assert _run(KEYS, "bob", "pw12345678").data == _run(KEYS, "bob", "pw12345678").data


def test_different_password_or_uid_differs():
    base = _run(KEYS, "bob", "pw12345678").data
    assert _run(KEYS, "bob", "pw12345679").data != base
    assert _run(KEYS, "bob2", "pw12345678").data != base


def test_finalize_needs_all_indices_and_one_epoch():
    blind = oprf_blind("u", "p", os.urandom(32))
    evals = [oprf_eval(k, blind.element, i) for i, k in enumerate(KEYS, start=1)]
    with pytest.raises(OprfError):
        oprf_finalize(evals[:2], blind, "u", "p", n=3)
    mixed = evals[:2] + [OprfEvaluation(3, evals[2].element, epoch=1)]
    with pytest.raises(OprfError):
        oprf_finalize(mixed, blind, "u", "p")


def test_same_seed_same_keypair():
    seed = _run(KEYS, "carol", "longpassword")
    assert derive_client_keypair(seed) == derive_client_keypair(seed)


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        oprf_blind("", "pw", os.urandom(32))
    with pytest.raises(ValueError):
        oprf_blind("u", "", os.urandom(32))
