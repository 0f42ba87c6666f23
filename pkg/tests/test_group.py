import json
from pathlib import Path

import pytest

import oracle
from dhpass.group import (
    G1, G2, OPS, ORDER, POP_DST, SIG_DST, acting_as, count_ops, derive_scalar, inverse,
    pairings_equal, scalar_from_bytes, scalar_to_bytes,
)

VECTORS = json.loads((Path(__file__).parent / "fixtures" / "vectors.json").read_text())


def test_order_matches_oracle():
    assert ORDER == oracle.ORDER
    assert SIG_DST == oracle.SIG_DST and POP_DST == oracle.POP_DST


@pytest.mark.parametrize("v", VECTORS["hash_to_g1"] + VECTORS["hash_to_g1_pop"])
def test_hash_to_g1_vectors(v):
    assert G1.hash(bytes.fromhex(v["msg"]), v["dst"].encode()).hex() == v["point"]


@pytest.mark.parametrize("v", VECTORS["g1_mul_generator"])
def test_g1_scalar_mul_vectors(v):
    assert (G1.generator() * int(v["k"], 16)).hex() == v["point"]


@pytest.mark.parametrize("v", VECTORS["public_key"])
def test_g2_scalar_mul_vectors(v):
    assert (G2.generator() * int(v["sk"], 16)).hex() == v["pk"]


def test_generators_match_oracle():
    assert G1.generator().data == oracle.g1_bytes(oracle.bls.G1)
    assert G2.generator().data == oracle.g2_bytes(oracle.bls.G2)


def test_group_laws():
    g = G1.generator()
    assert g * 2 == g + g
    assert (g + (-g)).is_identity()
    assert g * ORDER == G1.identity()
    assert G2.generator() * 3 == G2.generator() + G2.generator() + G2.generator()


def test_from_bytes_rejects_off_curve():
    bad = bytearray(G1.generator().data)
    bad[-1] ^= 1
    with pytest.raises(ValueError):
        G1.from_bytes(bytes(bad))
    with pytest.raises(ValueError):
        G1.from_bytes(b"\x00" * 47)
    with pytest.raises(ValueError):
        G2.from_bytes(G1.generator().data)


def test_pairing_bilinearity():
    a, b = 1234567, 7654321
    assert pairings_equal((G1.generator() * a, G2.generator() * b), (G1.generator() * (a * b % ORDER), G2.generator()))
    assert not pairings_equal((G1.generator() * a, G2.generator()), (G1.generator(), G2.generator() * (a + 1)))


def test_scalar_codec():
    assert scalar_from_bytes(scalar_to_bytes(ORDER - 1)) == ORDER - 1
    with pytest.raises(ValueError):
        scalar_from_bytes(ORDER.to_bytes(32, "big"))
    assert inverse(5) * 5 % ORDER == 1
    with pytest.raises(ZeroDivisionError):
        inverse(0)
    assert 0 < derive_scalar(b"x", b"y") < ORDER
    assert derive_scalar(b"x", b"y") == derive_scalar(b"x", b"y")


def test_op_counter_attributes_roles():
    with count_ops() as ops:
        with acting_as("alice"):
            G1.generator() * 5
            G1.hash(b"m")
        with acting_as("bob"):
            G2.generator() * 7
    assert ops[("alice", "g1_exp")] == 1
    assert ops[("alice", "hash_to_g1")] == 1
    assert ops[("bob", "g2_exp")] == 1
    assert ("bob", "g1_exp") not in ops
    assert sum(OPS.snapshot().values()) >= 3
