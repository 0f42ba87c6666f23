import pytest

from dhpass.blindsig import dsig_comb, dsig_kgen, dsig_sign, hash_to_group
from dhpass.entropy import SeededEntropy
from dhpass.reader import Challenge, Reader, ReaderConfig, Reason, SessionBusy, Token

T0 = 1_800_000_000


class FakeClock:
    def __init__(self, t):
        self.t = t

    def __call__(self):
        return self.t


@pytest.fixture
def keys():
    out = {}
    shares = {}
    for pp in ("vax-180d", "test-24h"):
        sh, vk = dsig_kgen(2, [pp.encode() * 4, pp.encode() * 5], pp)
        out[pp], shares[pp] = vk, sh
    return out, shares


def make_reader(keys, tmp_path=None, clock=None, vid="gate-1"):
    cfg = ReaderConfig(vid, keys, state_path=(tmp_path / f"{vid}.jsonl") if tmp_path else None)
    return Reader(cfg, SeededEntropy(vid), clock or FakeClock(T0))


def sign_for(shares, ch: Challenge) -> Token:
    tok = Token(ch.pp_id, ch.vid, ch.q, ch.t, b"")
    sig = dsig_comb([dsig_sign(s, hash_to_group(tok.message())) for s in shares[ch.pp_id]])
    return Token(ch.pp_id, ch.vid, ch.q, ch.t, sig.to_bytes())


def test_accept_then_replay(keys):
    vks, shares = keys
    r = make_reader(vks)
    tok = sign_for(shares, r.new_session("vax-180d"))
    assert r.verify_token(tok) is Reason.ACCEPT
    assert r.verify_token(tok) is Reason.NONCE_REUSED
    r.new_session("vax-180d")
    assert r.verify_token(tok) is Reason.NONCE_REUSED


def test_session_busy_and_timeout(keys):
    vks, _ = keys
    clock = FakeClock(T0)
    r = make_reader(vks, clock=clock)
    ch = r.new_session("vax-180d")
    with pytest.raises(SessionBusy):
        r.new_session("vax-180d")
    assert not r.session_timeout(T0 + 180)
    assert r.state.active == ch
    assert r.session_timeout(T0 + 181)
    assert r.state.active is None and ch.q in r.state.used_nonces
    clock.t = T0 + 200
    r.new_session("vax-180d")


def test_no_session(keys):
    vks, shares = keys
    r = make_reader(vks)
    other = make_reader(vks, vid="gate-2")
    tok = sign_for(shares, other.new_session("vax-180d"))
    assert r.verify_token(tok) is Reason.NO_SESSION


def test_field_mismatch_and_second_reader(keys):
    vks, shares = keys
    a, b = make_reader(vks, vid="gate-a"), make_reader(vks, vid="gate-b")
    tok = sign_for(shares, a.new_session("vax-180d"))
    assert a.verify_token(tok) is Reason.ACCEPT
    b.new_session("vax-180d")
    assert b.verify_token(tok) is Reason.FIELD_MISMATCH


def test_stale(keys):
    vks, shares = keys
    clock = FakeClock(T0)
    r = make_reader(vks, clock=clock)
    tok = sign_for(shares, r.new_session("vax-180d"))
    assert r.verify_token(tok, now=T0 + 121) is Reason.STALE


def test_bad_signature_and_cross_policy(keys):
    vks, shares = keys
    r = make_reader(vks)
    ch = r.new_session("vax-180d")
    good = sign_for(shares, ch)
    bad = Token(good.pp_id, good.vid, good.q, good.t, b"\x00" * 48)
    assert r.verify_token(bad) is Reason.BAD_SIGNATURE
    # a test-24h signature on the same fields, offered as test-24h, must fail
    # under the vax key and vice versa
    ch2 = r.new_session("test-24h")
    forged = Token("test-24h", ch2.vid, ch2.q, ch2.t,
                   sign_for(shares, Challenge(ch2.vid, ch2.q, ch2.t, "vax-180d")).sig)
    assert r.verify_token(forged) is Reason.BAD_SIGNATURE


def test_unknown_policy(keys):
    vks, shares = keys
    r = make_reader({"vax-180d": vks["vax-180d"]})
    ch = r.new_session("test-24h")
    assert r.verify_token(sign_for(shares, ch)) is Reason.UNKNOWN_POLICY


def test_used_nonces_survive_restart(keys, tmp_path):
    vks, shares = keys
    r = make_reader(vks, tmp_path)
    tok = sign_for(shares, r.new_session("vax-180d"))
    assert r.verify_token(tok) is Reason.ACCEPT
    r2 = make_reader(vks, tmp_path)
    assert tok.q in r2.state.used_nonces
    r2.new_session("vax-180d")
    assert r2.verify_token(tok) is Reason.NONCE_REUSED


def test_active_session_survives_restart(keys, tmp_path):
    vks, shares = keys
    r = make_reader(vks, tmp_path)
    ch = r.new_session("vax-180d")
    r2 = make_reader(vks, tmp_path)
    assert r2.state.active == ch
    assert r2.verify_token(sign_for(shares, ch)) is Reason.ACCEPT


def test_token_wire_roundtrip(keys):
    vks, shares = keys
    r = make_reader(vks)
    tok = sign_for(shares, r.new_session("vax-180d"))
    assert Token.from_bytes(tok.to_bytes()) == tok
    assert Token.from_json(tok.to_json()) == tok
    with pytest.raises(ValueError):
        Token.from_bytes(b"short")
