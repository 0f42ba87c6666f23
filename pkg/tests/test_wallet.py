import json
import stat

import pytest

from conftest import PW
from dhpass.blindsig import sig_vf
from dhpass.entropy import SeededEntropy
from dhpass.errors import RoundFailed
from dhpass.wallet import (
    ConsentDeclined, PasswordPolicy, PasswordRejected, SecureElementError, SoftSecureElement,
    se_generate, se_sign,
)


def test_se_handle_signs_and_exports_public_only(tmp_path):
    se = SoftSecureElement(tmp_path / "se.json", SeededEntropy(1))
    h, pk = se_generate(se)
    sig = se_sign(h, b"m")
    assert sig_vf(pk, b"m", sig)
    assert se_sign(h, b"m") == sig
    other_h, other_pk = se_generate(se)
    assert not sig_vf(other_pk, b"m", sig)
    assert not any("secret" in name or "key" == name for name in dir(h) if not name.startswith("_"))
    assert stat.S_IMODE((tmp_path / "se.json").stat().st_mode) == 0o600


def test_se_reload_and_delete(tmp_path):
    se = SoftSecureElement(tmp_path / "se.json", SeededEntropy(2))
    h, pk = se.generate()
    again = SoftSecureElement(tmp_path / "se.json")
    assert again.handle(h.key_id).public_key() == pk
    again.delete(h.key_id)
    with pytest.raises(SecureElementError):
        again.handle(h.key_id).sign(b"m")


def test_password_policy():
    pol = PasswordPolicy(min_length=8, breached=lambda pw: pw == "password123")
    with pytest.raises(PasswordRejected):
        pol.check("short")
    with pytest.raises(PasswordRejected):
        pol.check("password123")
    pol.check("long enough pass")


def test_weak_password_stops_enrolment_before_contact(dep):
    w = dep.new_wallet("weak", password_policy=PasswordPolicy(min_length=12))
    before = dep.transcript.mark()
    with pytest.raises(PasswordRejected):
        w.enroll("short", dep.channel())
    assert dep.transcript.mark() == before


def test_consent_declined(dep, alice):
    with pytest.raises(ConsentDeclined):
        alice.acquire_token(dep.challenge(dep.reader(), "vax-180d"), PW, dep.channel(), consent=lambda text: False)


def test_consent_sees_policy_text(dep, alice):
    shown = []
    alice.acquire_token(dep.challenge(dep.reader(), "vax-180d"), PW, dep.channel(),
                        consent=lambda text: shown.append(text) or True)
    assert "180 days" in shown[0]


def test_wallet_file_holds_no_secrets(dep):
    w = dep.new_wallet("gina", persist=True)
    w.enroll(PW, dep.channel())
    text = (dep.state_dir / "wallets" / "gina.json").read_text()
    assert PW not in text
    data = json.loads(text)
    assert set(data) == {"uid", "consent", "se_key_id", "enrolled", "registry"}


def test_wrong_password_fails_at_servers(dep, alice):
    with pytest.raises(RoundFailed) as ei:
        alice.acquire_token(dep.challenge(dep.reader(), "vax-180d"), "not the password", dep.channel())
    assert ei.value.kinds() == {"AuthError"}


def test_enrolment_abort_cleans_up(dep):
    """If one server rejects finalize, servers that accepted drop the record."""
    w = dep.new_wallet("henry")

    class FlakyLast:
        n = dep.n

        def __init__(self, inner):
            self.inner = inner

        def round(self, msg_type, payloads):
            res = self.inner.round(msg_type, payloads)
            if msg_type == "enroll_finalize":
                from dhpass.errors import TransportError
                res[-1] = TransportError("lost")
            return res

    with pytest.raises(RoundFailed):
        w.enroll(PW, FlakyLast(dep.channel()))
    assert all(s.user("henry") is None for s in dep.servers)
