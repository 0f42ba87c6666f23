import json
from dataclasses import replace

import pytest

from conftest import PW
from dhpass.errors import AuthError, ProtocolError
from dhpass.harness import cli
from dhpass.harness.attacks import arm, attack_replay, attack_tamper, scan_at_rest
from dhpass.harness.deployment import DeploymentConfig, run_deployment
from dhpass.harness.experiments import onboard
from dhpass.harness.transcript import Entry, Transcript, count_rounds, record_rounds
from dhpass.harness.transport import pack, unpack, open_reply, serve_frame
from dhpass.reader import Reason


def _flow(transport, seed=21):
    with run_deployment(DeploymentConfig(n=3, seed=seed, transport=transport)) as dep:
        w = onboard(dep, "alice", PW)
        _, reason = dep.issue_and_verify(w, PW, dep.reader(), "vax-180d")
        assert reason is Reason.ACCEPT
        return [e.protocol_view() for e in dep.transcript.entries()]


def test_transport_transparency():
    assert _flow("local") == _flow("tcp")


def test_seeded_runs_reproducible():
    assert _flow("local", 5) == _flow("local", 5)
    assert _flow("local", 5) != _flow("local", 6)


def test_seeded_boot_same_keys():
    keys = []
    for _ in range(2):
        with run_deployment(DeploymentConfig(n=3, seed=99)) as dep:
            keys.append({pp: k.element.data for pp, k in dep.verification_keys().items()})
    assert keys[0] == keys[1]


def test_n1_deployment():
    with run_deployment(DeploymentConfig(n=1, seed=1)) as dep:
        assert dep.ping() == [{"index": 1, "epoch": 0, "users": 0}]
        w = onboard(dep, "solo", PW)
        _, reason = dep.issue_and_verify(w, PW, dep.reader(), "vax-180d")
        assert reason is Reason.ACCEPT


def test_ping(dep):
    assert [p["index"] for p in dep.ping()] == [1, 2, 3]


def test_round_counting():
    assert record_rounds([]) == {"client-reader": 0, "client-server": 0}
    e = lambda s, r: Entry(s, r, "x", "", 0.0)
    seq = [e("client", "server1"), e("client", "server2"), e("server2", "server1"), e("server1", "client"),
           e("server2", "client"), e("client", "server1"), e("server1", "client")]
    assert count_rounds(seq, "client", "server") == 2
    assert count_rounds([e("reader:a", "client"), e("client", "reader:a")], "client", "reader") == 1


def test_enrolment_is_two_rounds(dep):
    mark = dep.transcript.mark()
    dep.new_wallet("zed").enroll(PW, dep.channel())
    assert record_rounds(dep.transcript.entries(mark)) == {"client-reader": 0, "client-server": 2}


def test_codec_roundtrip_and_errors():
    frame = pack("m", {"b": b"\x00\x01", "n": 3}, "sid")
    assert unpack(frame) == ("m", "sid", {"b": b"\x00\x01", "n": 3})
    with pytest.raises(ProtocolError):
        unpack(frame[:-1])

    class Boom:
        def handle(self, msg_type, payload):
            raise AuthError("nope")

    with pytest.raises(AuthError, match="nope"):
        open_reply(serve_frame(Boom(), frame))


def test_transcript_export(tmp_path):
    t = Transcript()
    t.record("client", "server1", "ping", {"x": b"1"})
    t.export(tmp_path / "t.jsonl")
    rows = [json.loads(l) for l in (tmp_path / "t.jsonl").read_text().splitlines()]
    assert rows[0]["msg_type"] == "ping" and len(rows[0]["digest"]) == 64


def test_replay_examples(dep, alice, tmp_path):
    reader = dep.reader("gate-1")
    tok, reason = dep.issue_and_verify(alice, PW, reader, "vax-180d")
    assert reason is Reason.ACCEPT
    assert attack_replay(reader, tok) is Reason.NONCE_REUSED
    second = dep.reader("gate-2")
    dep.challenge(second, "vax-180d")
    assert attack_replay(second, tok) is Reason.FIELD_MISMATCH


def test_tamper_examples(dep, alice):
    reader = dep.reader("gate-t")
    ch = dep.challenge(dep.reader("gate-src"), "vax-180d")
    tok = alice.acquire_token(ch, PW, dep.channel())
    assert attack_tamper(reader, tok, "sig", 7) is Reason.BAD_SIGNATURE
    # key separation: relabel as another registered policy
    relabelled = replace(tok, pp_id="test-24h")
    arm(reader, relabelled)
    assert reader.verify_token(relabelled) is Reason.BAD_SIGNATURE
    # forward-dated t against a real, honest session
    gate = dep.reader("gate-f")
    tok2 = alice.acquire_token(dep.challenge(gate, "vax-180d"), PW, dep.channel())
    assert gate.verify_token(replace(tok2, t=tok2.t + 3600)) is Reason.FIELD_MISMATCH


def test_scan_finds_planted_needle(tmp_path):
    (tmp_path / "f").write_bytes(b"xx" + b"needle".hex().encode() + b"yy")
    assert scan_at_rest([tmp_path], [b"needle"]) == [(tmp_path / "f", 0)]
    assert scan_at_rest([tmp_path], [b"absent"]) == []


def test_share_hex_is_what_is_stored(dep, alice):
    share = dep.servers[0].user("alice").health.share.data
    assert scan_at_rest(dep.server_files()[:1], [share])


# -- CLI ------------------------------------------------------------------------------


def test_cli_usage_errors(capsys, tmp_path):
    assert cli.main(["bogus"]) == 2
    assert cli.main(["enroll", "--dir", str(tmp_path / "missing"), "--uid", "a", "--password", "x" * 10]) == 2


def test_cli_full_session(tmp_path, monkeypatch, capsys):
    d = str(tmp_path / "dep")
    monkeypatch.setenv("DHPASS_PASSWORD", PW)
    assert cli.main(["setup", "--dir", d, "--n", "2", "--seed", "4"]) == 0
    assert cli.main(["setup", "--dir", d]) == 2
    assert cli.main(["enroll", "--dir", d, "--uid", "ann"]) == 0
    assert cli.main(["push-health", "--dir", d, "--uid", "ann", "--negative-test-hours-ago", "3"]) == 0
    tok = str(tmp_path / "tok.json")
    assert cli.main(["issue", "--dir", d, "--uid", "ann", "--policy", "test-24h", "--out", tok]) == 0
    assert cli.main(["verify", "--dir", d, "--token", tok]) == 0
    assert cli.main(["verify", "--dir", d, "--token", tok]) == 1
    assert cli.main(["verify", "--dir", d, "--token", tok, "--expect", "reject"]) == 0
    assert cli.main(["refresh", "--dir", d]) == 0
    assert cli.main(["issue", "--dir", d, "--uid", "ann", "--policy", "vax-180d", "--out", tok]) == 1
    assert cli.main(["scan", "--dir", d]) == 0
    out = capsys.readouterr().out
    assert "0 hits" in out


def test_cli_demo_and_attacks(capsys):
    assert cli.main(["demo", "--seed", "2"]) == 0
    assert "client-server=2 client-reader=1" in capsys.readouterr().out
    assert cli.main(["attack", "replay", "--seed", "2"]) == 0
    assert cli.main(["attack", "tamper", "--trials", "50", "--seed", "2"]) == 0
