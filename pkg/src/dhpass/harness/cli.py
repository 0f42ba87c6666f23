"""``dhpass`` command line.

Exit codes: 0 when the outcome is the expected one, 1 when a check or
security expectation is violated, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import getpass
import json
import logging
import os
import sys
from pathlib import Path

from ..errors import DHPError
from ..health import DAY, HOUR, HealthRecord, Recovery, TestEvent, Vaccination
from ..reader import Reason, Token
from .attacks import attack_replay, scan_at_rest
from .config import read_config, write_config
from .deployment import Deployment, DeploymentConfig, run_deployment
from .experiments import DEFAULT_PASSWORD, onboard, run_linkage, run_tamper
from .transcript import record_rounds

log = logging.getLogger("dhpass")

OK, VIOLATION, USAGE = 0, 1, 2
PUSH_LOG = Path("authority") / "pushed.jsonl"


def _password(args) -> str:
    if args.password:
        return args.password
    env = os.environ.get("DHPASS_PASSWORD")
    if env:
        return env
    return getpass.getpass("password: ")


def _open(args) -> Deployment:
    return run_deployment(read_config(Path(args.dir)))


# -- verbs ------------------------------------------------------------------------


def cmd_setup(args) -> int:
    state = Path(args.dir)
    if (state / "deployment.ini").exists() and not args.force:
        print(f"{state} already holds a deployment (use --force to overwrite)", file=sys.stderr)
        return USAGE
    cfg = DeploymentConfig(n=args.n, seed=args.seed, transport=args.transport, state_dir=state,
                           base_port=args.base_port, durable=True)
    write_config(state, cfg)
    with run_deployment(cfg) as dep:
        for pp, e in dep.registry.items():
            print(f"{pp}: {e.key.element.hex()}")
    return OK


def cmd_enroll(args) -> int:
    with _open(args) as dep:
        w = dep.new_wallet(args.uid, consent=args.consent.encode(), persist=True)
        w.enroll(_password(args), dep.channel())
    print(f"enrolled {args.uid}")
    return OK


def _record_from_args(args, now: int) -> HealthRecord:
    vacc = tuple(Vaccination(now - d * DAY, args.vaccine) for d in args.vaccinated_days_ago or [])
    tests = tuple(TestEvent(now - h * HOUR, "negative") for h in args.negative_test_hours_ago or [])
    tests += tuple(TestEvent(now - h * HOUR, "positive") for h in args.positive_test_hours_ago or [])
    rec = tuple(Recovery(now - d * DAY) for d in args.recovered_days_ago or [])
    return HealthRecord(vacc, tests, rec)


def cmd_push_health(args) -> int:
    with _open(args) as dep:
        record = _record_from_args(args, dep.clock())
        dep.push_health(args.uid, record)
        log_path = dep.state_dir / PUSH_LOG
        log_path.parent.mkdir(exist_ok=True)
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"uid": args.uid, "record": record.canonical().hex()}) + "\n")
    print(f"pushed health record for {args.uid}")
    return OK


def cmd_issue(args) -> int:
    with _open(args) as dep:
        reader = dep.reader(args.reader)
        wallet = dep.load_wallet(args.uid)
        ch = dep.challenge(reader, args.policy)
        print(wallet.display_policy(ch))
        try:
            token = wallet.acquire_token(ch, _password(args), dep.channel())
        except DHPError:
            reader.session_timeout(ch.t + reader.config.session_timeout + 1)
            raise
    Path(args.out).write_text(json.dumps(token.to_json(), indent=2))
    print(f"token written to {args.out}")
    return OK


def cmd_verify(args) -> int:
    with _open(args) as dep:
        token = Token.from_json(json.loads(Path(args.token).read_text()))
        reason = dep.submit(dep.reader(args.reader), token)
    print(reason.value)
    accepted = reason is Reason.ACCEPT
    return OK if accepted == (args.expect == "accept") else VIOLATION


def cmd_refresh(args) -> int:
    with _open(args) as dep:
        epoch = dep.refresh()
    print(f"refreshed to epoch {epoch}")
    return OK


def cmd_scan(args) -> int:
    state = Path(args.dir)
    needles = [bytes.fromhex(h) for h in args.needle_hex or []]
    log_path = state / PUSH_LOG
    if log_path.exists():
        needles += [bytes.fromhex(json.loads(line)["record"]) for line in log_path.read_text().splitlines() if line]
    if not needles:
        print("nothing to scan for", file=sys.stderr)
        return USAGE
    files = sorted(state.glob("server*.jsonl"))
    hits = scan_at_rest(files, needles)
    for f, i in hits:
        print(f"FOUND needle {i} in {f}")
    print(f"scanned {len(files)} server files for {len(needles)} records: {len(hits)} hits")
    return VIOLATION if hits else OK


def _scratch(args) -> Deployment:
    return run_deployment(DeploymentConfig(n=args.n, seed=args.seed, transport=args.transport))


def cmd_demo(args) -> int:
    with _scratch(args) as dep:
        wallet = onboard(dep, "alice")
        reader = dep.reader("gate-1")
        mark = dep.transcript.mark()
        token, reason = dep.issue_and_verify(wallet, DEFAULT_PASSWORD, reader, args.policy)
        rounds = record_rounds(dep.transcript.entries(mark))
        replay = attack_replay(reader, token)
        print(f"verification: {reason.value}")
        print(f"rounds: client-server={rounds['client-server']} client-reader={rounds['client-reader']}")
        print(f"replay: {replay.value}")
        if args.transcript:
            dep.transcript.export(args.transcript)
        ok = reason is Reason.ACCEPT and replay is Reason.NONCE_REUSED
    return OK if ok else VIOLATION


def cmd_attack(args) -> int:
    with _scratch(args) as dep:
        if args.kind == "replay":
            wallet = onboard(dep, "mallory-victim")
            reader = dep.reader("gate-1")
            token, reason = dep.issue_and_verify(wallet, DEFAULT_PASSWORD, reader, args.policy)
            same = attack_replay(reader, token)
            dep.challenge(reader, args.policy)
            fresh = attack_replay(reader, token)
            print(f"first: {reason.value}; replay: {same.value}; replay into fresh session: {fresh.value}")
            return OK if Reason.ACCEPT not in (same, fresh) else VIOLATION
        if args.kind == "tamper":
            res = run_tamper(dep, args.trials, seed=args.seed or 0)
            print(f"{res.attempts} mutations, {res.accepted} accepted; reasons {res.reasons}")
            return OK if res.accepted == 0 else VIOLATION
        blind = run_linkage(dep, args.trials, blind=True, seed=args.seed or 0)
        plain = run_linkage(dep, args.trials, blind=False, seed=args.seed or 0)
        print(f"linkage accuracy: blinded {blind.accuracy:.2f}, unblinded {plain.accuracy:.2f}")
        return OK if 0.35 <= blind.accuracy <= 0.65 else VIOLATION


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dhpass", description="Distributed health-pass issuance harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def with_dir(sp):
        sp.add_argument("--dir", required=True, help="deployment state directory")
        return sp

    def scratch(sp):
        sp.add_argument("--n", type=int, default=3)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--transport", choices=["local", "tcp"], default="local")
        sp.add_argument("--policy", default="vax-180d")
        return sp

    sp = with_dir(sub.add_parser("setup", help="create a deployment and run the key ceremony"))
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--transport", choices=["local", "tcp"], default="local")
    sp.add_argument("--base-port", type=int, default=0)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_setup)

    sp = with_dir(sub.add_parser("enroll", help="enrol a user"))
    sp.add_argument("--uid", required=True)
    sp.add_argument("--password")
    sp.add_argument("--consent", default="share-health-data:v1")
    sp.set_defaults(func=cmd_enroll)

    sp = with_dir(sub.add_parser("push-health", help="health authority pushes a record"))
    sp.add_argument("--uid", required=True)
    sp.add_argument("--vaccinated-days-ago", type=int, action="append")
    sp.add_argument("--vaccine", default="mRNA")
    sp.add_argument("--negative-test-hours-ago", type=int, action="append")
    sp.add_argument("--positive-test-hours-ago", type=int, action="append")
    sp.add_argument("--recovered-days-ago", type=int, action="append")
    sp.set_defaults(func=cmd_push_health)

    sp = with_dir(sub.add_parser("issue", help="open a reader session and obtain a token"))
    sp.add_argument("--uid", required=True)
    sp.add_argument("--password")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--reader", default="gate-1")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_issue)

    sp = with_dir(sub.add_parser("verify", help="present a token to a reader"))
    sp.add_argument("--token", required=True)
    sp.add_argument("--reader", default="gate-1")
    sp.add_argument("--expect", choices=["accept", "reject"], default="accept")
    sp.set_defaults(func=cmd_verify)

    sp = with_dir(sub.add_parser("refresh", help="proactively refresh all key shares"))
    sp.set_defaults(func=cmd_refresh)

    sp = with_dir(sub.add_parser("scan", help="look for plaintext health records in server files"))
    sp.add_argument("--needle-hex", action="append")
    sp.set_defaults(func=cmd_scan)

    sp = scratch(sub.add_parser("demo", help="full flow on a throwaway deployment"))
    sp.add_argument("--transcript", help="export the transcript as JSON lines")
    sp.set_defaults(func=cmd_demo)

    sp = scratch(sub.add_parser("attack", help="run an adversary experiment"))
    sp.add_argument("kind", choices=["replay", "tamper", "linkage"])
    sp.add_argument("--trials", type=int, default=100)
    sp.set_defaults(func=cmd_attack)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return USAGE
    except DHPError as exc:
        print(f"{exc.kind}: {exc}", file=sys.stderr)
        return VIOLATION


if __name__ == "__main__":
    raise SystemExit(main())
