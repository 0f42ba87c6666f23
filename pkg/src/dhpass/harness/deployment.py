"""Boots n issuer servers, a health authority, readers and wallets in one process.

Every party gets its own entropy stream forked from one seed, and all parties
share a settable clock, so a seeded run is reproducible message for message.
"""
from __future__ import annotations

import json
import logging
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..blindsig import VerificationKey
from ..entropy import SeededEntropy, SystemEntropy
from ..errors import ProtocolError
from ..group import G2, scalar_from_bytes, scalar_to_bytes
from ..health import HealthRecord, PolicyRegistry, default_policies
from ..issuer import IssuerServer, ServerConfig
from ..reader import Challenge, Reader, ReaderConfig, Reason, Token
from ..wallet import PasswordPolicy, RegistryEntry, SoftSecureElement, Wallet
from .authority import HealthAuthority
from .transcript import Transcript
from .transport import LocalEndpoint, RecordingEndpoint, ServerGroup, TcpEndpoint, TcpHost

log = logging.getLogger(__name__)

SEEDED_EPOCH = 1_767_225_600  # fixed start time for seeded runs (2026-01-01 UTC)


class Clock:
    """Wall time unless frozen; seeded deployments start frozen."""

    def __init__(self, frozen_at: int | None = None):
        self._now = frozen_at

    def __call__(self) -> int:
        return int(time.time()) if self._now is None else self._now

    def set(self, t: int) -> None:
        self._now = int(t)

    def advance(self, seconds: int) -> None:
        self._now = self() + int(seconds)


@dataclass
class DeploymentConfig:
    n: int = 3
    seed: int | str | None = None
    policies: PolicyRegistry = field(default_factory=default_policies)
    transport: str = "local"  # local | tcp
    host: str = "127.0.0.1"
    base_port: int = 0          # 0: ephemeral ports
    state_dir: Path | None = None
    session_ttl: int = 120
    reader_window: int = 120
    reader_session_timeout: int = 180
    durable: bool = False
    parallel: bool = False      # fan client rounds out on threads

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one server")
        if self.transport not in ("local", "tcp"):
            raise ValueError(f"unknown transport {self.transport!r}")


class Deployment:
    def __init__(self, config: DeploymentConfig):
        self.config = config
        self.n = config.n
        self.root = SeededEntropy(config.seed) if config.seed is not None else SystemEntropy()
        self.clock = Clock(SEEDED_EPOCH if config.seed is not None else None)
        self.transcript = Transcript()
        self._own_dir = config.state_dir is None
        self.state_dir = Path(config.state_dir) if config.state_dir else Path(tempfile.mkdtemp(prefix="dhpass-"))
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.hosts: list[TcpHost] = []
        self.registry: dict[str, RegistryEntry] = {}
        self.readers: dict[str, Reader] = {}
        self._wallet_seq = 0

        self.authority = self._load_authority()
        self.servers = [
            IssuerServer(ServerConfig(config.n, i, config.policies, self.state_dir / f"server{i}.jsonl",
                                      ha_key=self.authority.public, session_ttl=config.session_ttl,
                                      durable=config.durable),
                         entropy=self.root.fork(f"server{i}"), clock=self.clock)
            for i in range(1, config.n + 1)
        ]
        self.endpoints = self._start_transport()
        for i, server in enumerate(self.servers, start=1):
            server.peers = {j: RecordingEndpoint(self.endpoints[j - 1], f"server{i}", f"server{j}", self.transcript)
                            for j in range(1, self.n + 1) if j != i}

    # -- wiring -------------------------------------------------------------------

    def _load_authority(self) -> HealthAuthority:
        path = self.state_dir / "authority.json"
        if path.exists():
            return HealthAuthority(secret=scalar_from_bytes(bytes.fromhex(json.loads(path.read_text())["secret"])))
        ha = HealthAuthority(self.root.fork("ha"))
        path.write_text(json.dumps({"secret": scalar_to_bytes(ha.secret).hex()}))
        path.chmod(0o600)
        return ha

    def _start_transport(self) -> list:
        if self.config.transport == "local":
            return [LocalEndpoint(s) for s in self.servers]
        eps = []
        for i, s in enumerate(self.servers):
            port = self.config.base_port + i if self.config.base_port else 0
            host = TcpHost(s, self.config.host, port)
            self.hosts.append(host)
            eps.append(TcpEndpoint(*host.address))
        return eps

    def channel(self, sender: str = "client") -> ServerGroup:
        return ServerGroup(self.endpoints, sender, self.transcript, parallel=self.config.parallel)

    # -- ceremonies -----------------------------------------------------------------

    def keygen(self) -> dict[str, VerificationKey]:
        """Dealerless key ceremony, coordinated by the harness as a bulletin board."""
        board = self.channel("operator")
        contribs = board.round("keygen_contribute", [{}] * self.n)
        for r in contribs:
            if isinstance(r, Exception):
                raise r
        payload = {
            "identities": {str(r["index"]): r["identity"] for r in contribs},
            "identity_pops": {str(r["index"]): r["identity_pop"] for r in contribs},
            "contributions": {
                pp: [{"index": r["index"], **r["contributions"][pp]} for r in contribs]
                for pp in sorted(self.config.policies)
            },
        }
        results = board.round("keygen_finalize", [payload] * self.n)
        for r in results:
            if isinstance(r, Exception):
                raise r
        first = results[0]["vks"]
        if any(r["vks"] != first for r in results[1:]):
            raise ProtocolError("servers disagree on the verification keys")
        self._set_registry({pp: VerificationKey(G2.from_bytes(k), pp) for pp, k in first.items()})
        return {pp: e.key for pp, e in self.registry.items()}

    def _set_registry(self, vks: dict[str, VerificationKey]) -> None:
        self.registry = {pp: RegistryEntry(self.config.policies[pp], vk) for pp, vk in sorted(vks.items())}
        (self.state_dir / "registry.json").write_text(json.dumps(
            {pp: {"policy": e.policy.to_json(), "key": e.key.element.hex()} for pp, e in self.registry.items()},
            indent=2, sort_keys=True))
        for reader in self.readers.values():
            reader.config.keys = self.verification_keys()

    def load_registry(self) -> bool:
        vks = self.servers[0].verification_keys()
        if set(vks) != set(self.config.policies):
            return False
        self._set_registry(vks)
        return True

    def verification_keys(self) -> dict[str, VerificationKey]:
        return {pp: e.key for pp, e in self.registry.items()}

    def refresh(self) -> int:
        """One proactive refresh; returns the new epoch. Public keys must not move."""
        epoch = self.servers[0].epoch
        op = self.channel("operator")
        for r in op.round("refresh_begin", [{"epoch": epoch}] * self.n):
            if isinstance(r, Exception):
                raise r
        results = op.round("refresh_commit", [{"epoch": epoch}] * self.n)
        for r in results:
            if isinstance(r, Exception):
                raise r
        for pp, entry in self.registry.items():
            total = G2.identity()
            for r in results:
                total = total + G2.from_bytes(r["publics"][pp])
            if total != entry.key.element:
                raise ProtocolError(f"refresh moved the public key of {pp!r}")
        return int(results[0]["epoch"])

    def ping(self) -> list[dict]:
        return [r if not isinstance(r, Exception) else {"error": r.kind}
                for r in self.channel("operator").round("ping", [{}] * self.n)]

    # -- parties ----------------------------------------------------------------------

    def new_wallet(self, uid: str, consent: bytes = b"share-health-data:v1",
                   password_policy: PasswordPolicy | None = None, persist: bool = False) -> Wallet:
        self._wallet_seq += 1
        ent = self.root.fork(f"wallet/{uid}/{self._wallet_seq}")
        wdir = self.state_dir / "wallets"
        element = SoftSecureElement(wdir / f"{uid}.se.json" if persist else None, ent.fork("se"))
        return Wallet(uid, consent, element, dict(self.registry), ent, password_policy,
                      wdir / f"{uid}.json" if persist else None)

    def load_wallet(self, uid: str, password_policy: PasswordPolicy | None = None) -> Wallet:
        wdir = self.state_dir / "wallets"
        self._wallet_seq += 1
        ent = self.root.fork(f"wallet/{uid}/{self._wallet_seq}")
        element = SoftSecureElement(wdir / f"{uid}.se.json", ent.fork("se"))
        return Wallet.load(wdir / f"{uid}.json", element, ent, password_policy)

    def reader(self, vid: str = "reader-1") -> Reader:
        if vid not in self.readers:
            cfg = ReaderConfig(vid, self.verification_keys(), window=self.config.reader_window,
                               session_timeout=self.config.reader_session_timeout,
                               state_path=self.state_dir / "readers" / f"{vid}.jsonl")
            self.readers[vid] = Reader(cfg, self.root.fork(f"reader/{vid}"), self.clock)
        return self.readers[vid]

    def challenge(self, reader: Reader, pp_id: str) -> Challenge:
        """Reader opens a session and shows the challenge to the client."""
        ch = reader.new_session(pp_id)
        self.transcript.record(f"reader:{reader.vid}", "client", "challenge", ch.to_json())
        return ch

    def submit(self, reader: Reader, token: Token, now: int | None = None) -> Reason:
        """Client hands the token over; the verdict is shown by the reader, not sent back."""
        self.transcript.record("client", f"reader:{reader.vid}", "token", token.to_json())
        return reader.verify_token(token, now)

    def issue_and_verify(self, wallet: Wallet, pw: str, reader: Reader, pp_id: str,
                         blind: bool = True) -> tuple[Token, Reason]:
        ch = self.challenge(reader, pp_id)
        token = wallet.acquire_token(ch, pw, self.channel(), blind=blind)
        return token, self.submit(reader, token)

    def push_health(self, uid: str, record: HealthRecord) -> None:
        self.authority.push(uid, record, self.channel("ha"))

    def server_files(self) -> list[Path]:
        return [s.config.state_path for s in self.servers]

    def close(self) -> None:
        for h in self.hosts:
            h.close()
        self.hosts.clear()
        if self._own_dir:
            shutil.rmtree(self.state_dir, ignore_errors=True)

    def __enter__(self) -> "Deployment":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run_deployment(config: DeploymentConfig) -> Deployment:
    """Start everything, run the key ceremony if needed, and health-check the servers."""
    dep = Deployment(config)
    try:
        if not dep.load_registry():
            dep.keygen()
        pings = dep.ping()
        bad = [p for p in pings if "error" in p]
        if bad:
            raise ProtocolError(f"servers failed the health check: {bad}")
    except Exception:
        dep.close()
        raise
    log.info("deployment up: n=%d transport=%s dir=%s", dep.n, config.transport, dep.state_dir)
    return dep
