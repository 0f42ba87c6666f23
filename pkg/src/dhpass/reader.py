"""The verifier's reader: fresh challenges, token checks, one-shot nonces."""
from __future__ import annotations

import enum
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .blindsig import Signature, VerificationKey, dsig_vf
from .encoding import decode_fields, encode_fields, read_u64, u64
from .entropy import Entropy, SystemEntropy
from .errors import DHPError
from .group import acting_as
from .protocol import CHALLENGE_NONCE_BYTES, token_message

SIG_BYTES = 48


class SessionBusy(DHPError):
    pass


class Reason(str, enum.Enum):
    ACCEPT = "Accept"
    NO_SESSION = "NoSession"
    FIELD_MISMATCH = "FieldMismatch"
    NONCE_REUSED = "NonceReused"
    STALE = "Stale"
    BAD_SIGNATURE = "BadSignature"
    UNKNOWN_POLICY = "UnknownPolicy"


@dataclass(frozen=True)
class Challenge:
    vid: str
    q: bytes
    t: int
    pp_id: str

    def to_json(self) -> dict:
        return {"vid": self.vid, "q": self.q.hex(), "t": self.t, "pp_id": self.pp_id}

    @classmethod
    def from_json(cls, d: dict) -> "Challenge":
        return cls(d["vid"], bytes.fromhex(d["q"]), int(d["t"]), d["pp_id"])


@dataclass(frozen=True)
class Token:
    pp_id: str
    vid: str
    q: bytes
    t: int
    sig: bytes

    def message(self) -> bytes:
        return token_message(self.pp_id, self.vid, self.q, self.t)

    def to_bytes(self) -> bytes:
        return encode_fields([self.pp_id, self.vid, self.q, u64(self.t)]) + self.sig

    @classmethod
    def from_bytes(cls, data: bytes) -> "Token":
        if len(data) < SIG_BYTES:
            raise ValueError("token too short")
        body, sig = data[:-SIG_BYTES], data[-SIG_BYTES:]
        pp_id, vid, q, t = decode_fields(body)
        return cls(pp_id.decode("utf-8"), vid.decode("utf-8"), q, read_u64(t), sig)

    def to_json(self) -> dict:
        return {"pp_id": self.pp_id, "vid": self.vid, "q": self.q.hex(), "t": self.t, "sig": self.sig.hex()}

    @classmethod
    def from_json(cls, d: dict) -> "Token":
        return cls(d["pp_id"], d["vid"], bytes.fromhex(d["q"]), int(d["t"]), bytes.fromhex(d["sig"]))


@dataclass
class ReaderConfig:
    vid: str
    keys: dict[str, VerificationKey]
    window: int = 120          # max age of t at verification
    session_timeout: int = 180
    state_path: Path | None = None


@dataclass
class SessionState:
    active: Challenge | None = None
    used_nonces: set[bytes] = field(default_factory=set)


class Reader:
    """Single-session verifier. Used nonces survive restarts via ``state_path``."""

    def __init__(self, config: ReaderConfig, entropy: Entropy | None = None,
                 clock: Callable[[], int] | None = None):
        self.config = config
        self.entropy = entropy or SystemEntropy()
        self.clock = clock or (lambda: int(time.time()))
        self.state = SessionState()
        self._lock = threading.Lock()
        self._load()

    @property
    def vid(self) -> str:
        return self.config.vid

    # persistence: one JSON line per retired nonce, plus the active challenge

    def _load(self) -> None:
        path = self.config.state_path
        if path is None or not Path(path).exists():
            return
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    continue
                if "used" in entry:
                    self.state.used_nonces.add(bytes.fromhex(entry["used"]))
                elif "active" in entry:
                    self.state.active = Challenge.from_json(entry["active"]) if entry["active"] else None

    def _persist(self, entry: dict) -> None:
        path = self.config.state_path
        if path is None:
            return
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _retire(self, q: bytes) -> None:
        if q not in self.state.used_nonces:
            self.state.used_nonces.add(q)
            self._persist({"used": q.hex()})

    def _close(self) -> None:
        if self.state.active is not None:
            self._retire(self.state.active.q)
        self.state.active = None
        self._persist({"active": None})

    # operations

    def new_session(self, pp_id: str) -> Challenge:
        with self._lock:
            self._expire(self.clock())
            if self.state.active is not None:
                raise SessionBusy("a verification session is already running")
            while True:
                q = self.entropy.bytes(CHALLENGE_NONCE_BYTES)
                if q not in self.state.used_nonces:
                    break
            ch = Challenge(self.vid, q, self.clock(), pp_id)
            self.state.active = ch
            self._persist({"active": ch.to_json()})
            return ch

    def verify_token(self, token: Token, now: int | None = None) -> Reason:
        now = self.clock() if now is None else now
        with self._lock, acting_as("reader"):
            if token.q in self.state.used_nonces:
                # a retired nonce stays dead whether or not a session is open
                self._close()
                return Reason.NONCE_REUSED
            ch = self.state.active
            if ch is None:
                return Reason.NO_SESSION
            try:
                if (token.pp_id, token.vid, token.q, token.t) != (ch.pp_id, ch.vid, ch.q, ch.t):
                    return Reason.FIELD_MISMATCH
                vk = self.config.keys.get(token.pp_id)
                if vk is None:
                    return Reason.UNKNOWN_POLICY
                if now - token.t > self.config.window:
                    return Reason.STALE
                if not dsig_vf(vk, token.message(), token.sig):
                    return Reason.BAD_SIGNATURE
                self._retire(token.q)
                return Reason.ACCEPT
            finally:
                self._close()

    def _expire(self, now: int) -> bool:
        ch = self.state.active
        if ch is not None and now - ch.t > self.config.session_timeout:
            self._close()
            return True
        return False

    def session_timeout(self, now: int | None = None) -> bool:
        with self._lock:
            return self._expire(self.clock() if now is None else now)
