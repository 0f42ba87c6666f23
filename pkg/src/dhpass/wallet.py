"""The user's client: enrolment, second-factor key, token acquisition.

The client signing key is never stored. Each protocol run re-derives it from
the password through the servers' jointly keyed PRF and drops it when the run
ends. The second factor lives in a (simulated) secure element whose handle
can sign and report its public key, nothing more.
"""
from __future__ import annotations

import json
import logging
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .blindsig import (
    PartialSignature, Signature, VerificationKey, dsig_blind, dsig_comb, dsig_unblind, dsig_vf,
    sig_kgen, sig_sign,
)
from .entropy import Entropy, SystemEntropy
from .errors import DHPError, ProtocolError, RoundFailed
from .group import G1, G2, acting_as, scalar_from_bytes, scalar_to_bytes
from .health import PublicPolicy
from .passauth import (
    OprfEvaluation, derive_client_keypair, oprf_blind, oprf_finalize,
)
from .protocol import abort_tuple, enrolment_tuple, issuance_tuple, token_message
from .reader import Challenge, Token

log = logging.getLogger(__name__)


# -- secure element -------------------------------------------------------------


class SecureElementError(DHPError):
    pass


class SoftSecureElement:
    """In-process stand-in for a phone's secure element / TEE keystore.

    Secrets stay inside this object (and its optional backing file, which is
    the one sensitive file a wallet owns). Callers only ever hold handles.
    """

    def __init__(self, path: str | Path | None = None, entropy: Entropy | None = None):
        self._path = Path(path) if path else None
        self._entropy = entropy or SystemEntropy()
        self.__keys: dict[str, int] = {}
        if self._path and self._path.exists():
            data = json.loads(self._path.read_text())
            self.__keys = {k: scalar_from_bytes(bytes.fromhex(v)) for k, v in data.items()}

    def _save(self) -> None:
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.write_text(json.dumps({k: scalar_to_bytes(v).hex() for k, v in self.__keys.items()}))
            self._path.chmod(0o600)

    def generate(self) -> tuple["SecureElementHandle", G2]:
        kp = sig_kgen(self._entropy.bytes(32))
        key_id = uuid.UUID(bytes=self._entropy.bytes(16), version=4).hex
        self.__keys[key_id] = kp.secret
        self._save()
        return SecureElementHandle(key_id, self), kp.public

    def sign(self, key_id: str, m: bytes) -> Signature:
        sk = self.__keys.get(key_id)
        if sk is None:
            raise SecureElementError(f"no key {key_id!r} in the secure element")
        return sig_sign(sk, m)

    def public(self, key_id: str) -> G2:
        sk = self.__keys.get(key_id)
        if sk is None:
            raise SecureElementError(f"no key {key_id!r} in the secure element")
        return G2.generator() * sk

    def delete(self, key_id: str) -> None:
        self.__keys.pop(key_id, None)
        self._save()

    def handle(self, key_id: str) -> "SecureElementHandle":
        return SecureElementHandle(key_id, self)


@dataclass(frozen=True)
class SecureElementHandle:
    key_id: str
    _element: SoftSecureElement = field(repr=False, compare=False)

    def sign(self, m: bytes) -> Signature:
        return self._element.sign(self.key_id, m)

    def public_key(self) -> G2:
        return self._element.public(self.key_id)


def se_generate(element: SoftSecureElement) -> tuple[SecureElementHandle, G2]:
    return element.generate()


def se_sign(handle: SecureElementHandle, m: bytes) -> Signature:
    return handle.sign(m)


# -- password policy ------------------------------------------------------------


class PasswordRejected(DHPError):
    pass


@dataclass
class PasswordPolicy:
    """Client-side check; ``breached`` stands in for an online breach lookup."""

    min_length: int = 8
    breached: Callable[[str], bool] = lambda pw: False

    def check(self, pw: str) -> None:
        if len(pw) < self.min_length:
            raise PasswordRejected(f"password shorter than {self.min_length} characters")
        if self.breached(pw):
            raise PasswordRejected("password appears in a breach corpus")


# -- server channel ---------------------------------------------------------------


class ServerChannel(Protocol):
    """Sends one protocol round to all n servers; index i of the result is
    server i+1's reply or the error it raised."""

    n: int

    def round(self, msg_type: str, payloads: list[dict]) -> list[dict | DHPError]: ...


def _collect(results: list[dict | DHPError]) -> list[dict]:
    errors = {i: r for i, r in enumerate(results, start=1) if isinstance(r, Exception)}
    if errors:
        raise RoundFailed(errors)
    return results  # type: ignore[return-value]


class ConsentDeclined(DHPError):
    pass


@dataclass
class RegistryEntry:
    policy: PublicPolicy
    key: VerificationKey


# -- wallet -----------------------------------------------------------------------


class Wallet:
    role = "client"

    def __init__(self, uid: str, consent: bytes, element: SoftSecureElement,
                 registry: dict[str, RegistryEntry], entropy: Entropy | None = None,
                 password_policy: PasswordPolicy | None = None,
                 path: str | Path | None = None):
        self.uid = uid
        self.consent = consent
        self.element = element
        self.registry = registry
        self.entropy = entropy or SystemEntropy()
        self.password_policy = password_policy or PasswordPolicy()
        self.path = Path(path) if path else None
        self.se: SecureElementHandle | None = None
        self.enrolled = False

    # persistence (no secrets: the SE keeps its own file)

    def to_json(self) -> dict:
        return {
            "uid": self.uid,
            "consent": self.consent.hex(),
            "se_key_id": self.se.key_id if self.se else None,
            "enrolled": self.enrolled,
            "registry": {pp: {"policy": e.policy.to_json(), "key": e.key.element.hex()}
                         for pp, e in sorted(self.registry.items())},
        }

    def save(self) -> None:
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path, element: SoftSecureElement, entropy: Entropy | None = None,
             password_policy: PasswordPolicy | None = None) -> "Wallet":
        d = json.loads(Path(path).read_text())
        registry = {pp: RegistryEntry(PublicPolicy.from_json(e["policy"]),
                                      VerificationKey(G2.from_bytes(bytes.fromhex(e["key"])), pp))
                    for pp, e in d["registry"].items()}
        w = cls(d["uid"], bytes.fromhex(d["consent"]), element, registry, entropy, password_policy, path)
        if d.get("se_key_id"):
            w.se = element.handle(d["se_key_id"])
        w.enrolled = bool(d.get("enrolled"))
        return w

    # protocol

    def _derive_keypair(self, pw: str, replies: list[dict], blind):
        evals = [OprfEvaluation(int(r["index"]), G1.from_bytes(r["eval"]), int(r["epoch"])) for r in replies]
        seed = oprf_finalize(evals, blind, self.uid, pw, n=len(replies))
        return derive_client_keypair(seed).keypair

    def enroll(self, pw: str, servers: ServerChannel) -> None:
        with acting_as(self.role):
            self.password_policy.check(pw)
            if self.se is None:
                self.se, _ = se_generate(self.element)
            blind = oprf_blind(self.uid, pw, self.entropy.bytes(32))
            r1 = _collect(servers.round("enroll_round1", [{"uid": self.uid, "alpha": blind.element.data}] * servers.n))
            keypair = self._derive_keypair(pw, r1, blind)
            nonces = [bytes(r["nonce"]) for r in r1]
            pk_se = self.se.public_key()
            msg = enrolment_tuple(self.uid, keypair.public.data, pk_se.data, self.consent, nonces)
            payload = {
                "uid": self.uid, "client_key": keypair.public.data, "se_key": pk_se.data,
                "consent": self.consent, "nonces": nonces,
                "client_sig": sig_sign(keypair.secret, msg).to_bytes(),
                "se_sig": se_sign(self.se, msg).to_bytes(),
            }
            results = servers.round("enroll_finalize", [payload] * servers.n)
            if any(isinstance(r, Exception) for r in results):
                self._abort_enrolment(keypair.secret, nonces, results, servers)
            del keypair
            self.enrolled = True
            self.save()

    def _abort_enrolment(self, secret: int, nonces: list[bytes], results, servers: ServerChannel) -> None:
        # best effort: ask servers that accepted to forget the record
        payloads = [{"uid": self.uid, "client_sig": sig_sign(secret, abort_tuple(self.uid, nc)).to_bytes()}
                    for nc in nonces]
        try:
            servers.round("enroll_abort", payloads)
        except Exception:  # pragma: no cover - best effort
            log.warning("enrolment abort did not reach every server")
        _collect(results)

    def display_policy(self, challenge: Challenge) -> str:
        entry = self.registry.get(challenge.pp_id)
        if entry is None:
            raise ProtocolError(f"unknown policy {challenge.pp_id!r}")
        return entry.policy.render()

    def acquire_token(self, challenge: Challenge, pw: str, servers: ServerChannel,
                      consent: Callable[[str], bool] = lambda text: True,
                      blind: bool = True) -> Token:
        """Two rounds with the servers; returns the unblinded token.

        ``blind=False`` signs H(m) directly; it exists only to demonstrate
        what the issuer could trace without blinding.
        """
        with acting_as(self.role):
            if not self.enrolled or self.se is None:
                raise ProtocolError("wallet is not enrolled")
            text = self.display_policy(challenge)
            if not consent(text):
                raise ConsentDeclined(challenge.pp_id)
            entry = self.registry[challenge.pp_id]
            m = token_message(challenge.pp_id, challenge.vid, challenge.q, challenge.t)
            beta, trapdoor = dsig_blind(m, self.entropy.bytes(32), blinder=None if blind else 1)

            pblind = oprf_blind(self.uid, pw, self.entropy.bytes(32))
            r1 = _collect(servers.round("issue_round1", [{"uid": self.uid, "alpha": pblind.element.data}] * servers.n))
            keypair = self._derive_keypair(pw, r1, pblind)
            nonces = [bytes(r["nonce"]) for r in r1]
            msg = issuance_tuple(self.uid, challenge.pp_id, nonces, beta.element.data)
            request = {
                "uid": self.uid, "pp_id": challenge.pp_id, "blinded": beta.element.data, "nonces": nonces,
                "client_sig": sig_sign(keypair.secret, msg).to_bytes(),
                "se_sig": se_sign(self.se, msg).to_bytes(),
            }
            del keypair
            r2 = _collect(servers.round("issue_round2", [request] * servers.n))
            partials = [PartialSignature(int(r["index"]), G1.from_bytes(r["partial"]), int(r["epoch"])) for r in r2]
            sig = dsig_unblind(dsig_comb(partials, n=servers.n), trapdoor)
            if not dsig_vf(entry.key, m, sig):
                raise ProtocolError("combined signature does not verify; a server misbehaved")
            return Token(challenge.pp_id, challenge.vid, challenge.q, challenge.t, sig.to_bytes())
