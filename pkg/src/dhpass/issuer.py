"""One of the n issuer servers.

A server stores enrolment records and one XOR share of each user's health
record, authenticates issuance requests, reconstructs the record in RAM with
its peers to evaluate a public policy, and returns a partial signature on
the client's blinded message under the per-policy key share.

Messages arrive through :meth:`IssuerServer.handle` as ``(msg_type, payload)``
with byte fields already decoded; any transport can sit in front of it.
"""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol

from . import blindsig
from .blindsig import (
    KeyContribution, PartialSignature, Signature, SigningKeyShare, VerificationKey,
    aggregate_key, contribute, dsig_refresh_deltas, dsig_share_from_seed, dsig_sign, sig_kgen,
    sig_sign, sig_vf, pop_prove, pop_verify,
)
from .entropy import Entropy, SystemEntropy
from .errors import (
    AuthError, DHPError, IntegrityError, PolicyError, ProtocolError, SessionError,
    TransportError, UnknownUser,
)
from .group import G1, G2, acting_as, scalar_from_bytes, scalar_to_bytes
from .health import HealthRecord, PolicyRegistry, policy_eval
from .passauth import OprfKeyShare, oprf_eval, oprf_key_from_seed
from .protocol import (
    NONCE_BYTES, abort_tuple, authority_message, enrolment_tuple, issuance_tuple, peer_message,
)
from .sharing import (
    Share, ShareError, ShareRecord, guarded_reconstruct, secret_digest, xor_bytes, zeroize,
)
from .store import KVStore

log = logging.getLogger(__name__)

OPRF_LABEL = "__oprf__"


class PeerEndpoint(Protocol):
    def call(self, msg_type: str, payload: dict) -> dict: ...


@dataclass
class ServerConfig:
    n: int
    index: int
    policies: PolicyRegistry
    state_path: Path
    ha_key: G2 | None = None
    session_ttl: int = 120
    ingest_wait: float = 5.0
    durable: bool = True

    def __post_init__(self) -> None:
        if self.n < 1 or not 1 <= self.index <= self.n:
            raise ValueError(f"bad server index {self.index} for n={self.n}")


@dataclass
class UserRecord:
    uid: str
    client_key: G2
    se_key: G2
    consent: bytes
    enrolled_at: int
    enrol_nonce: bytes
    health: ShareRecord | None = None

    def to_json(self) -> dict:
        return {
            "uid": self.uid,
            "client_key": self.client_key.hex(),
            "se_key": self.se_key.hex(),
            "consent": self.consent.hex(),
            "enrolled_at": self.enrolled_at,
            "enrol_nonce": self.enrol_nonce.hex(),
            "health": self.health.to_json() if self.health else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "UserRecord":
        return cls(
            uid=d["uid"],
            client_key=G2(bytes.fromhex(d["client_key"])),
            se_key=G2(bytes.fromhex(d["se_key"])),
            consent=bytes.fromhex(d["consent"]),
            enrolled_at=d["enrolled_at"],
            enrol_nonce=bytes.fromhex(d["enrol_nonce"]),
            health=ShareRecord.from_json(d["health"]) if d.get("health") else None,
        )


@dataclass
class Session:
    kind: str  # "enroll" | "issue"
    nonce: bytes
    created: int
    state: str = "open"  # open -> used | dead


@dataclass
class PolicyKeyEntry:
    signing_share: SigningKeyShare
    verification_key: VerificationKey | None = None


@dataclass
class IssuanceView:
    """What a server sees of one issuance; kept in RAM for audit experiments."""

    uid: str
    pp_id: str
    blinded: bytes
    partial: bytes
    index: int
    epoch: int


def _b(payload: dict, key: str) -> bytes:
    v = payload.get(key)
    if not isinstance(v, (bytes, bytearray)):
        raise ProtocolError(f"field {key!r} must be bytes")
    return bytes(v)


def _s(payload: dict, key: str) -> str:
    v = payload.get(key)
    if not isinstance(v, str) or not v:
        raise ProtocolError(f"field {key!r} must be a non-empty string")
    return v


def _g1(payload: dict, key: str) -> G1:
    try:
        return G1.from_bytes(_b(payload, key))
    except ValueError as exc:
        raise ProtocolError(f"field {key!r}: {exc}") from exc


def _g2(payload: dict, key: str) -> G2:
    try:
        return G2.from_bytes(_b(payload, key))
    except ValueError as exc:
        raise ProtocolError(f"field {key!r}: {exc}") from exc


class IssuerServer:
    def __init__(self, config: ServerConfig, entropy: Entropy | None = None,
                 clock: Callable[[], int] | None = None):
        self.config = config
        self.n = config.n
        self.index = config.index
        self.role = f"server{config.index}"
        self.entropy = entropy or SystemEntropy()
        self.clock = clock or (lambda: int(time.time()))
        self.store = KVStore(config.state_path, durable=config.durable)
        self.peers: dict[int, PeerEndpoint] = {}
        self.peer_keys: dict[int, G2] = {}
        self.issuance_log: list[IssuanceView] = []

        self._lock = threading.RLock()
        self._sessions: dict[str, Session] = {}
        self._staged: dict[str, ShareRecord] = {}
        self._contrib_cv = threading.Condition()
        self._contributions: dict[str, dict[int, ShareRecord]] = {}
        self._refresh_inbox: dict[int, dict[int, dict[str, int]]] = {}
        self._refresh_own: dict[int, dict[str, list[int]]] = {}

        self._load_or_generate_keys()

    # -- key material -------------------------------------------------------

    def _load_or_generate_keys(self) -> None:
        st = self.store
        if "keys/identity" not in st:
            items: dict[str, Any] = {
                "keys/identity": scalar_to_bytes(sig_kgen(self.entropy.bytes(32)).secret).hex(),
                "keys/oprf": {"share": scalar_to_bytes(oprf_key_from_seed(self.entropy.bytes(32)).share).hex(),
                              "epoch": 0},
            }
            for pp_id in sorted(self.config.policies):
                sh = dsig_share_from_seed(self.index, self.entropy.bytes(32), pp_id)
                items[f"keys/policy/{pp_id}"] = {"share": scalar_to_bytes(sh.share).hex(), "epoch": 0}
            st.put_many(items)
        self.identity_secret = scalar_from_bytes(bytes.fromhex(st.get("keys/identity")))
        self.identity_key = G2.generator() * self.identity_secret
        o = st.get("keys/oprf")
        self.oprf_key = OprfKeyShare(scalar_from_bytes(bytes.fromhex(o["share"])), o["epoch"])
        self.policy_keys: dict[str, PolicyKeyEntry] = {}
        for pp_id in self.config.policies:
            rec = st.get(f"keys/policy/{pp_id}")
            if rec is None:
                raise ProtocolError(f"no key share for policy {pp_id!r}")
            share = SigningKeyShare(self.index, scalar_from_bytes(bytes.fromhex(rec["share"])), rec["epoch"], pp_id)
            vk_hex = st.get(f"vk/{pp_id}")
            vk = VerificationKey(G2(bytes.fromhex(vk_hex)), pp_id) if vk_hex else None
            self.policy_keys[pp_id] = PolicyKeyEntry(share, vk)
        for k in st.keys("peers/identity/"):
            self.peer_keys[int(k.rsplit("/", 1)[1])] = G2(bytes.fromhex(st.get(k)))

    @property
    def epoch(self) -> int:
        return self.oprf_key.epoch

    def verification_keys(self) -> dict[str, VerificationKey]:
        return {pp: e.verification_key for pp, e in self.policy_keys.items() if e.verification_key}

    def user(self, uid: str) -> UserRecord | None:
        d = self.store.get(f"user/{uid}")
        return UserRecord.from_json(d) if d else None

    def user_count(self) -> int:
        return sum(1 for _ in self.store.keys("user/"))

    # -- dispatch -------------------------------------------------------------

    def handle(self, msg_type: str, payload: dict) -> dict:
        handler = getattr(self, f"on_{msg_type}", None)
        if handler is None:
            raise ProtocolError(f"unknown message type {msg_type!r}")
        with acting_as(self.role):
            return handler(payload)

    def on_ping(self, payload: dict) -> dict:
        return {"index": self.index, "epoch": self.epoch, "users": self.user_count()}

    # -- sessions ---------------------------------------------------------------

    def _open_session(self, uid: str, kind: str) -> bytes:
        nonce = self.entropy.bytes(NONCE_BYTES)
        with self._lock:
            self._sessions[uid] = Session(kind, nonce, self.clock())
        return nonce

    def _live(self, s: Session | None) -> bool:
        return s is not None and self.clock() - s.created <= self.config.session_ttl

    def _take_session(self, uid: str, kind: str, nonces: list[bytes]) -> Session:
        if len(nonces) != self.n or not all(isinstance(x, (bytes, bytearray)) for x in nonces):
            raise ProtocolError(f"expected {self.n} server nonces")
        with self._lock:
            s = self._sessions.get(uid)
            if not self._live(s) or s.kind != kind or s.state != "open":
                raise SessionError(f"no open {kind} session for {uid!r}")
            if bytes(nonces[self.index - 1]) != s.nonce:
                raise SessionError("stale or foreign session nonce")
            s.state = "used"
            return s

    def session_table(self) -> dict[str, Session]:
        with self._lock:
            return dict(self._sessions)

    def expire_sessions(self) -> int:
        with self._lock:
            dead = [u for u, s in self._sessions.items() if not self._live(s)]
            for u in dead:
                del self._sessions[u]
        return len(dead)

    # -- enrolment --------------------------------------------------------------

    def on_enroll_round1(self, payload: dict) -> dict:
        uid = _s(payload, "uid")
        alpha = _g1(payload, "alpha")
        if f"user/{uid}" in self.store:
            raise ProtocolError(f"uid {uid!r} already enrolled")
        try:
            ev = oprf_eval(self.oprf_key, alpha, self.index)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        nonce = self._open_session(uid, "enroll")
        return {"index": self.index, "eval": ev.element.data, "epoch": ev.epoch, "nonce": nonce}

    def on_enroll_finalize(self, payload: dict) -> dict:
        uid = _s(payload, "uid")
        nonces = payload.get("nonces") or []
        session = self._take_session(uid, "enroll", nonces)
        try:
            pk_c = _g2(payload, "client_key")
            pk_se = _g2(payload, "se_key")
            consent = _b(payload, "consent")
            msg = enrolment_tuple(uid, pk_c.data, pk_se.data, consent, nonces)
            if not sig_vf(pk_c, msg, _b(payload, "client_sig")):
                raise AuthError("client signature rejected")
            if not sig_vf(pk_se, msg, _b(payload, "se_sig")):
                raise AuthError("secure-element signature rejected")
            with self._lock:
                if f"user/{uid}" in self.store:
                    raise ProtocolError(f"uid {uid!r} already enrolled")
                rec = UserRecord(uid, pk_c, pk_se, consent, self.clock(), session.nonce)
                self.store.put(f"user/{uid}", rec.to_json())
        finally:
            with self._lock:
                if self._sessions.get(uid) is session:
                    del self._sessions[uid]
        log.info("%s enrolled %s", self.role, uid)
        return {"ok": True}

    def on_enroll_abort(self, payload: dict) -> dict:
        uid = _s(payload, "uid")
        rec = self.user(uid)
        if rec is None:
            return {"ok": True, "removed": False}
        if not sig_vf(rec.client_key, abort_tuple(uid, rec.enrol_nonce), _b(payload, "client_sig")):
            raise AuthError("abort not authorised")
        self.store.delete(f"user/{uid}")
        return {"ok": True, "removed": True}

    # -- health data --------------------------------------------------------------

    def on_ingest_health(self, payload: dict) -> dict:
        uid = _s(payload, "uid")
        raw = _b(payload, "record")
        if self.config.ha_key is None or not sig_vf(self.config.ha_key, authority_message(uid, raw),
                                                     _b(payload, "authority_sig")):
            raise AuthError("health authority signature rejected")
        rec = self.user(uid)
        if rec is None:
            raise UnknownUser(f"unknown uid {uid!r}")
        if not rec.consent:
            raise PolicyError("no consent on file")
        try:
            parsed = HealthRecord.from_canonical(raw)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        latest = parsed.latest_date()
        if latest is not None and latest > self.clock():
            raise ProtocolError("health record contains future-dated events")
        del parsed
        d = secret_digest(raw)
        if self.index < self.n:
            x = self.entropy.bytes(len(raw))
            sr = ShareRecord(d, Share(self.index, x))
            with self._lock:
                self._staged[uid] = sr
            try:
                self._signed_call(self.n, "peer_ingest_share", {"uid": uid, "d": d, "x": x})
            except DHPError:
                with self._lock:
                    self._staged.pop(uid, None)
                raise
            return {"ok": True, "staged": True}
        return self._ingest_as_last(uid, raw, d)

    def _ingest_as_last(self, uid: str, raw: bytes, d: bytes) -> dict:
        need = set(range(1, self.n))
        with self._contrib_cv:
            self._contrib_cv.wait_for(lambda: need <= set(self._contributions.get(uid, {})),
                                      timeout=self.config.ingest_wait)
            got = self._contributions.pop(uid, {})
        if not need <= set(got):
            raise TransportError(f"missing share contributions from {sorted(need - set(got))}")
        if any(got[i].digest != d for i in need):
            raise IntegrityError("peers disagree on the record digest")
        x = bytearray(raw)
        for i in sorted(need):
            x = bytearray(xor_bytes(bytes(x), got[i].share.data))
        mine = ShareRecord(d, Share(self.index, bytes(x)))
        zeroize(x)
        for i in sorted(need):
            self._signed_call(i, "peer_ingest_commit", {"uid": uid, "d": d})
        self._store_health(uid, mine)
        return {"ok": True, "staged": False}

    def _store_health(self, uid: str, sr: ShareRecord) -> None:
        with self._lock:
            rec = self.user(uid)
            if rec is None:
                raise UnknownUser(uid)
            rec.health = sr
            self.store.put(f"user/{uid}", rec.to_json())

    def on_peer_ingest_share(self, payload: dict) -> dict:
        sender = self._check_peer("peer_ingest_share", payload)
        if self.index != self.n:
            raise ProtocolError("only the last server collects share contributions")
        uid = _s(payload, "uid")
        sr = ShareRecord(_b(payload, "d"), Share(sender, _b(payload, "x")))
        with self._contrib_cv:
            self._contributions.setdefault(uid, {})[sender] = sr
            self._contrib_cv.notify_all()
        return {"ok": True}

    def on_peer_ingest_commit(self, payload: dict) -> dict:
        self._check_peer("peer_ingest_commit", payload)
        uid = _s(payload, "uid")
        with self._lock:
            sr = self._staged.get(uid)
            if sr is None or sr.digest != _b(payload, "d"):
                raise ProtocolError("nothing staged for this record")
            del self._staged[uid]
        self._store_health(uid, sr)
        return {"ok": True}

    # -- issuance -----------------------------------------------------------------

    def on_issue_round1(self, payload: dict) -> dict:
        uid = _s(payload, "uid")
        alpha = _g1(payload, "alpha")
        if f"user/{uid}" not in self.store:
            raise UnknownUser(f"unknown uid {uid!r}")
        try:
            ev = oprf_eval(self.oprf_key, alpha, self.index)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        nonce = self._open_session(uid, "issue")
        return {"index": self.index, "eval": ev.element.data, "epoch": ev.epoch, "nonce": nonce}

    def on_issue_round2(self, payload: dict) -> dict:
        uid = _s(payload, "uid")
        pp_id = _s(payload, "pp_id")
        nonces = [bytes(x) for x in payload.get("nonces") or []]
        session = self._take_session(uid, "issue", nonces)
        try:
            return self._issue(uid, pp_id, nonces, payload)
        except AuthError:
            session.state = "dead"
            raise

    def _issue(self, uid: str, pp_id: str, nonces: list[bytes], payload: dict) -> dict:
        rec = self.user(uid)
        if rec is None:
            raise UnknownUser(f"unknown uid {uid!r}")
        blinded = _b(payload, "blinded")
        msg = issuance_tuple(uid, pp_id, nonces, blinded)
        if not sig_vf(rec.client_key, msg, _b(payload, "client_sig")):
            raise AuthError("client signature rejected")
        if not sig_vf(rec.se_key, msg, _b(payload, "se_sig")):
            raise AuthError("secure-element signature rejected")
        policy = self.config.policies.get(pp_id)
        entry = self.policy_keys.get(pp_id)
        if policy is None or entry is None:
            raise PolicyError(f"unknown policy {pp_id!r}")
        try:
            beta = G1.from_bytes(blinded)
        except ValueError as exc:
            raise ProtocolError(f"blinded message: {exc}") from exc
        if beta.is_identity():
            raise ProtocolError("blinded message is the identity")
        if rec.health is None:
            raise PolicyError("no health data on file")

        records = [rec.health] + self._collect_peer_shares(uid, nonces)
        buf = bytearray(len(rec.health.share.data))
        try:
            try:
                guarded_reconstruct(records, buf)
            except ShareError as exc:
                raise IntegrityError(str(exc)) from exc
            ok = policy_eval(HealthRecord.from_canonical(buf), policy, self.clock())
        finally:
            zeroize(buf)
        if not ok:
            raise PolicyError(f"policy {pp_id!r} not satisfied")

        partial = dsig_sign(entry.signing_share, beta)
        self.issuance_log.append(IssuanceView(uid, pp_id, blinded, partial.element.data,
                                              partial.index, partial.epoch))
        return {"index": partial.index, "partial": partial.element.data, "epoch": partial.epoch}

    def _collect_peer_shares(self, uid: str, nonces: list[bytes]) -> list[ShareRecord]:
        out = []
        for j in range(1, self.n + 1):
            if j == self.index:
                continue
            resp = self._signed_call(j, "peer_get_share", {"uid": uid, "nonces": nonces})
            out.append(ShareRecord(_b(resp, "d"), Share(j, _b(resp, "x"))))
        return out

    def on_peer_get_share(self, payload: dict) -> dict:
        self._check_peer("peer_get_share", payload)
        uid = _s(payload, "uid")
        nonces = payload.get("nonces") or []
        with self._lock:
            s = self._sessions.get(uid)
            ok = (self._live(s) and s.kind == "issue" and s.state in ("open", "used")
                  and len(nonces) == self.n and bytes(nonces[self.index - 1]) == s.nonce)
        if not ok:
            raise SessionError("no live issuance session for this user here")
        rec = self.user(uid)
        if rec is None or rec.health is None:
            raise PolicyError("no health data on file")
        return {"d": rec.health.digest, "x": rec.health.share.data}

    # -- peer authentication --------------------------------------------------

    def _signed_call(self, peer: int, msg_type: str, body: dict) -> dict:
        ep = self.peers.get(peer)
        if ep is None:
            raise TransportError(f"no route to server {peer}")
        auth = sig_sign(self.identity_secret, peer_message(msg_type, self.index, peer, body))
        try:
            return ep.call(msg_type, {**body, "sender": self.index, "auth": auth.to_bytes()})
        except DHPError:
            raise
        except Exception as exc:  # socket errors and friends
            raise TransportError(f"server {peer} unreachable: {exc}") from exc

    def _check_peer(self, msg_type: str, payload: dict) -> int:
        sender = payload.get("sender")
        key = self.peer_keys.get(sender) if isinstance(sender, int) else None
        if key is None or sender == self.index:
            raise AuthError("request from an unconfigured peer")
        body = {k: v for k, v in payload.items() if k not in ("sender", "auth")}
        if not sig_vf(key, peer_message(msg_type, sender, self.index, body), payload.get("auth", b"")):
            raise AuthError("peer signature rejected")
        return sender

    # -- key ceremony -----------------------------------------------------------

    def on_keygen_contribute(self, payload: dict) -> dict:
        out = {}
        for pp_id, entry in sorted(self.policy_keys.items()):
            c = contribute(entry.signing_share)
            out[pp_id] = {"public": c.public.data, "pop": c.pop.to_bytes()}
        return {
            "index": self.index,
            "identity": self.identity_key.data,
            "identity_pop": pop_prove(self.identity_secret, self.identity_key).to_bytes(),
            "contributions": out,
        }

    def on_keygen_finalize(self, payload: dict) -> dict:
        identities = {int(i): G2.from_bytes(k) for i, k in payload["identities"].items()}
        pops = {int(i): Signature.from_bytes(p) for i, p in payload["identity_pops"].items()}
        if sorted(identities) != list(range(1, self.n + 1)):
            raise ProtocolError("identity keys missing")
        for i, k in identities.items():
            if not pop_verify(k, pops[i]):
                raise AuthError(f"identity key of server {i} lacks proof of possession")
        if identities[self.index] != self.identity_key:
            raise ProtocolError("my identity key was replaced")
        vks: dict[str, VerificationKey] = {}
        for pp_id, contribs in payload["contributions"].items():
            if pp_id not in self.policy_keys:
                raise ProtocolError(f"unknown policy {pp_id!r}")
            cs = [KeyContribution(int(c["index"]), G2.from_bytes(c["public"]), Signature.from_bytes(c["pop"]))
                  for c in contribs]
            mine = [c for c in cs if c.index == self.index]
            if len(mine) != 1 or mine[0].public != self.policy_keys[pp_id].signing_share.public_contribution():
                raise ProtocolError(f"my contribution to {pp_id!r} is missing or altered")
            try:
                vks[pp_id] = aggregate_key(cs, self.n, pp_id)
            except blindsig.KeygenError as exc:
                raise AuthError(str(exc)) from exc
        if set(vks) != set(self.policy_keys):
            raise ProtocolError("ceremony did not cover every policy")
        items: dict[str, Any] = {f"vk/{pp}": vk.element.hex() for pp, vk in vks.items()}
        items.update({f"peers/identity/{i}": k.hex() for i, k in identities.items() if i != self.index})
        self.store.put_many(items)
        for pp, vk in vks.items():
            self.policy_keys[pp].verification_key = vk
        self.peer_keys = {i: k for i, k in identities.items() if i != self.index}
        return {"vks": {pp: vk.element.data for pp, vk in vks.items()}}

    # -- proactive refresh ------------------------------------------------------

    def _refresh_labels(self) -> list[str]:
        return sorted(self.policy_keys) + [OPRF_LABEL]

    def on_refresh_begin(self, payload: dict) -> dict:
        """Draw zero-sum deltas for every key and send each peer its component."""
        if self.n < 2:
            raise ProtocolError("refresh needs at least two servers")
        epoch = int(payload["epoch"])
        if epoch != self.epoch:
            raise ProtocolError(f"refresh for epoch {epoch}, I am at {self.epoch}")
        vectors = {label: dsig_refresh_deltas(self.n, self.entropy.bytes(32)) for label in self._refresh_labels()}
        commitments = {label: [(G2.generator() * d).data for d in vec] for label, vec in vectors.items()}
        with self._lock:
            self._refresh_own[epoch] = vectors
        for j in range(1, self.n + 1):
            if j == self.index:
                continue
            self._signed_call(j, "peer_refresh_delta", {
                "epoch": epoch,
                "deltas": {label: scalar_to_bytes(vec[j - 1]) for label, vec in vectors.items()},
                "commitments": commitments,
            })
        return {"ok": True}

    def on_peer_refresh_delta(self, payload: dict) -> dict:
        sender = self._check_peer("peer_refresh_delta", payload)
        epoch = int(payload["epoch"])
        deltas = {label: scalar_from_bytes(v) for label, v in payload["deltas"].items()}
        if set(deltas) != set(self._refresh_labels()):
            raise ProtocolError("delta vector does not cover every key")
        for label, comms in payload["commitments"].items():
            pts = [G2.from_bytes(c) for c in comms]
            if len(pts) != self.n:
                raise ProtocolError("commitment vector has wrong length")
            # the committed vector must sum to zero and contain my component
            total = G2.identity()
            for p in pts:
                total = total + p
            if not total.is_identity():
                raise ProtocolError(f"deltas for {label!r} do not sum to zero")
            if pts[self.index - 1] != G2.generator() * deltas[label]:
                raise ProtocolError(f"delta for {label!r} does not match its commitment")
        with self._lock:
            self._refresh_inbox.setdefault(epoch, {})[sender] = deltas
        return {"ok": True}

    def on_refresh_commit(self, payload: dict) -> dict:
        epoch = int(payload["epoch"])
        with self._lock:
            own = self._refresh_own.get(epoch)
            inbox = self._refresh_inbox.get(epoch, {})
            expected = set(range(1, self.n + 1)) - {self.index}
            if own is None or set(inbox) != expected:
                self._refresh_own.pop(epoch, None)
                self._refresh_inbox.pop(epoch, None)
                raise ProtocolError(f"refresh aborted: contributions from {sorted(inbox)} of {sorted(expected)}")
            received = {label: [own[label][self.index - 1]] + [inbox[j][label] for j in sorted(inbox)]
                        for label in self._refresh_labels()}
            new_oprf = OprfKeyShare((self.oprf_key.share + sum(received[OPRF_LABEL])) % blindsig.ORDER,
                                    self.oprf_key.epoch + 1)
            new_shares = {pp: blindsig.apply_deltas(entry.signing_share, received[pp])
                          for pp, entry in self.policy_keys.items()}
            items: dict[str, Any] = {"keys/oprf": {"share": scalar_to_bytes(new_oprf.share).hex(),
                                                   "epoch": new_oprf.epoch}}
            for pp, sh in new_shares.items():
                items[f"keys/policy/{pp}"] = {"share": scalar_to_bytes(sh.share).hex(), "epoch": sh.epoch}
            self.store.put_many(items)
            self.oprf_key = new_oprf
            for pp, sh in new_shares.items():
                self.policy_keys[pp].signing_share = sh
            self._refresh_own.pop(epoch, None)
            self._refresh_inbox.pop(epoch, None)
        return {
            "epoch": self.epoch,
            "publics": {pp: sh.public_contribution().data for pp, sh in new_shares.items()},
        }
