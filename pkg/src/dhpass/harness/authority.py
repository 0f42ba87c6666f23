"""Mock health authority: holds a signing key and pushes records to the servers."""
from __future__ import annotations

import logging

from ..blindsig import sig_kgen, sig_sign
from ..entropy import Entropy, SystemEntropy
from ..group import G2, acting_as
from ..health import HealthRecord
from ..protocol import authority_message
from .transport import ServerGroup

log = logging.getLogger(__name__)


class HealthAuthority:
    role = "ha"

    def __init__(self, entropy: Entropy | None = None, secret: int | None = None):
        entropy = entropy or SystemEntropy()
        if secret is None:
            secret = sig_kgen(entropy.bytes(32)).secret
        self.secret = secret
        self.public = G2.generator() * secret

    def sign_record(self, uid: str, record: HealthRecord) -> dict:
        raw = record.canonical()
        return {"uid": uid, "record": raw,
                "authority_sig": sig_sign(self.secret, authority_message(uid, raw)).to_bytes()}

    def push(self, uid: str, record: HealthRecord, servers: ServerGroup) -> None:
        """Servers 1..n-1 first, then server n, which completes the split."""
        with acting_as(self.role):
            payload = self.sign_record(uid, record)
            servers.sequential("ingest_health", [payload] * servers.n)
        log.info("pushed health record for %s", uid)


def ha_push(authority: HealthAuthority, uid: str, record: HealthRecord, servers: ServerGroup) -> None:
    authority.push(uid, record, servers)
