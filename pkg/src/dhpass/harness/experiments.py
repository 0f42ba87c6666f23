"""Repeatable experiment drivers shared by the CLI and the test-suite."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..health import DAY, HealthRecord, Vaccination
from ..reader import Reader, ReaderConfig, Reason
from .attacks import TOKEN_FIELDS, attack_linkage, attack_tamper, collude, linkage_accuracy
from .deployment import Deployment

DEFAULT_PASSWORD = "correct horse battery"


def vaccinated(dep: Deployment, days_ago: int = 30) -> HealthRecord:
    return HealthRecord(vaccinations=(Vaccination(dep.clock() - days_ago * DAY, "mRNA", 2),))


def onboard(dep: Deployment, uid: str, pw: str = DEFAULT_PASSWORD, record: HealthRecord | None = None):
    wallet = dep.new_wallet(uid)
    wallet.enroll(pw, dep.channel())
    dep.push_health(uid, record if record is not None else vaccinated(dep))
    return wallet


@dataclass
class LinkageResult:
    trials: int
    accuracy: float
    per_trial: list[float] = field(default_factory=list)


def run_linkage(dep: Deployment, trials: int, *, blind: bool = True, users: int = 2,
                pp_id: str = "vax-180d", seed: int = 0) -> LinkageResult:
    """Each trial: every user gets one token at the same reader; all servers
    pool their logs; the adversary matches shuffled tokens to issuances."""
    rng = random.Random(seed)
    tag = "b" if blind else "nb"
    wallets = [onboard(dep, f"link-{tag}-{seed}-{k}") for k in range(users)]
    reader = dep.reader(f"gate-link-{tag}")
    keys = dep.verification_keys()
    scores = []
    for _ in range(trials):
        for s in dep.servers:
            s.issuance_log.clear()
        tokens = []
        for w in wallets:
            tok, reason = dep.issue_and_verify(w, DEFAULT_PASSWORD, reader, pp_id, blind=blind)
            if reason is not Reason.ACCEPT:
                raise RuntimeError(f"honest token rejected: {reason}")
            tokens.append(tok)
        views = collude([s.issuance_log for s in dep.servers])
        uid_to_view = {v.uid: i for i, v in enumerate(views)}
        order = list(range(users))
        rng.shuffle(order)
        shuffled = [tokens[k] for k in order]
        truth = [uid_to_view[wallets[k].uid] for k in order]
        guess = attack_linkage(views, shuffled, keys, rng)
        scores.append(linkage_accuracy(guess, truth))
    return LinkageResult(trials, sum(scores) / len(scores), scores)


@dataclass
class TamperResult:
    attempts: int
    accepted: int
    reasons: dict[str, int]


def run_tamper(dep: Deployment, mutations: int, *, seed: int = 0, armed: bool = True,
               pp_id: str = "vax-180d") -> TamperResult:
    """Flip random single bits of one honest (never presented) token."""
    rng = random.Random(seed)
    wallet = onboard(dep, f"tamper-{seed}")
    # the honest token comes from one reader; forgeries go to another whose
    # nonce set has never seen it
    ch = dep.challenge(dep.reader("gate-honest"), pp_id)
    token = wallet.acquire_token(ch, DEFAULT_PASSWORD, dep.channel())
    reader = Reader(ReaderConfig("gate-tamper", dep.verification_keys(), window=dep.config.reader_window),
                    dep.root.fork("reader/gate-tamper"), dep.clock)
    reasons: dict[str, int] = {}
    accepted = 0
    for _ in range(mutations):
        field_ = rng.choice(TOKEN_FIELDS)
        bit = rng.randrange(8 * 48)
        if not armed:
            reader.session_timeout(dep.clock() + 10**6)
            dep.challenge(reader, pp_id)
        reason = attack_tamper(reader, token, field_, bit, armed=armed, now=dep.clock())
        reasons[reason.value] = reasons.get(reason.value, 0) + 1
        accepted += reason is Reason.ACCEPT
    return TamperResult(mutations, accepted, reasons)
