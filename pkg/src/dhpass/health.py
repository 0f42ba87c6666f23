"""Health records, public policies and policy evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

from .encoding import decode_fields, encode_fields, read_u32, read_u64, u32, u64

DAY = 86_400
HOUR = 3_600

TestResult = Literal["negative", "positive"]


@dataclass(frozen=True, order=True)
class Vaccination:
    date: int
    vaccine_type: str
    dose: int = 1


@dataclass(frozen=True, order=True)
class TestEvent:
    date: int
    result: TestResult

    def __post_init__(self) -> None:
        if self.result not in ("negative", "positive"):
            raise ValueError(f"unknown test result {self.result!r}")


@dataclass(frozen=True, order=True)
class Recovery:
    date: int


_HEADER = b"dhpass-health-v1"


@dataclass(frozen=True)
class HealthRecord:
    vaccinations: tuple[Vaccination, ...] = ()
    tests: tuple[TestEvent, ...] = ()
    recoveries: tuple[Recovery, ...] = ()

    def __post_init__(self) -> None:
        # order-normalize so equal records serialize identically
        object.__setattr__(self, "vaccinations", tuple(sorted(self.vaccinations)))
        object.__setattr__(self, "tests", tuple(sorted(self.tests)))
        object.__setattr__(self, "recoveries", tuple(sorted(self.recoveries)))

    def is_empty(self) -> bool:
        return not (self.vaccinations or self.tests or self.recoveries)

    def latest_date(self) -> int | None:
        dates = [e.date for e in (*self.vaccinations, *self.tests, *self.recoveries)]
        return max(dates) if dates else None

    def canonical(self) -> bytes:
        vacc = encode_fields(encode_fields([u64(v.date), v.vaccine_type, u32(v.dose)]) for v in self.vaccinations)
        tests = encode_fields(encode_fields([u64(t.date), t.result]) for t in self.tests)
        recs = encode_fields(u64(r.date) for r in self.recoveries)
        return encode_fields([_HEADER, vacc, tests, recs])

    @classmethod
    def from_canonical(cls, data: bytes) -> "HealthRecord":
        try:
            header, vacc, tests, recs = decode_fields(bytes(data))
            if header != _HEADER:
                raise ValueError("bad record header")
            vs = []
            for raw in decode_fields(vacc):
                d, typ, dose = decode_fields(raw)
                vs.append(Vaccination(read_u64(d), typ.decode("utf-8"), read_u32(dose)))
            ts = []
            for raw in decode_fields(tests):
                d, res = decode_fields(raw)
                ts.append(TestEvent(read_u64(d), res.decode("ascii")))  # type: ignore[arg-type]
            rs = [Recovery(read_u64(d)) for d in decode_fields(recs)]
        except ValueError:
            raise
        except Exception as exc:  # wrong field count, bad utf-8, ...
            raise ValueError(f"malformed health record: {exc}") from exc
        return cls(tuple(vs), tuple(ts), tuple(rs))


@dataclass(frozen=True)
class PublicPolicy:
    """A disjunction of freshness clauses; any one satisfied clause suffices."""

    pp_id: str
    max_vaccination_age_days: int | None = None
    max_negative_test_age_hours: int | None = None
    max_recovery_age_days: int | None = None
    description: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.pp_id:
            raise ValueError("policy needs an identifier")
        if not self.clauses():
            raise ValueError(f"policy {self.pp_id!r} has no clauses")
        for name, limit in self.clauses():
            if limit < 0:
                raise ValueError(f"negative limit for {name}")

    def clauses(self) -> list[tuple[str, int]]:
        out = []
        for name in ("max_vaccination_age_days", "max_negative_test_age_hours", "max_recovery_age_days"):
            v = getattr(self, name)
            if v is not None:
                out.append((name, v))
        return out

    def render(self) -> str:
        parts = []
        if self.max_vaccination_age_days is not None:
            parts.append(f"a vaccination at most {self.max_vaccination_age_days} days old")
        if self.max_negative_test_age_hours is not None:
            parts.append(f"a negative test taken within the last {self.max_negative_test_age_hours} hours")
        if self.max_recovery_age_days is not None:
            parts.append(f"a recovery at most {self.max_recovery_age_days} days ago")
        text = f"Policy {self.pp_id}: the verifier learns only that you have " + " OR ".join(parts) + "."
        if self.description:
            text += f" ({self.description})"
        return text

    def to_json(self) -> dict:
        d = {"pp_id": self.pp_id}
        for name, limit in self.clauses():
            d[name] = limit
        if self.description:
            d["description"] = self.description
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PublicPolicy":
        return cls(**d)


def _fresh(date: int, now: int, limit_seconds: int) -> bool:
    age = now - date
    return 0 <= age <= limit_seconds


def policy_eval(record: HealthRecord, policy: PublicPolicy, now: int) -> bool:
    """True iff any clause holds. Boundaries are inclusive; events dated after
    ``now`` never count; a positive test voids every negative test not strictly
    later than it."""
    if policy.max_vaccination_age_days is not None and record.vaccinations:
        past = [v.date for v in record.vaccinations if v.date <= now]
        if past and _fresh(max(past), now, policy.max_vaccination_age_days * DAY):
            return True
    if policy.max_negative_test_age_hours is not None and record.tests:
        past = [t for t in record.tests if t.date <= now]
        last_positive = max((t.date for t in past if t.result == "positive"), default=None)
        negatives = [t.date for t in past if t.result == "negative"
                     and (last_positive is None or t.date > last_positive)]
        if negatives and _fresh(max(negatives), now, policy.max_negative_test_age_hours * HOUR):
            return True
    if policy.max_recovery_age_days is not None and record.recoveries:
        past = [r.date for r in record.recoveries if r.date <= now]
        if past and _fresh(max(past), now, policy.max_recovery_age_days * DAY):
            return True
    return False


class PolicyRegistry(dict):
    """pp_id -> PublicPolicy, validated on construction."""

    def __init__(self, policies: Iterable[PublicPolicy] = ()):
        super().__init__()
        for p in policies:
            if p.pp_id in self:
                raise ValueError(f"duplicate policy id {p.pp_id!r}")
            self[p.pp_id] = p

    def to_json(self) -> list[dict]:
        return [p.to_json() for p in self.values()]

    @classmethod
    def from_json(cls, items: list[dict]) -> "PolicyRegistry":
        return cls(PublicPolicy.from_json(d) for d in items)


def default_policies() -> PolicyRegistry:
    return PolicyRegistry([
        PublicPolicy("vax-180d", max_vaccination_age_days=180),
        PublicPolicy("test-24h", max_negative_test_age_hours=24),
        PublicPolicy("entry-3g", max_vaccination_age_days=180, max_negative_test_age_hours=24,
                     max_recovery_age_days=180),
    ])
