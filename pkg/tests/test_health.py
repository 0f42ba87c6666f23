import pytest
from hypothesis import given, strategies as st

from dhpass.health import (
    DAY, HOUR, HealthRecord, PolicyRegistry, PublicPolicy, Recovery, Vaccination,
    default_policies, policy_eval,
)
from dhpass.health import TestEvent as LabTest

NOW = 1_800_000_000
VAX = PublicPolicy("vax-180d", max_vaccination_age_days=180)
TEST = PublicPolicy("test-24h", max_negative_test_age_hours=24)


def vax(days_ago):
    return HealthRecord(vaccinations=(Vaccination(NOW - days_ago * DAY, "mRNA"),))


def test_empty_record_never_satisfies():
    for p in default_policies().values():
        assert not policy_eval(HealthRecord(), p, NOW)


@pytest.mark.parametrize("days,ok", [(0, True), (30, True), (180, True), (181, False)])
def test_vaccination_age_boundary(days, ok):
    assert policy_eval(vax(days), VAX, NOW) is ok


def test_vaccination_one_second_past_limit():
    rec = HealthRecord(vaccinations=(Vaccination(NOW - 180 * DAY - 1, "x"),))
    assert not policy_eval(rec, VAX, NOW)


def test_future_events_ignored():
    rec = HealthRecord(vaccinations=(Vaccination(NOW + DAY, "x"),))
    assert not policy_eval(rec, VAX, NOW)


def test_negative_test_window_and_positive_voids():
    neg = LabTest(NOW - 10 * HOUR, "negative")
    assert policy_eval(HealthRecord(tests=(neg,)), TEST, NOW)
    assert not policy_eval(HealthRecord(tests=(LabTest(NOW - 25 * HOUR, "negative"),)), TEST, NOW)
    later_pos = LabTest(NOW - 5 * HOUR, "positive")
    assert not policy_eval(HealthRecord(tests=(neg, later_pos)), TEST, NOW)
    earlier_pos = LabTest(NOW - 20 * HOUR, "positive")
    assert policy_eval(HealthRecord(tests=(neg, earlier_pos)), TEST, NOW)


def test_clauses_are_ored():
    p = default_policies()["entry-3g"]
    assert policy_eval(HealthRecord(recoveries=(Recovery(NOW - 10 * DAY),)), p, NOW)
    assert policy_eval(vax(100), p, NOW)
    assert not policy_eval(vax(200), p, NOW)


def test_render_mentions_limits():
    assert "at most 180 days old" in VAX.render()
    assert "within the last 24 hours" in TEST.render()


def test_policy_without_clauses_rejected():
    with pytest.raises(ValueError):
        PublicPolicy("empty")
    with pytest.raises(ValueError):
        PolicyRegistry([VAX, VAX])


def test_policy_json_roundtrip():
    reg = default_policies()
    assert PolicyRegistry.from_json(reg.to_json()) == reg


def test_canonical_is_order_independent():
    a = Vaccination(1, "a")
    b = Vaccination(2, "b")
    assert HealthRecord((a, b)).canonical() == HealthRecord((b, a)).canonical()


def test_from_canonical_rejects_garbage():
    with pytest.raises(ValueError):
        HealthRecord.from_canonical(b"\x00\x00\x00\x05abc")
    with pytest.raises(ValueError):
        HealthRecord.from_canonical(b"not a record")


events = st.integers(0, 2**40)


@given(
    vs=st.lists(st.tuples(events, st.text(max_size=8), st.integers(1, 4)), max_size=3),
    ts=st.lists(st.tuples(events, st.sampled_from(["negative", "positive"])), max_size=3),
    rs=st.lists(events, max_size=3),
)
def test_property_canonical_roundtrip(vs, ts, rs):
    rec = HealthRecord(tuple(Vaccination(*v) for v in vs), tuple(LabTest(*t) for t in ts),
                       tuple(Recovery(r) for r in rs))
    assert HealthRecord.from_canonical(rec.canonical()) == rec
