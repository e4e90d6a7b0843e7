import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trustfl.policy import (ACTIVE, PROBATION, SUSPENDED, Candidate, Claim, NodeStatus, PolicyConfig,
                            PolicyConfigError, StrikeLedger, classify_status, compute_payouts,
                            form_admission_set, next_status, register_strike_and_check,
                            screen_update, select_aggregator)

REF = PolicyConfig()


def cand(nid, trust, cons=0.5, status=None, strikes=0):
    return Candidate(nid, trust, cons, status or NodeStatus.active(), strikes)


@pytest.mark.parametrize("kw", [
    dict(probation_threshold=0.5, admit_threshold=0.4),
    dict(probation_cadence=0),
    dict(slash_fraction=1.0),
    dict(trim_fraction=0.5),
    dict(agg_method="krum"),
    dict(round_budget=-1.0),
])
def test_invalid_config(kw):
    with pytest.raises(PolicyConfigError):
        PolicyConfig(**kw)


@given(st.floats(0, 1))
def test_classification_partitions_unit_interval(t):
    kind = classify_status(t, REF)
    assert kind in (ACTIVE, PROBATION, SUSPENDED)
    assert (kind == ACTIVE) == (t >= 0.40)
    assert (kind == SUSPENDED) == (t < 0.25)


def test_suspension_lasts_h_rounds_then_probation():
    st_ = next_status(NodeStatus.active(3), 0.249, 3, REF)
    assert st_ == NodeStatus.suspended(5, 3)
    assert next_status(st_, 0.1, 4, REF) == st_
    assert next_status(st_, 0.1, 5, REF).kind == PROBATION


def test_longer_slash_suspension_replaces_shorter():
    cfg = PolicyConfig(suspension_rounds=3)
    cur = NodeStatus.suspended(5)
    assert next_status(cur, 0.1, 4, cfg, slashed=True).until_round == 7
    assert next_status(NodeStatus.suspended(9), 0.1, 4, cfg, slashed=True).until_round == 9


def test_admission_no_capacity_pressure():
    cands = [cand("c", 0.5), cand("a", 0.9), cand("b", 0.7)]
    assert form_admission_set(cands, 0, REF) == ["a", "b", "c"]


def test_probation_cadence():
    c = cand("p", 0.3, status=NodeStatus.probation(10))
    assert form_admission_set([c], 11, REF) == []
    assert form_admission_set([c], 12, REF) == ["p"]


def test_admission_excludes_serving_suspension():
    c = cand("s", 0.1, status=NodeStatus.suspended(5))
    assert form_admission_set([c], 5, REF) == []


def test_admission_tie_breaks():
    cands = [cand("x", 0.6, 0.4), cand("y", 0.6, 0.9)]
    assert form_admission_set(cands, 0, REF) == ["y", "x"]
    cands = [cand("x", 0.6, 0.5, strikes=2), cand("y", 0.6, 0.5, strikes=1), cand("w", 0.6, 0.5, strikes=1)]
    assert form_admission_set(cands, 0, REF) == ["w", "y", "x"]


def test_admission_capacity():
    cands = [cand(f"n{i}", i / 10) for i in range(4, 10)]
    out = form_admission_set(cands, 0, PolicyConfig(max_participants=3))
    assert out == ["n9", "n8", "n7"]


@pytest.mark.parametrize("gain,quality,expected", [
    (0.0, 0.20, True),
    (-1e-6, 0.9, False),
    (0.3, 0.19, False),
    (1.0, 1.0, True),
])
def test_screening(gain, quality, expected):
    assert screen_update(gain, quality, REF) is expected


@given(st.floats(-1, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_screening_monotone(g, d, dg, dd):
    if screen_update(g, d, REF):
        assert screen_update(g + dg, min(1.0, d + dd), REF)


def test_first_strike_does_not_slash():
    assert register_strike_and_check(StrikeLedger(), "a", 3, REF) is None


def test_two_strikes_in_window_slash():
    led = StrikeLedger()
    assert register_strike_and_check(led, "a", 4, REF) is None
    dec = register_strike_and_check(led, "a", 6, REF)
    assert dec is not None
    assert (dec.fraction, dec.suspend_rounds, dec.cap_value, dec.cap_rounds) == (0.10, 2, 0.60, 5)
    # strikes are consumed
    assert register_strike_and_check(led, "a", 7, REF) is None


def test_strikes_outside_window_do_not_count():
    led = StrikeLedger()
    register_strike_and_check(led, "a", 1, REF)
    # window (2, 7] excludes round 1
    assert register_strike_and_check(led, "a", 7, REF) is None
    assert led.recent("a", 7, 5) == 1


def test_strike_rounds_must_increase():
    led = StrikeLedger()
    led.record("a", 3)
    with pytest.raises(ValueError):
        led.record("a", 3)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=40), st.integers(1, 4), st.integers(1, 6))
def test_slashes_bounded_by_strikes(gaps, s, w):
    cfg = PolicyConfig(strikes_to_slash=s, strike_window=w)
    led = StrikeLedger()
    r, slashes = 0, 0
    for gap in gaps:
        r += gap + 1
        slashes += register_strike_and_check(led, "a", r, cfg) is not None
    assert slashes <= len(gaps) // s


def test_payout_single_claimant():
    assert compute_payouts([Claim("a", 0.7, 0.5)], 100.0, 0.5) == {"a": 100.0}


def test_payout_empty():
    assert compute_payouts([], 100.0, 0.5) == {}


def test_payout_probation_cap_redistributes():
    out = compute_payouts([Claim("act", 0.6, 1.0), Claim("pro", 0.2, 1.0, on_probation=True)], 100.0, 0.5)
    assert out["act"] == pytest.approx(87.5, abs=1e-9)
    assert out["pro"] == pytest.approx(12.5, abs=1e-9)


def test_payout_only_probation_withholds_excess():
    out = compute_payouts([Claim("p", 1.0, 0.3, on_probation=True)], 100.0, 0.5)
    assert out == {"p": 50.0}


def test_payout_zero_utility():
    assert compute_payouts([Claim("a", 0.0, 0.9), Claim("b", 0.0, 0.5)], 100.0, 0.5) == {"a": 0.0, "b": 0.0}


claims = st.lists(st.builds(Claim, st.text("abcdef", min_size=1, max_size=3), st.floats(0, 1),
                            st.floats(0, 1), st.booleans()),
                  max_size=8, unique_by=lambda c: c.node_id)


@given(claims, st.floats(0, 1e6), st.floats(0, 0.99))
def test_payouts_within_budget(cs, budget, phi):
    out = compute_payouts(cs, budget, phi)
    assert all(v >= 0 for v in out.values())
    assert sum(out.values()) <= budget
    full = [c for c in cs if not c.on_probation and c.utility > 0]
    if full and budget > 0:
        assert sum(out.values()) == pytest.approx(budget, rel=1e-9)


@given(claims, st.floats(0.01, 100))
def test_payouts_share_invariant(cs, c):
    base = compute_payouts(cs, 100.0, 0.5)
    scaled = compute_payouts([Claim(x.node_id, x.accuracy, x.trust * c, x.on_probation) for x in cs],
                             100.0, 0.5)
    assert scaled.keys() == base.keys()
    for k in base:
        assert scaled[k] == pytest.approx(base[k], rel=1e-9, abs=1e-9)


def test_select_aggregator():
    assert select_aggregator([cand("a", 0.5), cand("b", 0.8), cand("c", 0.7)]) == "b"
    assert select_aggregator([cand("a", 0.6, 0.3), cand("b", 0.6, 0.8)]) == "b"
    assert select_aggregator([cand("b", 0.6, 0.8), cand("a", 0.6, 0.8)]) == "a"
    with pytest.raises(ValueError):
        select_aggregator([])


def test_select_aggregator_permutation_invariant():
    rng = random.Random(3)
    cands = [cand(f"n{i}", rng.choice([0.4, 0.5, 0.6]), rng.choice([0.2, 0.8])) for i in range(6)]
    first = select_aggregator(cands)
    for perm in itertools.permutations(cands):
        assert select_aggregator(list(perm)) == first
