import json

import numpy as np
import pytest

from trustfl.chain import ZERO_DIGEST, ChainError, merkle_root
from trustfl.coordinator import Coordinator, hash_ids, leaves_from_report, model_from_bytes
from trustfl.nodes import FreeRider, Honest, SignFlip, generate_task
from trustfl.policy import NodeStatus
from trustfl.trust import MetricVector, TrustParams, TrustWeights, blend_score


def make(behaviors, seed=3, d=3, **kw):
    task = generate_task(seed, d, sorted(behaviors), 60)
    return Coordinator(task, behaviors, {nid: 100.0 for nid in behaviors}, seed=seed, **kw)


def mixed():
    beh = {f"h{i}": Honest(0.1) for i in range(5)}
    beh.update(s0=SignFlip(0.1), f0=FreeRider())
    return beh


def test_stall_round_with_no_admissions():
    c = make({"a": Honest(), "b": Honest()})
    for nid in c.node_ids:
        c.status[nid] = NodeStatus.suspended(4)
    model = c.model.copy()
    res = c.run_round()
    assert res.report["admitted"] == [] and res.report["payouts"] == {}
    assert res.report["withheld"] == res.report["budget"] == 100_000_000
    assert res.digest == ZERO_DIGEST
    assert np.array_equal(c.model, model)
    assert c.contract.state.balances == {"a": 0, "b": 0}


def test_single_node_trace():
    c = make({"solo": Honest(0.1)})
    res = c.run_round()
    rep = res.report
    assert rep["accepted"] == [{"node_id": "solo", "weight": 400_000}]
    assert rep["payouts"] == {"solo": 100_000_000} and rep["withheld"] == 0
    assert c.contract.state.balances["solo"] == 100_000_000
    # lone submitter: accuracy 1, quality 1, consistency 0.5 -> 0.65, frequency 1
    blend = blend_score(TrustWeights(), MetricVector(1.0, 0.65, 1.0, 1.0))
    assert c.trust["solo"].trust == pytest.approx(0.5 * 0.40 + 0.5 * blend, abs=1e-6)
    assert rep["nodes"]["solo"]["trust_after"] == round(c.trust["solo"].trust * 1e6)
    assert res.validation_loss < validation_at_zero(c)


def validation_at_zero(c):
    return float(np.mean(c.task.validation.targets ** 2))


def test_round_is_deterministic():
    a, b = make(mixed()), make(mixed())
    for _ in range(6):
        ra, rb = a.run_round(), b.run_round()
        assert (ra.cid_model, ra.cid_report, ra.digest) == (rb.cid_model, rb.cid_report, rb.digest)
    assert a.contract.event_lines() == b.contract.event_lines()


def test_headers_and_report_consistency():
    c = make(mixed())
    prev = (None, None)
    for r in range(6):
        res = c.run_round()
        h, rep = res.header, res.report
        assert (h["prior_cid_model"], h["prior_cid_report"]) == prev
        assert h["admission_hash"] == hash_ids(rep["admitted"])
        assert rep["header_cid"] == res.header_cid
        assert json.loads(c.store.get(res.cid_report)) == rep
        assert np.array_equal(model_from_bytes(c.store.get(res.cid_model)), c.model)
        acc = [a["node_id"] for a in rep["accepted"]]
        assert set(acc) <= set(rep["submitted"]) <= set(rep["admitted"])
        for a in rep["accepted"]:
            assert a["weight"] == rep["nodes"][a["node_id"]]["trust_before"]
        assert res.digest == merkle_root(leaves_from_report(rep))
        assert c.contract.state.rounds[r].digest == res.digest
        prev = (res.cid_model, res.cid_report)


def test_header_does_not_mutate_state():
    c = make(mixed())
    c.run_round()
    h1, adm1 = c.publish_round_header(1)
    h2, adm2 = c.publish_round_header(1)
    assert h1 == h2 and adm1 == adm2


def test_rollback_on_chain_error(monkeypatch):
    c = make(mixed())
    c.run_round()
    trust = {k: v.trust for k, v in c.trust.items()}
    model, events, blobs = c.model.copy(), list(c.contract.event_lines()), dict(c.store._blobs)

    def boom(*a, **k):
        raise ChainError("injected")

    monkeypatch.setattr(c.contract, "finalize_round", boom)
    with pytest.raises(ChainError):
        c.run_round()
    assert {k: v.trust for k, v in c.trust.items()} == trust
    assert np.array_equal(c.model, model)
    assert c.contract.event_lines() == events and c.store._blobs == blobs
    assert c.next_round == 1 and len(c.results) == 1
    monkeypatch.undo()
    assert c.run_round().round_id == 1


def test_attackers_get_nothing():
    c = make(mixed())
    for _ in range(5):
        rep = c.run_round().report
        assert "s0" not in rep["payouts"] and "f0" not in rep["payouts"]
        assert sum(rep["payouts"].values()) + rep["withheld"] == rep["budget"]


def test_inactive_trust_decays():
    c = make({"a": Honest(), "b": Honest()}, params=TrustParams(decay_rate=0.1))
    c.status["b"] = NodeStatus.suspended(1)
    c.run_round()
    c.run_round()
    # registration counts as activity at round 0, so one idle round has elapsed
    assert c.trust["b"].trust == pytest.approx(0.40 * np.exp(-0.1), abs=1e-12)
    assert c.trust["b"].last_active_round == 0
