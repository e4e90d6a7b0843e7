"""Off-chain coordinator running one training round end to end.

Round sequence: publish header -> admit -> collect updates -> screen ->
strikes -> trust update -> aggregate -> elect next aggregator -> publish
model and report -> finalize on chain -> distribute rewards.

Every real-valued quantity written to a header or report is in integer
micro-units so the bytes (and hence CIDs and digests) are reproducible.
"""

import copy
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import evaluation as ev
from .aggregation import OpCounter, WeightedUpdate, aggregate_round
from .canonical import canonical_json, scale_micro, sha256_hex, to_micro
from .chain import ChainError, Contract, DigestLeaf
from .nodes import keyed_rng, local_update
from .policy import (ACTIVE, PROBATION, SUSPENDED, Candidate, Claim, NodeStatus, PolicyConfig,
                     StrikeLedger, compute_payouts, form_admission_set, next_status,
                     register_strike_and_check, screen_update, select_aggregator)
from .store import ContentStore
from .trust import MetricVector, TrustParams, TrustWeights, impose_cap, new_state, update_trust


def policy_snapshot(policy: PolicyConfig) -> dict:
    out = {}
    for k, v in asdict(policy).items():
        out[k] = to_micro(v) if isinstance(v, float) else v
    return out


def hash_ids(ids) -> str:
    return sha256_hex(canonical_json(list(ids)))


def model_bytes(model) -> bytes:
    return np.ascontiguousarray(model, dtype="<f8").tobytes()


def model_from_bytes(data: bytes) -> np.ndarray:
    return np.frombuffer(data, dtype="<f8").copy()


@dataclass
class Screening:
    """Per-round evaluation of the submitted updates."""

    gains: dict
    accuracy: dict
    quality: dict
    accepted: dict


def screen_submissions(global_model, submissions: dict, valset, policy: PolicyConfig,
                       counter: OpCounter | None = None) -> Screening:
    """Metrics and accept/reject for every submission, in node-id order."""
    order = sorted(submissions)
    if not order:
        return Screening({}, {}, {}, {})
    gains = {nid: ev.raw_gain(global_model, submissions[nid], valset) for nid in order}
    accuracy = ev.normalize_accuracy(gains)
    ref = ev.reference_direction([submissions[nid] for nid in order])
    quality = {nid: ev.data_quality(submissions[nid], ref) for nid in order}
    accepted = {}
    for nid in order:
        if counter is not None:
            counter.comparisons += 2
        accepted[nid] = screen_update(gains[nid], quality[nid], policy) if policy.screening else True
    return Screening(gains, accuracy, quality, accepted)


@dataclass
class RoundResult:
    round_id: int
    header: dict
    report: dict
    header_cid: str
    cid_model: str
    cid_report: str
    digest: bytes
    validation_loss: float
    leaves: list

    def summary(self) -> dict:
        rep = self.report
        return {
            "round_id": self.round_id,
            "validation_loss": self.validation_loss,
            "admitted": len(rep["admitted"]),
            "submitted": len(rep["submitted"]),
            "accepted": len(rep["accepted"]),
            "strikes": len(rep["strikes"]),
            "slashes": len(rep["slashes"]),
            "payouts": sum(rep["payouts"].values()),
            "withheld": rep["withheld"],
            "trust": {nid: m["trust_after"] for nid, m in rep["nodes"].items()},
        }


class Coordinator:
    """Owns all mutable simulation state; one instance per scenario."""

    def __init__(self, task, behaviors: dict, stakes: dict, seed: int = 0,
                 policy: PolicyConfig | None = None, params: TrustParams | None = None,
                 weights: TrustWeights | None = None, pubkeys: dict | None = None):
        self.task = task
        self.behaviors = dict(behaviors)
        self.seed = seed
        self.policy = policy or PolicyConfig()
        self.params = params or TrustParams()
        self.weights = weights or TrustWeights()
        self.store = ContentStore()
        self.contract = Contract()
        self.node_ids = sorted(self.behaviors)
        missing = [nid for nid in self.node_ids if nid not in task.local]
        if missing:
            raise ValueError(f"no local data for nodes {missing}")
        pubkeys = pubkeys or {}
        for nid in self.node_ids:
            self.contract.register_node(nid, pubkeys.get(nid, nid.encode("utf-8")), to_micro(stakes[nid]))
        self.trust = {nid: new_state(nid, 0) for nid in self.node_ids}
        self.status = {nid: NodeStatus.active() for nid in self.node_ids}
        self.strikes = StrikeLedger()
        self.model = np.zeros(task.dim)
        self.prior_cids = (None, None)
        self.next_round = 0
        self.aggregator = self._elect(0)
        self.results: list[RoundResult] = []

    # -- views -----------------------------------------------------------------

    def candidates(self, round_id: int) -> list:
        return [Candidate(nid, self.trust[nid].trust, self.trust[nid].consistency, self.status[nid],
                          self.strikes.recent(nid, round_id, self.policy.strike_window))
                for nid in self.node_ids]

    def partitions(self) -> dict:
        parts = {ACTIVE: [], PROBATION: [], SUSPENDED: []}
        for nid in self.node_ids:
            parts[self.status[nid].kind].append(nid)
        return parts

    def _elect(self, round_id: int) -> str:
        cands = self.candidates(round_id)
        cluster = [c for c in cands if c.status.kind != SUSPENDED] or cands
        return select_aggregator(cluster)

    def validation_loss(self) -> float:
        return ev.validation_loss(self.model, self.task.validation)

    # -- round steps -------------------------------------------------------------

    def publish_round_header(self, round_id: int) -> tuple:
        """Header dict and the admission list it commits to."""
        admitted = form_admission_set(self.candidates(round_id), round_id, self.policy)
        parts = self.partitions()
        header = {
            "round_id": round_id,
            "policy_hash": sha256_hex(canonical_json(policy_snapshot(self.policy))),
            "admission_hash": hash_ids(admitted),
            "partition_hashes": {k: hash_ids(v) for k, v in parts.items()},
            "prior_cid_model": self.prior_cids[0],
            "prior_cid_report": self.prior_cids[1],
            "aggregator": self.aggregator,
        }
        return header, admitted

    def collect(self, admitted, round_id: int) -> dict:
        subs = {}
        for nid in sorted(admitted):
            rng = keyed_rng(self.seed, "update", nid, round_id)
            upd = local_update(self.behaviors[nid], self.model, self.task.local[nid], round_id, rng)
            if upd is not None:
                subs[nid] = np.asarray(upd, dtype=float)
        return subs

    def _snapshot(self):
        return (copy.deepcopy((self.trust, self.status, self.strikes, self.prior_cids,
                               self.aggregator, self.next_round)),
                self.model.copy(), self.contract.snapshot(), dict(self.store._blobs))

    def _restore(self, snap):
        (self.trust, self.status, self.strikes, self.prior_cids, self.aggregator,
         self.next_round), self.model, chain_state, blobs = snap
        self.contract.restore(chain_state)
        self.store._blobs = blobs

    def run_round(self, counter: OpCounter | None = None) -> RoundResult:
        """Execute the next round; on a chain failure all state rolls back."""
        snap = self._snapshot()
        try:
            result = self._run_round(self.next_round, counter)
        except ChainError:
            self._restore(snap)
            raise
        self.results.append(result)
        self.next_round += 1
        return result

    def _run_round(self, r: int, counter) -> RoundResult:
        policy, params = self.policy, self.params
        header, admitted = self.publish_round_header(r)
        header_cid = self.store.put(canonical_json(header))
        admitted_set = set(admitted)
        start_status = dict(self.status)
        for nid in admitted:
            st = self.status[nid]
            self.status[nid] = replace(st, last_admitted_round=r)

        subs = self.collect(admitted, r)
        scr = screen_submissions(self.model, subs, self.task.validation, policy, counter)

        rejected = [nid for nid in sorted(subs) if not scr.accepted[nid]]
        slash_decisions = {}
        for nid in rejected:
            decision = register_strike_and_check(self.strikes, nid, r, policy)
            if decision is not None:
                slash_decisions[nid] = decision

        before = {nid: self.trust[nid].trust for nid in self.node_ids}
        for nid in self.node_ids:
            self.trust[nid] = self._update_node(self.trust[nid], nid in admitted_set, nid in subs,
                                                scr, nid, r)

        accepted = [nid for nid in sorted(subs) if scr.accepted[nid]]
        weighted = [WeightedUpdate(nid, subs[nid], before[nid]) for nid in accepted]
        self.model = aggregate_round(self.model, weighted, policy.agg_method,
                                     policy.trim_fraction, counter)

        budget = to_micro(policy.round_budget)
        claims = [Claim(nid, scr.accuracy[nid], before[nid], start_status[nid].kind == PROBATION)
                  for nid in accepted]
        payouts = self._to_micro_payouts(compute_payouts(claims, policy.round_budget,
                                                         policy.probation_payout_cap), budget)
        slashes = {}
        for nid, dec in sorted(slash_decisions.items()):
            stake = self.contract.state.stakes[nid]
            slashes[nid] = min(stake, scale_micro(stake, dec.fraction))

        for nid in self.node_ids:
            dec = slash_decisions.get(nid)
            if dec is not None:
                self.trust[nid] = impose_cap(self.trust[nid], dec.cap_value, r + dec.cap_rounds, r,
                                             params.t_max)
            self.status[nid] = next_status(self.status[nid], self.trust[nid].trust, r, policy,
                                           slashed=dec is not None)
        current_aggregator = self.aggregator
        self.aggregator = self._elect(r + 1)

        report = {
            "round_id": r,
            "header_cid": header_cid,
            "aggregator": current_aggregator,
            "next_aggregator": self.aggregator,
            "agg_method": policy.agg_method,
            "admitted": admitted,
            "submitted": sorted(subs),
            "accepted": [{"node_id": nid, "weight": to_micro(before[nid])} for nid in accepted],
            "strikes": rejected,
            "payouts": payouts,
            "slashes": slashes,
            "budget": budget,
            "withheld": budget - sum(payouts.values()),
            "nodes": {nid: self._node_entry(nid, before[nid], scr, start_status[nid], r)
                      for nid in self.node_ids},
        }
        cid_model = self.store.put(model_bytes(self.model))
        cid_report = self.store.put(canonical_json(report))
        leaves = leaves_from_report(report)
        digest = self.contract.finalize_round(r, cid_model, cid_report, leaves)
        self.contract.distribute_rewards(r)
        self.prior_cids = (cid_model, cid_report)
        return RoundResult(r, header, report, header_cid, cid_model, cid_report, digest,
                           self.validation_loss(), leaves)

    def _update_node(self, state, eligible: bool, submitted: bool, scr: Screening, nid: str, r: int):
        params = self.params
        history = (state.history + ((eligible, submitted),))[-params.freq_window:]
        freq = ev.update_frequency(history, params.freq_window, previous=state.frequency)
        state = replace(state, history=history, frequency=freq)
        if not submitted:
            return update_trust(state, None, self.weights, params, r)
        acc = scr.accuracy[nid]
        cons = ev.update_consistency(state.consistency, scr.accepted[nid], params.consistency_smoothing)
        improvement = ev.recovery_signal(acc, state.accuracy_history)
        state = replace(state, consistency=cons,
                        accuracy_history=(state.accuracy_history + (acc,))[-ev.RECOVERY_LOOKBACK:])
        metrics = MetricVector(acc, cons, scr.quality[nid], freq)
        return update_trust(state, metrics, self.weights, params, r, improvement)

    def _node_entry(self, nid, trust_before, scr: Screening, status: NodeStatus, r: int) -> dict:
        st = self.trust[nid]
        sub = nid in scr.accuracy
        capped = st.capped_at(r + 1)
        return {
            "accuracy": to_micro(scr.accuracy[nid]) if sub else None,
            "data_quality": to_micro(scr.quality[nid]) if sub else None,
            "consistency": to_micro(st.consistency),
            "frequency": to_micro(st.frequency),
            "trust_before": to_micro(trust_before),
            "trust_after": to_micro(st.trust),
            "status": status.kind,
            "status_next": self.status[nid].kind,
            "trust_cap": to_micro(st.cap_value) if capped else None,
            "cap_until": st.cap_until if capped else None,
        }

    @staticmethod
    def _to_micro_payouts(payouts: dict, budget: int) -> dict:
        out = {nid: to_micro(v) for nid, v in sorted(payouts.items())}
        over = sum(out.values()) - budget
        # half-even rounding can overshoot the budget by a few micro-units
        while over > 0:
            top = max(out, key=lambda k: (out[k], k))
            take = min(over, out[top])
            out[top] -= take
            over -= take
        return out


def leaves_from_report(report: dict) -> list:
    """Digest leaves (accepted contributors and slashed nodes) in node-id order."""
    ids = {a["node_id"] for a in report["accepted"]} | set(report["slashes"])
    leaves = []
    for nid in sorted(ids):
        amount = report["slashes"].get(nid, 0)
        leaves.append(DigestLeaf(nid, report["payouts"].get(nid, 0), amount > 0, amount))
    return leaves
