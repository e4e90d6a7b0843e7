"""On-chain contract state machine: stake escrow, round finalization, rewards, slashing.

All amounts are integer micro-tokens. Every mutation is expressed as an
event and applied through one code path, so replaying the event log from
genesis rebuilds the exact state. Slashed stake moves to a treasury account.
"""

import copy
import hashlib
import json
import struct
from dataclasses import dataclass, field

from .canonical import canonical_json
from .store import is_cid

ZERO_DIGEST = bytes(32)


class ChainError(RuntimeError):
    pass


@dataclass(frozen=True)
class DigestLeaf:
    node_id: str
    payout: int
    slash_flag: bool = False
    slash_amount: int = 0

    def __post_init__(self):
        if self.payout < 0 or self.slash_amount < 0:
            raise ValueError("leaf amounts must be non-negative")
        if (self.slash_amount > 0) != bool(self.slash_flag):
            raise ValueError("slash_amount > 0 iff slash_flag")

    def encode(self) -> bytes:
        nid = self.node_id.encode("utf-8")
        return (struct.pack(">I", len(nid)) + nid
                + struct.pack(">QBQ", self.payout, 1 if self.slash_flag else 0, self.slash_amount))

    def to_list(self) -> list:
        return [self.node_id, self.payout, self.slash_amount]

    @classmethod
    def from_list(cls, row) -> "DigestLeaf":
        node_id, payout, slash_amount = row
        return cls(node_id, payout, slash_amount > 0, slash_amount)


def _h(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def merkle_root(leaves) -> bytes:
    """Binary SHA-256 Merkle root over leaves sorted by node id.

    An odd level pairs its last hash with itself; no leaves gives 32 zero bytes.
    """
    leaves = list(leaves)
    ids = [lf.node_id for lf in leaves]
    if any(a >= b for a, b in zip(ids, ids[1:])):
        raise ValueError("leaves must be strictly sorted by node_id")
    if not leaves:
        return ZERO_DIGEST
    level = [_h(lf.encode()) for lf in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [_h(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def finalize_payload(round_id: int, cid_model: str, cid_report: str, digest: bytes) -> bytes:
    """Canonical bytes of the commitment a finalization call carries."""
    return canonical_json({"round_id": round_id, "cid_model": cid_model,
                           "cid_report": cid_report, "digest": digest.hex()})


@dataclass(frozen=True)
class RoundRecord:
    round_id: int
    cid_model: str
    cid_report: str
    digest: bytes


@dataclass
class ContractState:
    stakes: dict = field(default_factory=dict)
    balances: dict = field(default_factory=dict)
    pubkeys: dict = field(default_factory=dict)
    rounds: dict = field(default_factory=dict)
    leaves: dict = field(default_factory=dict)
    distributed: set = field(default_factory=set)
    treasury: int = 0
    staked_total: int = 0
    minted: int = 0
    events: list = field(default_factory=list)

    def conserved(self) -> bool:
        held = sum(self.balances.values()) + sum(self.stakes.values()) + self.treasury
        return held == self.staked_total + self.minted


class Contract:
    """Single-writer contract. Calls either fully apply or raise ChainError and change nothing."""

    def __init__(self):
        self.state = ContractState()

    # -- public calls -------------------------------------------------------

    def register_node(self, node_id: str, pubkey: bytes, stake: int):
        if node_id in self.state.stakes:
            raise ChainError(f"node {node_id!r} already registered")
        if int(stake) != stake or stake <= 0:
            raise ChainError("stake must be a positive integer amount")
        self._emit({"type": "Registered", "node_id": node_id,
                    "pubkey": bytes(pubkey).hex(), "stake": int(stake)})

    def finalize_round(self, round_id: int, cid_model: str, cid_report: str, leaves):
        st = self.state
        leaves = list(leaves)
        if round_id in st.rounds:
            raise ChainError(f"round {round_id} already finalized")
        if not (is_cid(cid_model) and is_cid(cid_report)):
            raise ChainError("malformed CID")
        for lf in leaves:
            if lf.node_id not in st.stakes:
                raise ChainError(f"unknown node {lf.node_id!r} in round {round_id}")
            if lf.slash_amount > st.stakes[lf.node_id]:
                raise ChainError(f"slash of {lf.node_id!r} exceeds its stake")
        try:
            digest = merkle_root(leaves)
        except ValueError as exc:
            raise ChainError(str(exc)) from None
        # slashing executes inside finalization, before the round record
        for lf in leaves:
            if lf.slash_flag:
                self._emit({"type": "Slashed", "round_id": round_id,
                            "node_id": lf.node_id, "amount": lf.slash_amount})
        self._emit({"type": "RoundFinalized", "round_id": round_id, "cid_model": cid_model,
                    "cid_report": cid_report, "digest": digest.hex(),
                    "leaves": [lf.to_list() for lf in leaves]})
        return digest

    def distribute_rewards(self, round_id: int):
        st = self.state
        if round_id not in st.rounds:
            raise ChainError(f"round {round_id} not finalized")
        if round_id in st.distributed:
            raise ChainError(f"round {round_id} already distributed")
        credits = [[lf.node_id, lf.payout] for lf in st.leaves[round_id] if lf.payout > 0]
        self._emit({"type": "Distributed", "round_id": round_id, "credits": credits})

    # -- event application ---------------------------------------------------

    def _emit(self, body: dict):
        event = dict(body, seq=len(self.state.events))
        apply_event(self.state, event)

    def snapshot(self) -> ContractState:
        return copy.deepcopy(self.state)

    def restore(self, snap: ContractState):
        self.state = snap

    def event_lines(self) -> list:
        return [canonical_json(e).decode("utf-8") for e in self.state.events]

    def export_jsonl(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.event_lines():
                fh.write(line + "\n")


def apply_event(st: ContractState, event: dict):
    kind = event["type"]
    if event["seq"] != len(st.events):
        raise ChainError("event sequence gap")
    if kind == "Registered":
        nid = event["node_id"]
        st.stakes[nid] = event["stake"]
        st.balances[nid] = 0
        st.pubkeys[nid] = bytes.fromhex(event["pubkey"])
        st.staked_total += event["stake"]
    elif kind == "Slashed":
        nid, amount = event["node_id"], event["amount"]
        if amount > st.stakes[nid]:
            raise ChainError("slash exceeds stake")
        st.stakes[nid] -= amount
        st.treasury += amount
    elif kind == "RoundFinalized":
        rid = event["round_id"]
        st.rounds[rid] = RoundRecord(rid, event["cid_model"], event["cid_report"],
                                     bytes.fromhex(event["digest"]))
        st.leaves[rid] = tuple(DigestLeaf.from_list(row) for row in event["leaves"])
    elif kind == "Distributed":
        for nid, amount in event["credits"]:
            st.balances[nid] += amount
            st.minted += amount
        st.distributed.add(event["round_id"])
    else:
        raise ChainError(f"unknown event type {kind!r}")
    st.events.append(event)


def replay(events) -> ContractState:
    st = ContractState()
    for event in events:
        apply_event(st, dict(event))
    return st


def read_jsonl(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
