"""Deterministic policy decisions: admission, screening, strikes, payouts.

The defaults of :class:`PolicyConfig` are the reference profile
(admit 0.40, probation 0.25, cadence 2, suspension 2, quality 0.20,
probation payout cap 0.5, 2 strikes in 5 rounds, slash 10%, rehab cap
0.60 for 5 rounds). Every ordering falls back to ascending node id so
results are total and reproducible.
"""

import math
from dataclasses import dataclass, field

ACTIVE = "active"
PROBATION = "probation"
SUSPENDED = "suspended"

AGG_METHODS = ("median", "trimmed_mean", "mean")


class PolicyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    admit_threshold: float = 0.40
    probation_threshold: float = 0.25
    probation_cadence: int = 2
    suspension_rounds: int = 2
    quality_threshold: float = 0.20
    probation_payout_cap: float = 0.5
    strikes_to_slash: int = 2
    strike_window: int = 5
    slash_fraction: float = 0.10
    rehab_trust_cap: float = 0.60
    rehab_rounds: int = 5
    max_participants: int = 100
    round_budget: float = 100.0
    trim_fraction: float = 0.1
    agg_method: str = "median"
    # ablation switch; the protocol always screens
    screening: bool = True

    def __post_init__(self):
        if not 0.0 <= self.probation_threshold < self.admit_threshold <= 1.0:
            raise PolicyConfigError("need 0 <= probation_threshold < admit_threshold <= 1")
        for name in ("probation_cadence", "suspension_rounds", "strikes_to_slash",
                     "strike_window", "rehab_rounds", "max_participants"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise PolicyConfigError(f"{name} must be an integer >= 1")
        for name in ("probation_payout_cap", "slash_fraction", "trim_fraction"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise PolicyConfigError(f"{name} must be in [0, 1)")
        if self.trim_fraction >= 0.5:
            raise PolicyConfigError("trim_fraction must be below 0.5")
        if not 0.0 <= self.quality_threshold <= 1.0:
            raise PolicyConfigError("quality_threshold must be in [0, 1]")
        if not 0.0 < self.rehab_trust_cap <= 1.0:
            raise PolicyConfigError("rehab_trust_cap must be in (0, 1]")
        if self.round_budget < 0:
            raise PolicyConfigError("round_budget must be >= 0")
        if self.agg_method not in AGG_METHODS:
            raise PolicyConfigError(f"agg_method must be one of {AGG_METHODS}")


@dataclass(frozen=True)
class NodeStatus:
    kind: str
    last_admitted_round: int | None = None
    until_round: int | None = None

    @classmethod
    def active(cls, last_admitted_round=None):
        return cls(ACTIVE, last_admitted_round)

    @classmethod
    def probation(cls, last_admitted_round=None):
        return cls(PROBATION, last_admitted_round)

    @classmethod
    def suspended(cls, until_round, last_admitted_round=None):
        return cls(SUSPENDED, last_admitted_round, until_round)


def classify_status(trust: float, config: PolicyConfig) -> str:
    if trust >= config.admit_threshold:
        return ACTIVE
    if trust >= config.probation_threshold:
        return PROBATION
    return SUSPENDED


def next_status(prev: NodeStatus, trust: float, round_id: int, config: PolicyConfig,
                slashed: bool = False) -> NodeStatus:
    """Status for the round after ``round_id`` given post-update trust.

    A running suspension is served in full; when it ends the node moves to
    probation regardless of trust. A fresh suspension (low trust or slash)
    runs for ``suspension_rounds`` rounds after ``round_id`` and replaces a
    shorter remaining one.
    """
    last = prev.last_admitted_round
    fresh_until = round_id + config.suspension_rounds
    serving = prev.kind == SUSPENDED and prev.until_round is not None and prev.until_round > round_id
    if slashed:
        until = max(fresh_until, prev.until_round) if serving else fresh_until
        return NodeStatus.suspended(until, last)
    if serving:
        return prev
    if prev.kind == SUSPENDED:
        return NodeStatus.probation(last)
    kind = classify_status(trust, config)
    if kind == SUSPENDED:
        return NodeStatus.suspended(fresh_until, last)
    return NodeStatus(kind, last)


@dataclass
class StrikeLedger:
    """Failed screenings per node.

    ``history`` keeps every strike (used for tie-breaks); ``pending`` holds
    strikes not yet consumed by a slash.
    """

    history: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)

    def record(self, node_id: str, round_id: int):
        hist = self.history.setdefault(node_id, [])
        if hist and round_id <= hist[-1]:
            raise ValueError(f"strike rounds for {node_id} must be strictly increasing")
        hist.append(round_id)
        self.pending.setdefault(node_id, []).append(round_id)

    def recent(self, node_id: str, round_id: int, window: int) -> int:
        return sum(1 for r in self.history.get(node_id, ()) if round_id - window < r <= round_id)

    def total(self, node_id: str) -> int:
        return len(self.history.get(node_id, ()))


@dataclass(frozen=True)
class SlashDecision:
    fraction: float
    suspend_rounds: int
    cap_value: float
    cap_rounds: int


def register_strike_and_check(ledger: StrikeLedger, node_id: str, round_id: int,
                              config: PolicyConfig) -> SlashDecision | None:
    ledger.record(node_id, round_id)
    pending = ledger.pending[node_id]
    in_window = [r for r in pending if round_id - config.strike_window < r <= round_id]
    if len(in_window) < config.strikes_to_slash:
        return None
    # strikes are consumed by the slash they trigger
    ledger.pending[node_id] = []
    return SlashDecision(config.slash_fraction, config.suspension_rounds,
                         config.rehab_trust_cap, config.rehab_rounds)


@dataclass(frozen=True)
class Candidate:
    """A node as seen by admission and aggregator election."""

    node_id: str
    trust: float
    consistency: float
    status: NodeStatus
    recent_strikes: int = 0


def is_eligible(c: Candidate, round_id: int, config: PolicyConfig) -> bool:
    st = c.status
    if st.kind == ACTIVE:
        return True
    if st.kind == PROBATION:
        last = st.last_admitted_round
        return last is None or round_id - last >= config.probation_cadence
    return st.until_round is not None and st.until_round < round_id


def form_admission_set(candidates, round_id: int, config: PolicyConfig) -> list:
    """Node ids admitted to ``round_id``, highest priority first."""
    eligible = [c for c in candidates if is_eligible(c, round_id, config)]
    eligible.sort(key=lambda c: (-c.trust, -c.consistency, c.recent_strikes, c.node_id))
    return [c.node_id for c in eligible[:config.max_participants]]


def screen_update(gain: float, quality: float, config: PolicyConfig) -> bool:
    return gain >= 0.0 and quality >= config.quality_threshold


@dataclass(frozen=True)
class Claim:
    """An accepted update's claim on the round budget."""

    node_id: str
    accuracy: float
    trust: float
    on_probation: bool = False

    @property
    def utility(self) -> float:
        return self.accuracy * self.trust


def compute_payouts(claims, budget: float, probation_cap: float) -> dict:
    """Split ``budget`` among accepted updates by utility = accuracy * trust.

    Probation nodes keep at most ``probation_cap`` of their share; the
    excess goes to the other claimants by utility, or is withheld if there
    are none. Returns token amounts; anything not paid out is withheld.
    """
    claims = sorted(claims, key=lambda c: c.node_id)
    if not claims:
        return {}
    total_u = sum(c.utility for c in claims)
    if total_u <= 0:
        return {c.node_id: 0.0 for c in claims}
    raw = {c.node_id: budget * (c.utility / total_u) for c in claims}
    out = dict(raw)
    excess = 0.0
    for c in claims:
        if c.on_probation:
            out[c.node_id] = probation_cap * raw[c.node_id]
            excess += raw[c.node_id] - out[c.node_id]
    full = [c for c in claims if not c.on_probation]
    full_u = sum(c.utility for c in full)
    if excess > 0 and full_u > 0:
        for c in full:
            out[c.node_id] += excess * (c.utility / full_u)
    over = _total(out) - budget
    if over > 0:
        # float rounding only; take it off the largest payout
        top = max(out, key=lambda k: (out[k], k))
        out[top] = max(0.0, out[top] - over)
        while _total(out) > budget:
            out[top] = math.nextafter(out[top], 0.0)
    return out


def _total(payouts: dict) -> float:
    # naive and exact summation can differ in the last ulp; bound both
    vals = list(payouts.values())
    return max(math.fsum(vals), sum(vals))


def select_aggregator(candidates) -> str:
    if not candidates:
        raise ValueError("empty cluster")
    best = min(candidates, key=lambda c: (-c.trust, -c.consistency, c.node_id))
    return best.node_id
