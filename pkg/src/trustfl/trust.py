"""Per-node trust scores: metric blending, inactivity decay and bounded recovery.

Everything here is a pure function over frozen value types. A round's update
for an active node is

    T <- (1 - smoothing) * T + smoothing * blend(A, C, D, U)
    T <- T + recovery_rate * (t_max - T) * improvement      (if improvement > 0)
    T <- min(T, cap_value)                                    (while capped)

and for an inactive node ``T <- T * exp(-decay_rate * rounds_idle)``.
"""

import math
from dataclasses import dataclass, replace

WEIGHT_SUM_TOL = 1e-12
INITIAL_TRUST = 0.40


class TrustConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrustWeights:
    accuracy: float = 0.4
    consistency: float = 0.3
    data_quality: float = 0.2
    frequency: float = 0.1

    def __post_init__(self):
        ws = self.as_tuple()
        if any(not math.isfinite(w) or w < 0 for w in ws):
            raise TrustConfigError(f"trust weights must be non-negative, got {ws}")
        if abs(sum(ws) - 1.0) > WEIGHT_SUM_TOL:
            raise TrustConfigError(f"trust weights must sum to 1, got {sum(ws)!r}")

    def as_tuple(self) -> tuple:
        return (self.accuracy, self.consistency, self.data_quality, self.frequency)


@dataclass(frozen=True)
class MetricVector:
    accuracy: float
    consistency: float
    data_quality: float
    frequency: float

    def __post_init__(self):
        for name in ("accuracy", "consistency", "data_quality", "frequency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"metric {name}={v!r} outside [0, 1]")


@dataclass(frozen=True)
class TrustParams:
    decay_rate: float = 0.05
    recovery_rate: float = 0.2
    t_max: float = 1.0
    smoothing: float = 0.5
    consistency_smoothing: float = 0.3
    freq_window: int = 10

    def __post_init__(self):
        if self.decay_rate < 0:
            raise TrustConfigError("decay_rate must be >= 0")
        if not 0.0 <= self.recovery_rate <= 1.0:
            raise TrustConfigError("recovery_rate must be in [0, 1]")
        if not 0.0 < self.t_max <= 1.0:
            raise TrustConfigError("t_max must be in (0, 1]")
        if not 0.0 <= self.smoothing <= 1.0:
            raise TrustConfigError("smoothing must be in [0, 1]")
        if not 0.0 <= self.consistency_smoothing <= 1.0:
            raise TrustConfigError("consistency_smoothing must be in [0, 1]")
        if int(self.freq_window) != self.freq_window or self.freq_window < 1:
            raise TrustConfigError("freq_window must be an integer >= 1")


@dataclass(frozen=True)
class TrustState:
    """Trust bookkeeping for one node.

    ``decayed_to`` is the round through which inactivity decay has already
    been folded into ``trust``; it lets decay be applied round by round
    without compounding. ``history`` holds ``(eligible, submitted)`` flags,
    ``accuracy_history`` the node's accuracy metric for rounds it submitted.
    """

    node_id: str
    trust: float = INITIAL_TRUST
    last_active_round: int = 0
    decayed_to: int = 0
    consistency: float = 0.5
    frequency: float = 1.0
    history: tuple = ()
    accuracy_history: tuple = ()
    cap_until: int | None = None
    cap_value: float = 1.0

    def capped_at(self, round_id: int) -> bool:
        return self.cap_until is not None and self.cap_until >= round_id


def new_state(node_id: str, round_id: int = 0, trust: float = INITIAL_TRUST) -> TrustState:
    return TrustState(node_id=node_id, trust=trust, last_active_round=round_id, decayed_to=round_id)


def blend_score(weights: TrustWeights, metrics: MetricVector) -> float:
    a, b, g, d = weights.as_tuple()
    t = (a * metrics.accuracy + b * metrics.consistency
         + g * metrics.data_quality + d * metrics.frequency)
    # convex combination; clip the last-ulp excursions
    return min(1.0, max(0.0, t))


def decay_factor(decay_rate: float, rounds: int) -> float:
    return math.exp(-decay_rate * rounds)


def apply_decay(state: TrustState, current_round: int, decay_rate: float) -> TrustState:
    """Exponential decay for the rounds elapsed since the last activity.

    Rounds already decayed (``decayed_to``) are not charged twice, so
    applying this every idle round gives the same result as one call
    at the end of the idle stretch.
    """
    if current_round < state.last_active_round:
        raise ValueError("current_round precedes last activity")
    anchor = max(state.last_active_round, state.decayed_to)
    elapsed = current_round - anchor
    if elapsed <= 0:
        return state
    return replace(state, trust=state.trust * decay_factor(decay_rate, elapsed),
                   decayed_to=current_round)


def apply_recovery(state: TrustState, improvement: float, recovery_rate: float, t_max: float) -> TrustState:
    if not 0.0 <= improvement <= 1.0:
        raise ValueError(f"improvement {improvement!r} outside [0, 1]")
    t = state.trust + recovery_rate * (t_max - state.trust) * improvement
    return replace(state, trust=min(t, t_max))


def clamp_trust(state: TrustState, current_round: int, t_max: float) -> TrustState:
    t = min(max(state.trust, 0.0), t_max)
    if state.capped_at(current_round):
        t = min(t, state.cap_value)
    return state if t == state.trust else replace(state, trust=t)


def update_trust(state: TrustState, metrics: MetricVector | None, weights: TrustWeights,
                 params: TrustParams, current_round: int, improvement: float = 0.0) -> TrustState:
    """One round of trust evolution.

    ``metrics`` is None for a node that did not submit this round; then only
    decay applies. ``improvement`` is the recovery signal from
    :func:`trustfl.evaluation.recovery_signal`.
    """
    if metrics is None:
        out = apply_decay(state, current_round, params.decay_rate)
        return clamp_trust(out, current_round, params.t_max)

    blended = blend_score(weights, metrics)
    t = (1.0 - params.smoothing) * state.trust + params.smoothing * blended
    out = replace(state, trust=t, last_active_round=current_round, decayed_to=current_round)
    if improvement > 0:
        out = apply_recovery(out, improvement, params.recovery_rate, params.t_max)
    return clamp_trust(out, current_round, params.t_max)


def impose_cap(state: TrustState, cap_value: float, cap_until: int, current_round: int,
               t_max: float) -> TrustState:
    """Install a rehabilitation cap, keeping the later expiry if one is already active."""
    if state.capped_at(current_round) and state.cap_until >= cap_until:
        cap_until = state.cap_until
        cap_value = min(cap_value, state.cap_value)
    return clamp_trust(replace(state, cap_until=cap_until, cap_value=cap_value), current_round, t_max)
