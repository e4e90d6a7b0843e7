"""Per-round raw metrics computed by the coordinator.

Accuracy comes from validation-loss gain, data quality from cosine
similarity to the coordinate-wise median of the round's submissions,
consistency from smoothed acceptance, frequency from submission counts.
All outputs are in [0, 1].
"""

import numpy as np

EPS = 1e-12
RECOVERY_LOOKBACK = 3


class DimensionError(ValueError):
    pass


class ValidationSet:
    def __init__(self, inputs, targets):
        self.inputs = np.asarray(inputs, dtype=float)
        self.targets = np.asarray(targets, dtype=float)
        if self.inputs.ndim != 2 or self.targets.ndim != 1:
            raise DimensionError("inputs must be n x d and targets length n")
        if self.inputs.shape[0] != self.targets.shape[0] or self.inputs.shape[0] < 1:
            raise DimensionError("need n >= 1 matching rows")
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.targets).all()):
            raise ValueError("validation data must be finite")

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def _check_dim(vec: np.ndarray, d: int):
    if vec.shape != (d,):
        raise DimensionError(f"expected vector of dimension {d}, got shape {vec.shape}")


def validation_loss(model, valset: ValidationSet) -> float:
    """Mean squared error of a linear model on the validation set."""
    w = np.asarray(model, dtype=float)
    _check_dim(w, valset.dim)
    resid = valset.inputs @ w - valset.targets
    return float(np.mean(resid * resid))


def raw_gain(global_model, update, valset: ValidationSet) -> float:
    """L(global) - L(global + update); positive when the update helps."""
    g = np.asarray(global_model, dtype=float)
    u = np.asarray(update, dtype=float)
    if u.shape != g.shape:
        raise DimensionError("update and global model differ in dimension")
    return validation_loss(g, valset) - validation_loss(g + u, valset)


def normalize_accuracy(gains: dict) -> dict:
    if not gains:
        raise ValueError("no gains to normalize")
    pos = {k: max(0.0, g) for k, g in gains.items()}
    top = max(pos.values())
    return {k: min(1.0, p / (top + EPS)) for k, p in pos.items()}


def reference_direction(updates) -> np.ndarray:
    if len(updates) == 0:
        raise ValueError("no updates")
    mats = [np.asarray(u, dtype=float) for u in updates]
    d = mats[0].shape
    if any(m.shape != d or m.ndim != 1 for m in mats):
        raise DimensionError("updates must share one dimension")
    return np.median(np.stack(mats), axis=0)


def data_quality(update, reference) -> float:
    u = np.asarray(update, dtype=float)
    r = np.asarray(reference, dtype=float)
    if u.shape != r.shape:
        raise DimensionError("update and reference differ in dimension")
    nu, nr = np.linalg.norm(u), np.linalg.norm(r)
    if nu < EPS or nr < EPS:
        return 0.0
    cos = float(np.dot(u, r) / (nu * nr))
    return min(1.0, max(0.0, cos))


def update_consistency(prev: float, accepted: bool, rho: float) -> float:
    return (1.0 - rho) * prev + rho * (1.0 if accepted else 0.0)


def update_frequency(history, window: int, previous: float = 1.0) -> float:
    """Submitted / eligible over the trailing ``window`` rounds.

    ``history`` is a sequence of ``(eligible, submitted)`` pairs, oldest first.
    With no eligible rounds in the window the previous value carries forward.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    recent = list(history)[-window:]
    eligible = sum(1 for e, _ in recent if e)
    if eligible == 0:
        return previous
    submitted = sum(1 for e, s in recent if e and s)
    return submitted / eligible


def recovery_signal(current: float, history) -> float:
    """Positive part of ``current`` minus the mean of the last few prior values."""
    prior = list(history)[-RECOVERY_LOOKBACK:]
    if not prior:
        return 0.0
    delta = current - sum(prior) / len(prior)
    return min(1.0, max(0.0, delta))
