"""Trust-weighted robust aggregation of accepted updates.

Both robust rules work coordinate by coordinate on values sorted ascending
(ties by node id), so every output coordinate lies between the smallest and
largest submitted value for that coordinate.
"""

from dataclasses import dataclass
from functools import total_ordering

import numpy as np


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class WeightedUpdate:
    node_id: str
    update: np.ndarray
    weight: float


class OpCounter:
    """Counts value comparisons made while sorting."""

    def __init__(self):
        self.comparisons = 0


@total_ordering
class _Counted:
    __slots__ = ("key", "counter")

    def __init__(self, key, counter):
        self.key = key
        self.counter = counter

    def __eq__(self, other):
        return self.key == other.key

    def __lt__(self, other):
        self.counter.comparisons += 1
        return self.key < other.key


def _check(items):
    if not items:
        raise AggregationError("nothing to aggregate")
    vals = np.stack([np.asarray(it.update, dtype=float) for it in items])
    if vals.ndim != 2:
        raise AggregationError("updates must be 1-d vectors of one dimension")
    w = np.array([float(it.weight) for it in items])
    if (w < 0).any() or not np.isfinite(w).all():
        raise AggregationError("weights must be finite and non-negative")
    if w.sum() <= 0:
        raise AggregationError("all weights are zero")
    return vals, w


def _order(column, ids, counter):
    n = len(ids)
    if counter is None:
        return sorted(range(n), key=lambda k: (column[k], ids[k]))
    return sorted(range(n), key=lambda k: _Counted((column[k], ids[k]), counter))


def weighted_coordinate_median(items, counter: OpCounter | None = None) -> np.ndarray:
    """Lower weighted median per coordinate."""
    vals, w = _check(items)
    ids = [it.node_id for it in items]
    total = w.sum()
    out = np.empty(vals.shape[1])
    for j in range(vals.shape[1]):
        col = vals[:, j]
        cum = 0.0
        for k in _order(col, ids, counter):
            cum += w[k]
            if 2.0 * cum >= total:
                out[j] = col[k]
                break
        else:  # pragma: no cover - unreachable while total > 0
            out[j] = col[k]
    return out


def weighted_trimmed_mean(items, trim: float, counter: OpCounter | None = None) -> np.ndarray:
    """Drop ``trim`` of total weight from each tail, then take the weighted mean.

    The item straddling a cut keeps only the part of its weight inside
    the retained band.
    """
    if not 0.0 <= trim < 0.5:
        raise AggregationError("trim must be in [0, 0.5)")
    vals, w = _check(items)
    ids = [it.node_id for it in items]
    p = w / w.sum()
    lo, hi = trim, 1.0 - trim
    out = np.empty(vals.shape[1])
    for j in range(vals.shape[1]):
        col = vals[:, j]
        order = _order(col, ids, counter)
        if trim == 0.0:
            out[j] = float(np.dot(p, col))
            continue
        start = 0.0
        num = den = 0.0
        for k in order:
            end = start + p[k]
            kept = min(end, hi) - max(start, lo)
            if kept > 0:
                num += kept * col[k]
                den += kept
            start = end
        out[j] = num / den if den > 0 else col[order[len(order) // 2]]
    # guard the band against last-ulp drift outside the input range
    return np.clip(out, vals.min(axis=0), vals.max(axis=0))


def plain_mean(items) -> np.ndarray:
    """Unweighted mean; only used for ablation runs."""
    vals, _ = _check(items)
    return vals.mean(axis=0)


def robust_delta(items, method: str, trim: float = 0.1, counter: OpCounter | None = None) -> np.ndarray:
    if method == "median":
        return weighted_coordinate_median(items, counter)
    if method == "trimmed_mean":
        return weighted_trimmed_mean(items, trim, counter)
    if method == "mean":
        return plain_mean(items)
    raise AggregationError(f"unknown aggregation method {method!r}")


def aggregate_round(global_model, accepted, method: str = "median", trim: float = 0.1,
                    counter: OpCounter | None = None) -> np.ndarray:
    g = np.asarray(global_model, dtype=float)
    if not accepted:
        return g.copy()
    return g + robust_delta(accepted, method, trim, counter)
