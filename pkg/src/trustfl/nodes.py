"""Synthetic least-squares task and simulated worker behaviours.

Randomness is drawn from per-(seed, node, round) substreams so adding or
removing a node never perturbs anyone else's draws.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .evaluation import ValidationSet

VALIDATION_FACTOR = 4
MIN_VALIDATION = 64


def _id_key(node_id: str) -> list:
    digest = hashlib.sha256(node_id.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "big") for i in range(0, 16, 4)]


def keyed_rng(seed: int, *parts) -> np.random.Generator:
    """Generator keyed by the global seed plus node ids / round numbers / tags."""
    entropy = [int(seed) & 0xFFFFFFFF]
    for part in parts:
        if isinstance(part, str):
            entropy.extend(_id_key(part))
        else:
            entropy.append(int(part) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass
class LocalData:
    inputs: np.ndarray
    targets: np.ndarray

    def gradient(self, w) -> np.ndarray:
        """Gradient of the mean squared error at ``w``."""
        resid = self.inputs @ w - self.targets
        return (2.0 / len(self.targets)) * (self.inputs.T @ resid)


@dataclass
class SyntheticTask:
    true_weights: np.ndarray
    local: dict
    validation: ValidationSet
    noise_std: float

    @property
    def dim(self) -> int:
        return self.true_weights.shape[0]

    def to_bytes(self) -> bytes:
        parts = [self.true_weights.tobytes(), self.validation.inputs.tobytes(),
                 self.validation.targets.tobytes()]
        for nid in sorted(self.local):
            parts += [nid.encode(), self.local[nid].inputs.tobytes(), self.local[nid].targets.tobytes()]
        return b"".join(parts)


def _draw(rng, n, w_star, noise_std):
    x = rng.standard_normal((n, w_star.shape[0]))
    y = x @ w_star
    if noise_std > 0:
        y = y + rng.normal(0.0, noise_std, size=n)
    return x, y


def generate_task(seed: int, d: int, nodes, samples_per_node: int, noise_std: float = 0.0) -> SyntheticTask:
    """Build a linear-regression task.

    ``nodes`` is a node count or a list of node ids. Each node's data comes
    from its own keyed stream; the validation set has max(4d, 64) rows.
    """
    if isinstance(nodes, int):
        nodes = [f"n{i:02d}" for i in range(nodes)]
    nodes = list(nodes)
    if d < 1 or len(nodes) < 1 or samples_per_node < d:
        raise ValueError("need d >= 1, at least one node and samples_per_node >= d")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    w_star = keyed_rng(seed, "task").standard_normal(d)
    local = {}
    for nid in nodes:
        x, y = _draw(keyed_rng(seed, "data", nid), samples_per_node, w_star, noise_std)
        local[nid] = LocalData(x, y)
    vx, vy = _draw(keyed_rng(seed, "validation"), max(VALIDATION_FACTOR * d, MIN_VALIDATION),
                   w_star, noise_std)
    return SyntheticTask(w_star, local, ValidationSet(vx, vy), noise_std)


# -- behaviours ----------------------------------------------------------------

@dataclass(frozen=True)
class Honest:
    lr: float = 0.1

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


@dataclass(frozen=True)
class SignFlip:
    lr: float = 0.1
    scale: float = 1.0

    def __post_init__(self):
        if self.lr <= 0 or self.scale <= 0:
            raise ValueError("lr and scale must be > 0")


@dataclass(frozen=True)
class NoiseAttacker:
    std: float = 1.0

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be >= 0")


@dataclass(frozen=True)
class FreeRider:
    pass


@dataclass(frozen=True)
class Intermittent:
    p_submit: float
    inner: object

    def __post_init__(self):
        if not 0.0 <= self.p_submit <= 1.0:
            raise ValueError("p_submit must be in [0, 1]")


@dataclass(frozen=True)
class Recovering:
    switch_round: int
    before: object
    after: object

    def __post_init__(self):
        if self.switch_round < 1:
            raise ValueError("switch_round must be >= 1")


def local_update(behavior, global_model, data: LocalData, round_id: int,
                 rng: np.random.Generator) -> np.ndarray | None:
    """The update a node submits this round, or None if it stays silent."""
    w = np.asarray(global_model, dtype=float)
    if isinstance(behavior, Honest):
        return -behavior.lr * data.gradient(w)
    if isinstance(behavior, SignFlip):
        return behavior.scale * behavior.lr * data.gradient(w)
    if isinstance(behavior, NoiseAttacker):
        return rng.normal(0.0, behavior.std, size=w.shape[0])
    if isinstance(behavior, FreeRider):
        return np.zeros_like(w)
    if isinstance(behavior, Intermittent):
        if rng.random() >= behavior.p_submit:
            return None
        return local_update(behavior.inner, w, data, round_id, rng)
    if isinstance(behavior, Recovering):
        inner = behavior.before if round_id < behavior.switch_round else behavior.after
        return local_update(inner, w, data, round_id, rng)
    raise TypeError(f"unknown behaviour {behavior!r}")


_KINDS = {"honest": Honest, "sign_flip": SignFlip, "noise": NoiseAttacker,
          "free_rider": FreeRider, "intermittent": Intermittent, "recovering": Recovering}


def behavior_from_dict(spec: dict):
    """Parse ``{"kind": ..., **params}`` (nested for intermittent / recovering)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown behaviour kind {kind!r}")
    if kind == "intermittent":
        spec["inner"] = behavior_from_dict(spec["inner"])
    elif kind == "recovering":
        spec["before"] = behavior_from_dict(spec["before"])
        spec["after"] = behavior_from_dict(spec["after"])
    return _KINDS[kind](**spec)


def behavior_to_dict(behavior) -> dict:
    kind = next(k for k, cls in _KINDS.items() if type(behavior) is cls)
    out = {"kind": kind}
    for name in behavior.__dataclass_fields__:
        v = getattr(behavior, name)
        out[name] = behavior_to_dict(v) if name in ("inner", "before", "after") else v
    return out
