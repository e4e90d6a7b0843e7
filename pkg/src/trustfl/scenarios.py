"""Ready-made scenario configurations used by the demos and the acceptance suite."""

import dataclasses

from .harness import NodeSpec, ScenarioConfig, TaskConfig
from .nodes import FreeRider, Honest, NoiseAttacker, Recovering, SignFlip
from .policy import PolicyConfig

DEFAULT_SEED = 7
LR = 0.1


def roster(honest: int = 8, sign_flip: int = 0, free_riders: int = 0, recovering: int = 0,
           stake: float = 100.0, switch_round: int = 6) -> tuple:
    nodes = [NodeSpec(f"h{i:02d}", Honest(LR), stake) for i in range(honest)]
    nodes += [NodeSpec(f"s{i:02d}", SignFlip(LR, 1.0), stake) for i in range(sign_flip)]
    nodes += [NodeSpec(f"f{i:02d}", FreeRider(), stake) for i in range(free_riders)]
    nodes += [NodeSpec(f"r{i:02d}", Recovering(switch_round, NoiseAttacker(1.0), Honest(LR)), stake)
              for i in range(recovering)]
    return tuple(nodes)


def scenario(nodes, rounds: int, seed: int = DEFAULT_SEED, d: int = 4, samples_per_node: int = 200,
             noise_std: float = 0.0, **policy_overrides) -> ScenarioConfig:
    return ScenarioConfig(seed=seed, rounds=rounds,
                          task=TaskConfig(d, samples_per_node, noise_std),
                          nodes=tuple(nodes), policy=PolicyConfig(**policy_overrides))


def slashing(seed: int = DEFAULT_SEED, rounds: int = 20) -> ScenarioConfig:
    """8 honest nodes and 2 sign-flippers on a noiseless 4-d task."""
    return scenario(roster(8, sign_flip=2), rounds, seed)


def attacked(seed: int = DEFAULT_SEED, rounds: int = 30) -> ScenarioConfig:
    return scenario(roster(8, sign_flip=2), rounds, seed)


def attack_free(seed: int = DEFAULT_SEED, rounds: int = 30) -> ScenarioConfig:
    return scenario(roster(10), rounds, seed)


def ablated(seed: int = DEFAULT_SEED, rounds: int = 30) -> ScenarioConfig:
    """The attacked roster with screening off and an unweighted mean."""
    cfg = attacked(seed, rounds)
    return dataclasses.replace(cfg, policy=PolicyConfig(agg_method="mean", screening=False))


def free_rider(seed: int = DEFAULT_SEED, rounds: int = 20) -> ScenarioConfig:
    return scenario(roster(8, free_riders=1), rounds, seed)


def recovery(seed: int = DEFAULT_SEED, rounds: int = 22, switch_round: int = 6) -> ScenarioConfig:
    """A noise attacker that turns honest at ``switch_round``."""
    return scenario(roster(8, recovering=1, switch_round=switch_round), rounds, seed)


ACCEPTANCE = {
    "slashing": slashing,
    "attacked": attacked,
    "attack_free": attack_free,
    "ablated": ablated,
    "free_rider": free_rider,
    "recovery": recovery,
}
