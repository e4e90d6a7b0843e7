"""Trust-based incentives for semi-decentralized federated learning.

A deterministic, round-based simulator: multi-factor trust scoring with
decay and recovery, policy-driven admission / screening / rewards /
slashing, trust-weighted robust aggregation, a content-addressed artifact
store and a contract state machine that commits a Merkle digest per round.
"""

from .aggregation import (WeightedUpdate, aggregate_round, weighted_coordinate_median,
                          weighted_trimmed_mean)
from .chain import Contract, ContractState, DigestLeaf, merkle_root
from .coordinator import Coordinator, RoundResult
from .harness import ScenarioConfig, load_config, parse_config, run_scenario, verify_dir
from .nodes import (FreeRider, Honest, Intermittent, NoiseAttacker, Recovering, SignFlip,
                    generate_task)
from .policy import PolicyConfig
from .store import ContentStore
from .trust import TrustParams, TrustState, TrustWeights

__version__ = "0.1.0"
