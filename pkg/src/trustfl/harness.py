"""Scenario configuration, the round loop, metrics output and audit verification.

A scenario is one JSON document::

    {
      "seed": 7, "rounds": 20,
      "task": {"d": 4, "samples_per_node": 200, "noise_std": 0.0},
      "nodes": [{"id": "h0", "stake": 100, "behavior": {"kind": "honest", "lr": 0.1}}],
      "profile": "paper-reference",
      "policy": {...}, "trust": {...}, "weights": {...},
      "output": {"dir": "runs/demo"}
    }

``policy``, ``trust`` and ``weights`` override the named profile field by
field. Unknown keys anywhere are rejected.
"""

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .chain import merkle_root, read_jsonl, replay
from .coordinator import Coordinator, leaves_from_report
from .nodes import behavior_from_dict, behavior_to_dict, generate_task
from .policy import PolicyConfig
from .store import ContentStore, CorruptArtifact, MissingArtifact
from .trust import TrustParams, TrustWeights

log = logging.getLogger(__name__)

DEFAULT_PROFILE = "paper-reference"
PROFILES = {DEFAULT_PROFILE: (PolicyConfig, TrustParams, TrustWeights)}

METRICS_FILE = "metrics.csv"
EVENTS_FILE = "events.jsonl"
STORE_DIR = "store"
CONFIG_FILE = "config.json"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TaskConfig:
    d: int = 4
    samples_per_node: int = 200
    noise_std: float = 0.0


@dataclass(frozen=True)
class NodeSpec:
    id: str
    behavior: object
    stake: float = 100.0
    pubkey: str | None = None


@dataclass(frozen=True)
class OutputConfig:
    dir: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    rounds: int = 20
    task: TaskConfig = field(default_factory=TaskConfig)
    nodes: tuple = ()
    profile: str = DEFAULT_PROFILE
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    trust: TrustParams = field(default_factory=TrustParams)
    weights: TrustWeights = field(default_factory=TrustWeights)
    output: OutputConfig = field(default_factory=OutputConfig)


# -- parsing -----------------------------------------------------------------

def _coerce(value, ftype, path):
    if ftype in (int, "int") and not isinstance(value, bool):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, int):
            return value
    elif ftype in (float, "float") and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    elif ftype in (bool, "bool") and isinstance(value, bool):
        return value
    elif ftype in (str, "str") and isinstance(value, str):
        return value
    else:
        return value
    raise ConfigError(f"{path}: expected {getattr(ftype, '__name__', ftype)}, got {value!r}")


def _build(cls, data, path, base=None):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown field")
    kwargs = {} if base is None else dataclasses.asdict(base)
    for key, value in data.items():
        kwargs[key] = _coerce(value, known[key].type, f"{path}.{key}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected an object")
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"config.{unknown[0]}: unknown field")
    profile = data.get("profile", DEFAULT_PROFILE)
    if profile not in PROFILES:
        raise ConfigError(f"config.profile: unknown profile {profile!r}")
    pol_cls, par_cls, wts_cls = PROFILES[profile]
    nodes = []
    seen = set()
    for i, spec in enumerate(data.get("nodes", [])):
        path = f"config.nodes[{i}]"
        if not isinstance(spec, dict):
            raise ConfigError(f"{path}: expected an object")
        extra = sorted(set(spec) - {"id", "behavior", "stake", "pubkey"})
        if extra:
            raise ConfigError(f"{path}.{extra[0]}: unknown field")
        nid = spec.get("id")
        if not isinstance(nid, str) or not nid:
            raise ConfigError(f"{path}.id: expected a non-empty string")
        if nid in seen:
            raise ConfigError(f"{path}.id: duplicate node id {nid!r}")
        seen.add(nid)
        try:
            behavior = behavior_from_dict(spec.get("behavior", {"kind": "honest"}))
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"{path}.behavior: {exc}") from None
        stake = _coerce(spec.get("stake", 100.0), float, f"{path}.stake")
        if stake <= 0:
            raise ConfigError(f"{path}.stake: must be > 0")
        pubkey = spec.get("pubkey")
        if pubkey is not None:
            try:
                bytes.fromhex(pubkey)
            except (TypeError, ValueError):
                raise ConfigError(f"{path}.pubkey: expected hex") from None
        nodes.append(NodeSpec(nid, behavior, stake, pubkey))
    seed = _coerce(data.get("seed", 0), int, "config.seed")
    rounds = _coerce(data.get("rounds", 20), int, "config.rounds")
    if rounds < 0:
        raise ConfigError("config.rounds: must be >= 0")
    return ScenarioConfig(
        seed=seed,
        rounds=rounds,
        task=_build(TaskConfig, data.get("task", {}), "config.task"),
        nodes=tuple(nodes),
        profile=profile,
        policy=_build(PolicyConfig, data.get("policy", {}), "config.policy", pol_cls()),
        trust=_build(TrustParams, data.get("trust", {}), "config.trust", par_cls()),
        weights=_build(TrustWeights, data.get("weights", {}), "config.weights", wts_cls()),
        output=_build(OutputConfig, data.get("output", {}), "config.output"),
    )


def load_config(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


def config_to_dict(config: ScenarioConfig) -> dict:
    nodes = []
    for n in config.nodes:
        entry = {"id": n.id, "behavior": behavior_to_dict(n.behavior), "stake": n.stake}
        if n.pubkey is not None:
            entry["pubkey"] = n.pubkey
        nodes.append(entry)
    return {
        "seed": config.seed,
        "rounds": config.rounds,
        "task": dataclasses.asdict(config.task),
        "nodes": nodes,
        "profile": config.profile,
        "policy": dataclasses.asdict(config.policy),
        "trust": dataclasses.asdict(config.trust),
        "weights": dataclasses.asdict(config.weights),
        "output": dataclasses.asdict(config.output),
    }


def dump_config(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n"


def default_profile() -> dict:
    pol, par, wts = PROFILES[DEFAULT_PROFILE]
    return {"profile": DEFAULT_PROFILE, "policy": dataclasses.asdict(pol()),
            "trust": dataclasses.asdict(par()), "weights": dataclasses.asdict(wts())}


# -- running -----------------------------------------------------------------

@dataclass
class ScenarioRun:
    config: ScenarioConfig
    coordinator: Coordinator
    summaries: list

    @property
    def results(self):
        return self.coordinator.results


def build_coordinator(config: ScenarioConfig) -> Coordinator:
    ids = [n.id for n in config.nodes]
    if not ids:
        raise ConfigError("config.nodes: at least one node required")
    task = generate_task(config.seed, config.task.d, ids, config.task.samples_per_node,
                         config.task.noise_std)
    return Coordinator(
        task,
        {n.id: n.behavior for n in config.nodes},
        {n.id: n.stake for n in config.nodes},
        seed=config.seed,
        policy=config.policy,
        params=config.trust,
        weights=config.weights,
        pubkeys={n.id: bytes.fromhex(n.pubkey) for n in config.nodes if n.pubkey is not None},
    )


def run_scenario(config: ScenarioConfig, out_dir=None) -> ScenarioRun:
    """Register every node, run ``config.rounds`` rounds, write artifacts if ``out_dir``."""
    coord = build_coordinator(config)
    summaries = []
    for _ in range(config.rounds):
        res = coord.run_round()
        summaries.append(res.summary())
        log.debug("round %d loss=%.6g accepted=%d", res.round_id, res.validation_loss,
                  len(res.report["accepted"]))
    run = ScenarioRun(config, coord, summaries)
    out_dir = out_dir if out_dir is not None else config.output.dir
    if out_dir is not None:
        write_artifacts(run, out_dir)
    return run


def write_artifacts(run: ScenarioRun, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(dump_config(run.config), encoding="utf-8")
    with open(out / METRICS_FILE, "w", encoding="utf-8", newline="") as fh:
        emit_metrics(run.summaries, run.coordinator.node_ids, fh)
    run.coordinator.contract.export_jsonl(out / EVENTS_FILE)
    run.coordinator.store.dump(out / STORE_DIR)


def metrics_columns(node_ids) -> list:
    return (["round_id", "validation_loss", "admitted", "submitted", "accepted", "strikes",
             "slashes", "payouts", "withheld"] + [f"trust_{nid}" for nid in node_ids])


def emit_metrics(summaries, node_ids, stream):
    """CSV, header first. Money and trust are micro-unit integers; loss is a float."""
    node_ids = list(node_ids)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(metrics_columns(node_ids))
    last = None
    for s in summaries:
        if last is not None and s["round_id"] <= last:
            raise ValueError("summaries must be in round order")
        last = s["round_id"]
        writer.writerow([s["round_id"], repr(float(s["validation_loss"])), s["admitted"],
                         s["submitted"], s["accepted"], s["strikes"], s["slashes"], s["payouts"],
                         s["withheld"]] + [s["trust"][nid] for nid in node_ids])


def metrics_text(run: ScenarioRun) -> str:
    buf = io.StringIO()
    emit_metrics(run.summaries, run.coordinator.node_ids, buf)
    return buf.getvalue()


def read_metrics(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# -- verification ------------------------------------------------------------

@dataclass
class VerifyResult:
    rounds_checked: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def verify_events(events, store: ContentStore) -> VerifyResult:
    """Recompute each finalized round's digest from its stored report."""
    result = VerifyResult()
    for ev in events:
        if ev.get("type") != "RoundFinalized":
            continue
        rid = ev["round_id"]
        result.rounds_checked += 1
        try:
            report = json.loads(store.get(ev["cid_report"]))
            store.get(ev["cid_model"])
        except (MissingArtifact, CorruptArtifact) as exc:
            result.mismatches.append(f"round {rid}: {type(exc).__name__} {exc}")
            continue
        if report.get("round_id") != rid:
            result.mismatches.append(f"round {rid}: report is for round {report.get('round_id')}")
            continue
        leaves = leaves_from_report(report)
        digest = merkle_root(leaves).hex()
        if digest != ev["digest"]:
            result.mismatches.append(f"round {rid}: digest {digest} != on-chain {ev['digest']}")
        if [lf.to_list() for lf in leaves] != ev["leaves"]:
            result.mismatches.append(f"round {rid}: report leaves differ from finalized leaves")
    try:
        state = replay(events)
    except (KeyError, ValueError, RuntimeError) as exc:
        result.mismatches.append(f"event log does not replay: {exc}")
    else:
        if not state.conserved():
            result.mismatches.append("token conservation violated")
    return result


def verify_dir(out_dir) -> VerifyResult:
    out = Path(out_dir)
    events = read_jsonl(out / EVENTS_FILE)
    store = ContentStore.load(out / STORE_DIR)
    return verify_events(events, store)
