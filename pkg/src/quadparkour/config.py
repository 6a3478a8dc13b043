"""Experiment configuration: TOML parsing with strict key validation,
canonical serialization, config hashing, named RNG streams, and the
one-delta ablation tables."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from .errors import ConfigError
from .rewards import DEFAULT_COEFFICIENTS, REWARD_TERMS
from .terrain.heightfield import RESOLUTION
from .trainer.collect import MASKABLE_INPUTS
from .trainer.run import TrainConfig

# the two tracking terms define the task and are not ablation rows
ABLATABLE_REWARDS = tuple(t for t in REWARD_TERMS
                          if t not in ("goal_tracking", "velocity_tracking"))

RNG_STREAMS = ("terrain", "policy_init", "action_sampling", "curriculum")


@dataclass
class NetworkConfig:
    elevation_code: int = 32
    history_code: int = 20
    hidden: tuple[int, ...] = (512, 256, 128)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.elevation_code < 1 or self.history_code < 1:
            raise ConfigError("encoder code sizes must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden layer sizes must be >= 1")


@dataclass
class TrainBlock:
    total_iterations: int = 5000
    pretrain_iterations: int = 1000
    n_agents: int = 1024
    horizon: int = 24
    epochs: int = 5
    minibatches: int = 4
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    learning_rate: float = 3e-4
    entropy_coef: float = 0.005
    value_coef: float = 0.5
    checkpoint_every: int = 0

    def __post_init__(self):
        # delegate numeric validation to the runtime config
        self.as_train_config()

    def as_train_config(self, **overrides) -> TrainConfig:
        kv = dataclasses.asdict(self)
        kv.update(overrides)
        return TrainConfig(**kv)


@dataclass
class AblationConfig:
    input_masks: tuple[str, ...] = ()
    reward_disables: tuple[str, ...] = ()
    std_clip: bool = True
    pretrain: bool = True

    def __post_init__(self):
        self.input_masks = tuple(self.input_masks)
        self.reward_disables = tuple(self.reward_disables)
        unknown = set(self.input_masks) - set(MASKABLE_INPUTS)
        if unknown:
            raise ConfigError(f"ablation.input_masks: unknown {sorted(unknown)}")
        unknown = set(self.reward_disables) - set(ABLATABLE_REWARDS)
        if unknown:
            raise ConfigError(f"ablation.reward_disables: unknown {sorted(unknown)}")


@dataclass
class ExperimentConfig:
    seed: int = 0
    terrain_resolution: float = RESOLUTION
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainBlock = field(default_factory=TrainBlock)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    rewards: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_COEFFICIENTS))

    def __post_init__(self):
        if self.terrain_resolution <= 0:
            raise ConfigError("terrain_resolution must be positive")
        unknown = set(self.rewards) - set(REWARD_TERMS)
        if unknown:
            raise ConfigError(f"rewards: unknown terms {sorted(unknown)}")
        missing = set(REWARD_TERMS) - set(self.rewards)
        if missing:
            raise ConfigError(f"rewards: missing terms {sorted(missing)}")
        for name, coef in self.rewards.items():
            if coef < 0:
                raise ConfigError(f"rewards.{name} must be a non-negative magnitude")

    # ------------------------------------------------------------------
    def to_train_config(self) -> TrainConfig:
        """Materialize the runtime training config, folding in ablations."""
        pretrain = self.train.pretrain_iterations if self.ablation.pretrain else 0
        return self.train.as_train_config(
            pretrain_iterations=pretrain,
            seed=self.seed,
            std_cap=self.ablation.std_clip,
            masked_inputs=self.ablation.input_masks,
            disabled_rewards=self.ablation.reward_disables,
            reward_coefficients=dict(self.rewards),
            terrain_resolution=self.terrain_resolution,
        )

    def rng_streams(self) -> dict[str, np.random.Generator]:
        """Named generators spawned from the root seed, so experiments that
        share a seed see identical terrain regardless of other settings."""
        children = np.random.SeedSequence(self.seed).spawn(len(RNG_STREAMS))
        return {name: np.random.default_rng(ss)
                for name, ss in zip(RNG_STREAMS, children)}

    def hash(self) -> str:
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()[:16]


# ----------------------------------------------------------------------
# TOML serialization


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"unsupported config value type {type(v).__name__}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical TOML text; the config hash is taken over this form."""
    lines = [f"seed = {_toml_value(cfg.seed)}",
             f"terrain_resolution = {_toml_value(cfg.terrain_resolution)}", ""]
    for section in ("network", "train", "ablation"):
        block = getattr(cfg, section)
        lines.append(f"[{section}]")
        for f in fields(block):
            lines.append(f"{f.name} = {_toml_value(getattr(block, f.name))}")
        lines.append("")
    lines.append("[rewards]")
    for name in REWARD_TERMS:
        lines.append(f"{name} = {_toml_value(cfg.rewards[name])}")
    lines.append("")
    return "\n".join(lines)


def _build_block(cls, data: dict, path: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown config key {path}.{key}" if path
                          else f"unknown config key {key}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"invalid value in [{path or 'root'}]: {e}") from e


def parse_config(source) -> ExperimentConfig:
    """Parse a TOML file (path) or TOML text into a validated config.

    Every key must be known; errors carry the offending key path. An empty
    document yields the full default configuration.
    """
    if isinstance(source, (str, Path)) and "\n" not in str(source) and Path(source).exists():
        text = Path(source).read_text()
    else:
        text = str(source)
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"config is not valid TOML: {e}") from e

    top_allowed = {"seed", "terrain_resolution", "network", "train",
                   "ablation", "rewards"}
    unknown = set(data) - top_allowed
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]}")
    for section in ("network", "train", "ablation", "rewards"):
        if section in data and not isinstance(data[section], dict):
            raise ConfigError(f"config key {section} must be a table")

    network = _build_block(NetworkConfig, data.get("network", {}), "network")
    train = _build_block(TrainBlock, data.get("train", {}), "train")
    ablation = _build_block(AblationConfig, data.get("ablation", {}), "ablation")
    rewards = dict(DEFAULT_COEFFICIENTS)
    for name, coef in data.get("rewards", {}).items():
        if name not in REWARD_TERMS:
            raise ConfigError(f"unknown config key rewards.{name}")
        rewards[name] = float(coef)
    kv = {}
    for key in ("seed", "terrain_resolution"):
        if key in data:
            kv[key] = data[key]
    return ExperimentConfig(network=network, train=train, ablation=ablation,
                            rewards=rewards, **kv)


# ----------------------------------------------------------------------
# ablation tables: every published row as exactly one delta from defaults


def ablation_table(table: str,
                   base: ExperimentConfig | None = None) -> dict[str, ExperimentConfig]:
    base = base or ExperimentConfig()
    rows: dict[str, ExperimentConfig] = {}
    if table == "input":
        for mask in MASKABLE_INPUTS:
            rows[mask] = dataclasses.replace(
                base, ablation=dataclasses.replace(base.ablation,
                                                   input_masks=(mask,)))
    elif table == "reward":
        for term in ABLATABLE_REWARDS:
            rows[term] = dataclasses.replace(
                base, ablation=dataclasses.replace(base.ablation,
                                                   reward_disables=(term,)))
    elif table == "design":
        rows["std_clipping"] = dataclasses.replace(
            base, ablation=dataclasses.replace(base.ablation, std_clip=False))
        rows["pretraining"] = dataclasses.replace(
            base, ablation=dataclasses.replace(base.ablation, pretrain=False))
        rows["batch_size_512"] = dataclasses.replace(
            base, train=dataclasses.replace(base.train, n_agents=512))
    else:
        raise ConfigError(f"unknown ablation table {table!r} "
                          "(expected input, reward, or design)")
    return rows


def config_delta(a: ExperimentConfig, b: ExperimentConfig) -> list[str]:
    """Dotted paths of every leaf where the two configs differ."""
    flat_a = _flatten(dataclasses.asdict(a))
    flat_b = _flatten(dataclasses.asdict(b))
    return sorted(k for k in flat_a if flat_a[k] != flat_b[k])


def _flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}.{k}" if prefix else k
        if isinstance(v, dict):
            out.update(_flatten(v, key))
        else:
            out[key] = v
    return out
