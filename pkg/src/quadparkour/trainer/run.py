"""Top-level training loop: pretraining schedule, curriculum mixture,
metrics logging, and checkpointing."""

from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from ..curriculum import CurriculumState
from ..errors import ConfigError, RuntimeFault
from ..models import Policy, load_checkpoint, save_checkpoint
from ..models.policy import NetworkShape
from ..numerics.optim import Adam
from ..rewards import REWARD_TERMS
from ..sim.env import V_CMD_RANGE, VecEnv
from ..terrain.categories import CATEGORIES, N_LEVELS, ObstacleSpec, generate
from ..terrain.heightfield import RESOLUTION
from .collect import MASKABLE_INPUTS, Collector
from .ppo import ppo_update

OBSTACLE_CATEGORIES = tuple(c for c in CATEGORIES if c != "Flat")
FLAT_SLOT_PERIOD = 8        # in the mixed phase, 1 in 8 agents stays on Flat


@dataclass
class TrainConfig:
    total_iterations: int = 2000
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
    seed: int = 0
    std_cap: bool = True
    masked_inputs: tuple[str, ...] = ()
    disabled_rewards: tuple[str, ...] = ()
    reward_coefficients: dict[str, float] | None = None
    categories: tuple[str, ...] | None = None   # mixed-phase override
    terrain_resolution: float = RESOLUTION
    checkpoint_every: int = 0                   # 0 disables periodic saves
    log_every: int = 0                          # 0 disables stdout lines

    def __post_init__(self):
        if self.n_agents < 1 or self.horizon < 1:
            raise ConfigError("n_agents and horizon must be >= 1")
        if self.epochs < 1 or self.minibatches < 1:
            raise ConfigError("epochs and minibatches must be >= 1")
        if not 0 <= self.pretrain_iterations <= self.total_iterations:
            raise ConfigError("need 0 <= pretrain_iterations <= total_iterations")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.lam <= 1.0:
            raise ConfigError("gamma and lam must lie in [0, 1]")
        if self.clip_eps <= 0 or self.learning_rate <= 0:
            raise ConfigError("clip_eps and learning_rate must be positive")
        unknown = set(self.masked_inputs) - set(MASKABLE_INPUTS)
        if unknown:
            raise ConfigError(f"unknown input masks: {sorted(unknown)}")
        unknown = set(self.disabled_rewards) - set(REWARD_TERMS)
        if unknown:
            raise ConfigError(f"unknown reward terms: {sorted(unknown)}")
        if self.categories is not None:
            bad = set(self.categories) - set(CATEGORIES)
            if bad:
                raise ConfigError(f"unknown categories: {sorted(bad)}")
        if self.terrain_resolution <= 0:
            raise ConfigError("terrain_resolution must be positive")

    def hash(self) -> str:
        payload = repr(sorted(dataclasses.asdict(self).items()))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


METRIC_COLUMNS = (
    ["iteration", "lr", "reward_total"]
    + [f"reward_{name}" for name in REWARD_TERMS]
    + ["actor_loss", "value_loss", "entropy", "clip_fraction",
       "skipped_minibatches", "policy_std", "episodes", "promote", "demote",
       "stay", "mean_terminal_distance", "mean_along_track", "mean_level",
       "level_hist",
       "steps_per_sec"]       # steps_per_sec last: dropped from the digest
)


def _mixed_category(agent: int, cfg: TrainConfig) -> str:
    if cfg.categories is not None:
        return cfg.categories[agent % len(cfg.categories)]
    if agent % FLAT_SLOT_PERIOD == 0:
        return "Flat"
    return OBSTACLE_CATEGORIES[(agent % FLAT_SLOT_PERIOD) - 1]


def _assign_phase(collector: Collector, cfg: TrainConfig, flat_only: bool,
                  rng: np.random.Generator) -> None:
    """Move every agent onto its phase terrain at level 0 and reset."""
    envs = collector.envs
    shared: dict[str, object] = {}
    for i in range(envs.n):
        cat = "Flat" if flat_only else _mixed_category(i, cfg)
        v_cmd = float(rng.uniform(*V_CMD_RANGE))
        if cat not in shared:
            shared[cat] = generate(ObstacleSpec(cat, 0),
                                   seed=int(rng.integers(0, 2 ** 31)),
                                   resolution=cfg.terrain_resolution)
        envs.set_field(i, shared[cat], v_cmd=v_cmd)
        collector.curricula[i] = CurriculumState(cat, 0, v_cmd=v_cmd)
    envs.reset()
    collector.history[:] = 0.0
    collector.prev_action[:] = 0.0


def metrics_digest(csv_path: Path) -> str:
    """SHA-256 over the metrics rows with the trailing wall-clock column
    removed, so reruns of a seeded config produce the same digest."""
    lines = csv_path.read_text().strip().splitlines()
    stripped = [",".join(line.split(",")[:-1]) for line in lines]
    return hashlib.sha256("\n".join(stripped).encode()).hexdigest()


def _parse_resume_tag(tag: str) -> tuple[str, int]:
    if "|iteration=" not in tag:
        raise RuntimeFault(f"checkpoint lacks an iteration tag: {tag!r}")
    cfg_hash, _, it = tag.partition("|iteration=")
    return cfg_hash, int(it)


def run(cfg: TrainConfig, out_dir, resume_from=None, *,
        shape: NetworkShape | None = None,
        config_hash: str | None = None) -> dict:
    """Train a policy per the config; returns summary stats.

    Writes metrics.csv (one row per iteration), metrics.digest, and
    checkpoint files under out_dir. With `resume_from`, parameters,
    optimizer state, and the iteration counter continue from the file.
    `config_hash` overrides the tag embedded in checkpoints (used when an
    outer experiment config wraps this one).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shape = shape or NetworkShape()
    policy = Policy(shape, seed=cfg.seed, std_cap_enabled=cfg.std_cap)
    optimizer = Adam(policy.params, cfg.learning_rate)
    cfg_hash = config_hash if config_hash is not None else cfg.hash()

    start_iter = 0
    if resume_from is not None:
        tag = load_checkpoint(resume_from, policy, optimizer)
        stored_hash, start_iter = _parse_resume_tag(tag)
        if stored_hash != cfg_hash:
            raise ConfigError(
                f"checkpoint was written by config {stored_hash}, not {cfg_hash}")

    root = np.random.SeedSequence(cfg.seed)
    env_ss, collect_ss, update_ss, assign_ss = root.spawn(4)
    rng_assign = np.random.default_rng(assign_ss)
    rng_collect = np.random.default_rng(collect_ss)
    rng_update = np.random.default_rng(update_ss)

    flat0 = generate(ObstacleSpec("Flat", 0), seed=0,
                     resolution=cfg.terrain_resolution)
    envs = VecEnv([flat0] * cfg.n_agents, 0.6,
                  seed=int(env_ss.generate_state(1)[0] % 2 ** 31))
    curricula = [CurriculumState("Flat", 0, v_cmd=0.6) for _ in range(cfg.n_agents)]
    collector = Collector(
        policy, envs, curricula, rng_collect,
        coefficients=cfg.reward_coefficients,
        disabled_rewards=cfg.disabled_rewards,
        masked_inputs=cfg.masked_inputs,
        terrain_resolution=cfg.terrain_resolution)

    metrics_path = out / "metrics.csv"
    fresh = start_iter == 0 or not metrics_path.exists()
    mode = "w" if fresh else "a"
    in_pretrain: bool | None = None
    last_row: dict = {}

    with metrics_path.open(mode) as metrics:
        if fresh:
            metrics.write(",".join(METRIC_COLUMNS) + "\n")
        for it in range(start_iter, cfg.total_iterations):
            phase_flat = it < cfg.pretrain_iterations
            if phase_flat != in_pretrain:
                _assign_phase(collector, cfg, phase_flat, rng_assign)
                in_pretrain = phase_flat
            lr = cfg.learning_rate * (1.0 - it / cfg.total_iterations)

            t0 = time.perf_counter()
            buf, reward_stats = collector.rollout(cfg.horizon)
            update_stats = ppo_update(
                policy, optimizer, buf,
                gamma=cfg.gamma, lam=cfg.lam, clip_eps=cfg.clip_eps,
                epochs=cfg.epochs, minibatches=cfg.minibatches, lr=lr,
                entropy_coef=cfg.entropy_coef, value_coef=cfg.value_coef,
                rng=rng_update)
            elapsed = time.perf_counter() - t0

            ep = collector.drain_episode_stats()
            levels = np.asarray(ep["levels"])
            hist = np.bincount(levels, minlength=N_LEVELS)
            row = {
                "iteration": it,
                "lr": f"{lr:.8g}",
                "reward_total": f"{reward_stats['reward/total']:.6g}",
                **{f"reward_{n}": f"{reward_stats['reward/' + n]:.6g}"
                   for n in REWARD_TERMS},
                "actor_loss": f"{update_stats['actor_loss']:.6g}",
                "value_loss": f"{update_stats['value_loss']:.6g}",
                "entropy": f"{update_stats['entropy']:.6g}",
                "clip_fraction": f"{update_stats['clip_fraction']:.4g}",
                "skipped_minibatches": update_stats["skipped_minibatches"],
                "policy_std": f"{float(np.mean(policy.std)):.6g}",
                "episodes": ep["episodes"],
                "promote": ep["decisions"]["Promote"],
                "demote": ep["decisions"]["Demote"],
                "stay": ep["decisions"]["Stay"],
                "mean_terminal_distance": f"{ep['mean_terminal_distance']:.6g}",
                "mean_along_track":
                    f"{float(np.mean(envs.along_track())):.6g}",
                "mean_level": f"{float(levels.mean()):.4g}",
                "level_hist": "|".join(str(c) for c in hist),
                "steps_per_sec": f"{cfg.n_agents * cfg.horizon / elapsed:.0f}",
            }
            metrics.write(",".join(str(row[c]) for c in METRIC_COLUMNS) + "\n")
            metrics.flush()
            last_row = row
            if cfg.log_every and it % cfg.log_every == 0:
                print(f"iter {it}: reward {row['reward_total']} "
                      f"std {row['policy_std']} episodes {ep['episodes']}")
            if cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
                _save(out / f"checkpoint_{it + 1:06d}.bin", policy, optimizer,
                      cfg_hash, it + 1)
    _save(out / "checkpoint_final.bin", policy, optimizer, cfg_hash,
          cfg.total_iterations)
    digest = metrics_digest(metrics_path)
    (out / "metrics.digest").write_text(digest + "\n")
    return {"iterations": cfg.total_iterations, "digest": digest,
            "final": last_row, "policy": policy, "collector": collector}


def _save(path: Path, policy: Policy, optimizer: Adam, cfg_hash: str,
          iteration: int) -> None:
    try:
        save_checkpoint(path, policy, f"{cfg_hash}|iteration={iteration}",
                        optimizer=optimizer)
    except OSError as e:
        raise RuntimeFault(f"checkpoint write failed at {path}: {e}") from e
