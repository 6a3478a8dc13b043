"""On-policy training: rollout collection, advantage estimation, and
clipped-surrogate updates over the vectorized sim."""

from .buffer import RolloutBuffer
from .collect import INPUT_MASKS, MASKABLE_INPUTS, Collector, apply_input_masks
from .gae import gae
from .ppo import normalize_advantages, ppo_update
from .run import METRIC_COLUMNS, TrainConfig, metrics_digest, run

__all__ = [
    "RolloutBuffer", "INPUT_MASKS", "MASKABLE_INPUTS", "Collector",
    "apply_input_masks", "gae", "normalize_advantages", "ppo_update",
    "METRIC_COLUMNS", "TrainConfig", "metrics_digest", "run",
]
