"""Fixed-horizon transition storage for parallel agents."""

from __future__ import annotations

import numpy as np


class RolloutBuffer:
    """(T, N, ...) arrays for one collection window plus the bootstrap value.

    The observation triple is stored as collected (after input masking), so
    updates see exactly what the policy saw.
    """

    def __init__(self, horizon: int, n_agents: int, proprio_dim: int,
                 elev_shape: tuple, history_len: int, n_actions: int):
        if horizon < 1 or n_agents < 1:
            raise ValueError("horizon and n_agents must be >= 1")
        T, N = horizon, n_agents
        self.horizon = T
        self.n_agents = N
        self.proprio = np.zeros((T, N, proprio_dim), dtype=np.float32)
        self.elev = np.zeros((T, N) + tuple(elev_shape), dtype=np.float32)
        self.history = np.zeros((T, N, history_len, proprio_dim), dtype=np.float32)
        self.actions = np.zeros((T, N, n_actions), dtype=np.float32)
        self.log_probs = np.zeros((T, N), dtype=np.float64)
        self.rewards = np.zeros((T, N), dtype=np.float64)
        self.values = np.zeros((T, N), dtype=np.float64)
        self.dones = np.zeros((T, N), dtype=bool)
        self.bootstrap = np.zeros(N, dtype=np.float64)

    @property
    def n_transitions(self) -> int:
        return self.horizon * self.n_agents

    def store(self, t: int, proprio, elev, history, action, log_prob,
              reward, value, done) -> None:
        self.proprio[t] = proprio
        self.elev[t] = elev
        self.history[t] = history
        self.actions[t] = action
        self.log_probs[t] = log_prob
        self.rewards[t] = reward
        self.values[t] = value
        self.dones[t] = done

    def check_finite(self) -> None:
        for name in ("proprio", "elev", "history", "actions", "log_probs",
                     "rewards", "values", "bootstrap"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise FloatingPointError(f"non-finite values in rollout {name}")
