"""Generalised advantage estimation over a rollout window."""

from __future__ import annotations

import numpy as np


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
        bootstrap: np.ndarray, gamma: float, lam: float):
    """Backward recursion over the window.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
    A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}

    with V_T taken from ``bootstrap``.  A done step both cuts the value
    bootstrap and resets the advantage accumulator, so transitions never
    leak across episode boundaries.  Returns (advantages, returns), each
    (T, N) float64, where returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    bootstrap = np.asarray(bootstrap, dtype=np.float64)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError("rewards, values, dones must share shape (T, N)")
    T, N = rewards.shape
    if bootstrap.shape != (N,):
        raise ValueError(f"bootstrap must have shape ({N},)")

    advantages = np.zeros((T, N), dtype=np.float64)
    next_value = bootstrap
    next_adv = np.zeros(N, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        live = 1.0 - dones[t].astype(np.float64)
        delta = rewards[t] + gamma * next_value * live - values[t]
        next_adv = delta + gamma * lam * live * next_adv
        advantages[t] = next_adv
        next_value = values[t]
    return advantages, advantages + values
