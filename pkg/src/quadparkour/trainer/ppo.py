"""Clipped-surrogate policy optimization over a collected rollout."""

from __future__ import annotations

import numpy as np

from ..numerics.tensor import Tape, Tensor, clip, exp, minimum, tmean
from ..numerics.optim import Adam
from ..models import Policy
from .buffer import RolloutBuffer
from .gae import gae


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero-mean unit-std advantages (std guard for degenerate batches)."""
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def ppo_update(policy: Policy, optimizer: Adam, buf: RolloutBuffer, *,
               gamma: float, lam: float, clip_eps: float, epochs: int,
               minibatches: int, lr: float, entropy_coef: float,
               value_coef: float, rng: np.random.Generator) -> dict:
    """Run `epochs` passes of `minibatches` clipped-PPO steps on the buffer.

    Advantages are GAE-normalized once over the whole window. The std clamp
    is re-applied after every optimizer step so exploration noise never
    exceeds its cap mid-epoch. A minibatch whose loss is non-finite is
    skipped and counted instead of corrupting the parameters.
    """
    advantages, returns = gae(buf.rewards, buf.values, buf.dones,
                              buf.bootstrap, gamma, lam)
    adv = normalize_advantages(advantages.reshape(-1))
    ret = returns.reshape(-1)

    n = buf.n_transitions
    shape = policy.shape
    proprio = buf.proprio.reshape(n, shape.proprio_dim)
    elev = buf.elev.reshape((n,) + tuple(shape.elev_shape))
    history = buf.history.reshape(n, shape.history_len, shape.proprio_dim)
    actions = buf.actions.reshape(n, shape.n_actions)
    old_lp = buf.log_probs.reshape(n)

    stats = {"actor_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
             "clip_fraction": 0.0, "skipped_minibatches": 0}
    n_steps = 0
    for _ in range(epochs):
        perm = rng.permutation(n)
        for mb in np.array_split(perm, minibatches):
            with Tape() as tape:
                lp, ent, v = policy.evaluate_actions(
                    proprio[mb], elev[mb], history[mb], actions[mb])
                ratio = exp(lp - Tensor(old_lp[mb]))
                adv_t = Tensor(adv[mb])
                surr = minimum(ratio * adv_t,
                               clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv_t)
                actor_loss = -tmean(surr)
                verr = v - Tensor(ret[mb])
                value_loss = tmean(verr * verr)
                loss = actor_loss + value_coef * value_loss - entropy_coef * ent
                if not np.isfinite(loss.data):
                    stats["skipped_minibatches"] += 1
                    continue
                optimizer.zero_grad()
                tape.backward(loss)
            optimizer.step(lr=lr)
            policy.clamp_std()
            ratio_np = np.exp(lp.data - old_lp[mb])
            stats["actor_loss"] += float(actor_loss.data)
            stats["value_loss"] += float(value_loss.data)
            stats["entropy"] += float(ent.data)
            stats["clip_fraction"] += float(np.mean(np.abs(ratio_np - 1.0) > clip_eps))
            n_steps += 1
    for key in ("actor_loss", "value_loss", "entropy", "clip_fraction"):
        stats[key] /= max(n_steps, 1)
    stats["mean_value_target"] = float(ret.mean())
    stats["skipped_updates"] = optimizer.skipped_updates
    return stats
