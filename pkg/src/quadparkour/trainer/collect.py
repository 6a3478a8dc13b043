"""Experience collection: policy rollouts over the vectorized sim with
per-agent curriculum bookkeeping and observation-ablation masks."""

from __future__ import annotations

import dataclasses

import numpy as np

from .. import curriculum, rewards
from ..errors import ConfigError
from ..models import Policy
from ..sim import rotation as rot
from ..sim.env import OBS_OFFSETS, V_CMD_RANGE, VecEnv
from ..terrain.categories import ObstacleSpec, generate
from ..terrain.heightfield import RESOLUTION
from .buffer import RolloutBuffer

# Maskable observation blocks: name -> [start, stop) columns of the 51-D
# proprioception. "history" is also maskable but zeroes the whole rolling
# buffer instead of a slice. The heading oracle and the velocity command
# are deliberately absent: the policy cannot act without a task.
INPUT_MASKS = {
    "linear_vel": (OBS_OFFSETS["linear_vel"], OBS_OFFSETS["angular_vel"]),
    "angular_vel": (OBS_OFFSETS["angular_vel"], OBS_OFFSETS["roll_pitch"]),
    "roll_pitch": (OBS_OFFSETS["roll_pitch"], OBS_OFFSETS["oracle_heading"]),
    "joints_pos": (OBS_OFFSETS["joints_pos"], OBS_OFFSETS["joints_vel"]),
    "joints_vel": (OBS_OFFSETS["joints_vel"], OBS_OFFSETS["prev_action"]),
    "prev_action": (OBS_OFFSETS["prev_action"], OBS_OFFSETS["feet_contact"]),
    "feet_contact": (OBS_OFFSETS["feet_contact"], 51),
}

MASKABLE_INPUTS = tuple(INPUT_MASKS) + ("history",)


def apply_input_masks(obs: np.ndarray, masked: tuple[str, ...]) -> np.ndarray:
    """Zero the masked blocks of a (..., 51) observation batch (copy)."""
    out = np.array(obs, copy=True)
    for name in masked:
        if name == "history":
            continue
        lo, hi = INPUT_MASKS[name]
        out[..., lo:hi] = 0.0
    return out


class Collector:
    """Owns the rollout loop: acts, steps, rewards, and resets.

    Terminated agents are judged by the curriculum immediately (expected
    distance is always v_cmd * 20 s), moved to a freshly generated field of
    their possibly-new level with a resampled velocity command, and reset.
    All randomness (action noise, terrain seeds, level reassignment, v_cmd)
    flows from the single generator passed in, so a seeded collection is
    reproducible bit-exactly.
    """

    def __init__(self, policy: Policy, envs: VecEnv,
                 curricula: list[curriculum.CurriculumState],
                 rng: np.random.Generator, *,
                 coefficients: dict[str, float] | None = None,
                 disabled_rewards: tuple[str, ...] = (),
                 masked_inputs: tuple[str, ...] = (),
                 terrain_resolution: float = RESOLUTION):
        if len(curricula) != envs.n:
            raise ConfigError("one curriculum state per agent required")
        unknown = set(masked_inputs) - set(MASKABLE_INPUTS)
        if unknown:
            raise ConfigError(f"unknown input masks: {sorted(unknown)}")
        self.policy = policy
        self.envs = envs
        self.curricula = list(curricula)
        self.rng = rng
        self.coefficients = coefficients
        self.disabled_rewards = tuple(disabled_rewards)
        self.masked_inputs = tuple(masked_inputs)
        self.terrain_resolution = float(terrain_resolution)
        n = envs.n
        shape = policy.shape
        self.history = np.zeros((n, shape.history_len, shape.proprio_dim),
                                dtype=np.float32)
        self.prev_action = np.zeros((n, shape.n_actions), dtype=np.float64)
        # outcome counters since the last drain
        self.episodes_done = 0
        self.decision_counts = {d.value: 0 for d in curriculum.Decision}
        self.terminal_distances: list[float] = []

    # ------------------------------------------------------------------
    def _observe_masked(self) -> np.ndarray:
        return apply_input_masks(self.envs.observe(), self.masked_inputs)

    def _push_history(self, obs: np.ndarray) -> None:
        self.history[:, :-1] = self.history[:, 1:]
        self.history[:, -1] = obs

    def _history_input(self) -> np.ndarray:
        if "history" in self.masked_inputs:
            return np.zeros_like(self.history)
        return self.history

    def _reward_signals(self, actions: np.ndarray, info: dict) -> dict[str, np.ndarray]:
        envs = self.envs
        t1, _ = envs.targets()
        _, _, yaw = rot.roll_pitch_yaw(envs.quat)
        gx = t1[:, 0] - envs.pos[:, 0]
        gy = t1[:, 1] - envs.pos[:, 1]
        psi1 = rot.wrap_angle(np.arctan2(gy, gx) - yaw)
        gn = np.maximum(np.hypot(gx, gy), 1e-9)
        is_flat = np.array([c.category == "Flat" for c in self.curricula])
        terms = rewards.compute_terms(
            psi1=psi1,
            speed_toward=(envs.lin_vel[:, 0] * gx + envs.lin_vel[:, 1] * gy) / gn,
            v_cmd=envs.v_cmd,
            ang_vel=envs.ang_vel,
            joint_acc=info["joint_acc"],
            base_contacts=info["base_contact_count"],
            action=actions,
            prev_action=self.prev_action,
            torques=info["torques"],
            prev_torques=info["prev_torques"],
            joint_pos=envs.q,
            stumble=info["stumble"],
            trotting=info["trotting"],
            all_feet_air=info["all_feet_air"],
            touchdown_air_time=info["touchdown_air_time"],
            is_flat=is_flat,
        )
        return rewards.weight_terms(terms, self.coefficients, self.disabled_rewards)

    def _handle_terminations(self, statuses) -> np.ndarray:
        done = np.array([s.terminated for s in statuses])
        for i in np.nonzero(done)[0]:
            state = dataclasses.replace(
                self.curricula[i],
                distance_traversed=max(0.0, statuses[i].along_track_distance))
            decision = curriculum.evaluate_window(state, elapsed=float(self.envs.time[i]))
            new_state = curriculum.apply(decision, state, self.rng)
            v_cmd = float(self.rng.uniform(*V_CMD_RANGE))
            if new_state.category == "Flat":
                # featureless and seed-independent: keep the shared tile
                field = self.envs.fields[int(i)]
            else:
                seed = int(self.rng.integers(0, 2 ** 31))
                field = generate(ObstacleSpec(new_state.category, new_state.level),
                                 seed, resolution=self.terrain_resolution)
            self.envs.set_field(int(i), field, v_cmd=v_cmd)
            self.curricula[i] = dataclasses.replace(new_state, v_cmd=v_cmd)
            self.episodes_done += 1
            self.decision_counts[decision.value] += 1
            self.terminal_distances.append(state.distance_traversed)
        if done.any():
            self.envs.reset(done)
            self.history[done] = 0.0
            self.prev_action[done] = 0.0
        return done

    # ------------------------------------------------------------------
    def rollout(self, horizon: int) -> tuple[RolloutBuffer, dict]:
        """Collect `horizon` steps from every agent; returns the filled
        buffer (with bootstrap values) and per-term reward means."""
        shape = self.policy.shape
        buf = RolloutBuffer(horizon, self.envs.n, shape.proprio_dim,
                            shape.elev_shape, shape.history_len, shape.n_actions)
        term_sums = {name: 0.0 for name in rewards.REWARD_TERMS}
        total_sum = 0.0
        for t in range(horizon):
            obs = self._observe_masked()
            self._push_history(obs)
            hist = self._history_input()
            elev = self.envs.elevation()
            e_code = self.policy.encode_elevation(elev).data
            h_code = self.policy.encode_history(hist).data
            action, log_prob = self.policy.act(obs, e_code, h_code,
                                               stochastic=True, rng=self.rng)
            value = self.policy.value(obs, e_code, h_code).data
            info = self.envs.step(action)
            weighted = self._reward_signals(action, info)
            done = self._handle_terminations(self.envs.statuses())
            buf.store(t, obs, elev, hist, action, log_prob,
                      weighted["total"], value, done)
            self.prev_action = np.asarray(action, dtype=np.float64).copy()
            self.prev_action[done] = 0.0
            for name in rewards.REWARD_TERMS:
                term_sums[name] += float(weighted[name].sum())
            total_sum += float(weighted["total"].sum())
        # bootstrap from the post-rollout state (ignored after done steps)
        obs = self._observe_masked()
        hist_next = self.history.copy()
        hist_next[:, :-1] = hist_next[:, 1:]
        hist_next[:, -1] = obs
        if "history" in self.masked_inputs:
            hist_next[:] = 0.0
        e_code = self.policy.encode_elevation(self.envs.elevation()).data
        h_code = self.policy.encode_history(hist_next).data
        buf.bootstrap[:] = self.policy.value(obs, e_code, h_code).data
        n_steps = horizon * self.envs.n
        stats = {f"reward/{k}": v / n_steps for k, v in term_sums.items()}
        stats["reward/total"] = total_sum / n_steps
        return buf, stats

    # ------------------------------------------------------------------
    def drain_episode_stats(self) -> dict:
        """Episode outcomes accumulated since the previous call."""
        stats = {
            "episodes": self.episodes_done,
            "decisions": dict(self.decision_counts),
            "mean_terminal_distance": (float(np.mean(self.terminal_distances))
                                       if self.terminal_distances else 0.0),
            "levels": [c.level for c in self.curricula],
        }
        self.episodes_done = 0
        self.decision_counts = {d.value: 0 for d in curriculum.Decision}
        self.terminal_distances = []
        return stats
