"""Policy evaluation drivers: course runs, aggregate reports, skill sweeps."""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from ..models import Policy
from ..rewards import REWARD_TERMS
from ..sim.env import CONTROL_DT, VecEnv
from ..terrain.categories import PARAM_RANGES, ObstacleSpec, generate
from .course import BarkourCourse, build_course
from .scoring import BarkourResult, detect_penalties, score
from .stats import wilson_interval

COURSE_TIME_LIMIT = 60.0


class _PolicyDriver:
    """Steps one policy on one env, maintaining the history buffer."""

    def __init__(self, policy: Policy, env: VecEnv, stochastic: bool,
                 rng: np.random.Generator | None):
        self.policy = policy
        self.env = env
        self.stochastic = stochastic
        self.rng = rng
        shape = policy.shape
        self.history = np.zeros((env.n, shape.history_len, shape.proprio_dim),
                                dtype=np.float32)

    def step(self) -> dict:
        obs = self.env.observe()
        self.history[:, :-1] = self.history[:, 1:]
        self.history[:, -1] = obs
        e = self.policy.encode_elevation(self.env.elevation()).data
        h = self.policy.encode_history(self.history).data
        action, _ = self.policy.act(obs, e, h, stochastic=self.stochastic,
                                    rng=self.rng)
        return self.env.step(action)


def run_course(policy: Policy, v_cmd: float, seed: int = 0, *,
               course: BarkourCourse | None = None, stochastic: bool = False,
               time_limit: float = COURSE_TIME_LIMIT) -> tuple[BarkourResult, dict]:
    """One scored attempt at the course; also returns the trajectory dump."""
    course = course or build_course()
    env = VecEnv([course.field], v_cmd, seed=seed, timeout=time_limit)
    rng = np.random.default_rng(seed)
    driver = _PolicyDriver(policy, env, stochastic, rng)
    times, positions, stumbles, torques = [], [], [], []
    completed = False
    t_run = time_limit
    while True:
        info = driver.step()
        times.append(float(env.time[0]))
        positions.append(env.pos[0, :2].copy())
        stumbles.append(bool(info["stumble"].any()))
        torques.append(env.torques[0].copy())
        if env.pos[0, 0] >= course.finish_x:
            completed = True
            t_run = float(env.time[0])
            break
        if env.statuses()[0].terminated:
            t_run = float(env.time[0])
            break
    trajectory = {
        "time": np.asarray(times),
        "pos": np.asarray(positions),
        "stumble": np.asarray(stumbles),
        "torques": np.asarray(torques),
    }
    penalties = detect_penalties(trajectory, course)
    run_score = score(t_run, v_cmd, penalties) if completed else 0.0
    return (BarkourResult(completed=completed, t_run=t_run, v_cmd=v_cmd,
                          penalties=penalties, score=run_score), trajectory)


def barkour_report(policy: Policy, runs: int = 30, v_cmd: float = 0.6,
                   seed: int = 0) -> dict:
    """Aggregate scored runs: completion rate, mean score, and the mean
    sum of squared torques over completed runs (energy proxy)."""
    course = build_course()
    results: list[BarkourResult] = []
    torque_means: list[float] = []
    for k in range(runs):
        result, traj = run_course(policy, v_cmd, seed=seed + k, course=course)
        results.append(result)
        if result.completed:
            tau = np.asarray(traj["torques"], dtype=np.float64)
            torque_means.append(float(np.mean(np.sum(tau ** 2, axis=-1))))
    completed = sum(r.completed for r in results)
    return {
        "runs": [asdict(r) for r in results],
        "v_cmd": v_cmd,
        "completion_rate": completed / runs,
        "mean_score": float(np.mean([r.score for r in results])),
        "mean_penalties": float(np.mean([r.penalties for r in results])),
        "mean_sum_squared_torques": (float(np.mean(torque_means))
                                     if torque_means else None),
    }


# ----------------------------------------------------------------------
# skill sweeps


def resolve_fraction(category: str, fraction: float) -> dict[str, float]:
    """Parameter set at a fraction of the category's difficulty range."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("difficulty fraction must lie in [0, 1]")
    return {name: alpha + fraction * (beta - alpha)
            for name, (alpha, beta) in PARAM_RANGES[category].items()}


def policy_episode_runner(policy: Policy, *, stochastic: bool = False,
                          v_cmd: float = 0.6, flat_survive_s: float = 5.0):
    """Build a run_episode(category, fraction, seed) -> bool callable.

    Success means clearing the end of the first obstacle span without a
    termination; on featureless terrain it means simply staying up for
    `flat_survive_s` seconds.
    """

    def run_episode(category: str, fraction: float, seed: int) -> bool:
        params = resolve_fraction(category, fraction)
        level = min(int(fraction * 20), 19)
        field = generate(ObstacleSpec(category, level, dict(params)), seed=seed)
        env = VecEnv([field], v_cmd, seed=seed)
        driver = _PolicyDriver(policy, env, stochastic,
                               np.random.default_rng(seed))
        survive_only = not field.obstacle_spans
        goal_x = np.inf if survive_only else field.obstacle_spans[0][1] + 0.3
        while True:
            driver.step()
            if env.pos[0, 0] >= goal_x:
                return True
            if survive_only and env.time[0] >= flat_survive_s:
                return True
            if env.statuses()[0].terminated:
                return False

    return run_episode


def skill_sweep(run_episode, category: str, difficulty_grid, runs: int = 30,
                seed: int = 0, level: float = 0.90) -> list[dict]:
    """Success probability per difficulty point with binomial bounds.

    `run_episode(category, fraction, seed) -> bool` is injected so sweeps
    can drive a trained policy, a scripted stub, or a recorded replay.
    """
    grid = [float(f) for f in difficulty_grid]
    out = []
    base = np.random.SeedSequence(seed)
    for frac, child in zip(grid, base.spawn(len(grid))):
        seeds = child.generate_state(runs, dtype=np.uint32)
        successes = sum(bool(run_episode(category, frac, int(s)))
                        for s in seeds)
        lo, hi = wilson_interval(successes, runs, level)
        out.append({"category": category, "difficulty": frac,
                    "successes": successes, "runs": runs,
                    "probability": successes / runs, "lo": lo, "hi": hi})
    return out
