"""Acceptance suite: one test per release criterion, each at its stated
tolerance. Run with -v for the per-criterion pass/fail lines; every test
also prints a one-line summary (visible with -s or on failure).

The learning checks (criteria 6-7) train small-but-real configurations on
the single-core build target; network widths are reduced with identical
wiring to fit the stated runtime budgets.
"""

import dataclasses

import numpy as np
import pytest

import quadparkour.numerics as qn
from geometry_oracles import extract_parameters
from quadparkour.config import ExperimentConfig, ablation_table, config_delta
from quadparkour.curriculum import CurriculumState, evaluate_window
from quadparkour.evaluation import expected_time, run_course, score
from quadparkour.models import (
    NetworkShape,
    Policy,
    load_checkpoint,
    save_checkpoint,
)
from quadparkour.numerics.optim import Adam
from quadparkour.sim.env import OBS_OFFSETS, VecEnv
from quadparkour.terrain import (
    CATEGORIES,
    MAP_COLS,
    MAP_ROWS,
    ObstacleSpec,
    difficulty,
    generate,
)
from quadparkour.trainer import (
    Collector,
    INPUT_MASKS,
    RolloutBuffer,
    TrainConfig,
    gae,
    metrics_digest,
    ppo_update,
    run,
)
from test_numerics import conv1d_loops, conv2d_loops

# Sim-compatible network with reduced widths: same wiring, same interfaces,
# small enough that the toy training runs fit their runtime budgets.
SMALL_SHAPE = NetworkShape(
    proprio_dim=51, n_actions=12, elev_shape=(34, 31),
    elev_conv=((4, 3, 2, 1), (4, 3, 2, 1)), elev_code=8,
    history_len=10, hist_reduce=6, hist_conv=((4, 3, 2),), hist_code=6,
    hidden=(64, 64))


def _report(n: int, label: str, detail: str) -> None:
    print(f"criterion {n:02d} {label}: PASS ({detail})")


def _metric_column(out_dir, name):
    rows = (out_dir / "metrics.csv").read_text().strip().splitlines()
    idx = rows[0].split(",").index(name)
    return np.array([float(r.split(",")[idx]) for r in rows[1:]])


# ----------------------------------------------------------------------
def test_criterion_01_score_formula_exactness():
    assert score(35.0, 0.6, 1) == pytest.approx(0.85, abs=1e-12)
    for v_cmd in (0.4, 0.6, 0.8):
        assert score(expected_time(v_cmd), v_cmd, 0) == 1.0
    # an attempt cut off by the time limit scores exactly zero
    policy = Policy(SMALL_SHAPE, seed=0)
    result, _ = run_course(policy, 0.6, seed=0, time_limit=0.5)
    assert not result.completed and result.score == 0.0
    _report(1, "score formula", "0.85 / 1.0 / incomplete=0 exact")


# ----------------------------------------------------------------------
def test_criterion_02_curriculum_oracle():
    def oracle(distance, v_cmd):
        ratio = distance / (v_cmd * 20.0)
        if ratio > 0.8:
            return "Promote"
        if ratio <= 0.4:
            return "Demote"
        return "Stay"

    rng = np.random.default_rng(42)
    cases = 0
    for _ in range(10_000):
        v_cmd = float(rng.uniform(0.4, 0.8))
        distance = float(rng.uniform(0.0, 16.0))
        state = CurriculumState("Steps", 5, distance_traversed=distance,
                                v_cmd=v_cmd)
        assert evaluate_window(state).value == oracle(distance, v_cmd)
        cases += 1
    # planted boundary cases: promotion is strict, demotion is inclusive
    for v_cmd in (0.4, 0.6, 0.8):
        for ratio, expect in ((0.8, "Stay"), (0.4, "Demote")):
            state = CurriculumState("Steps", 5,
                                    distance_traversed=ratio * v_cmd * 20.0,
                                    v_cmd=v_cmd)
            assert evaluate_window(state).value == expect
            cases += 1
    # level formula spot checks against hand evaluation
    assert difficulty("Steps", 10)["height"] == pytest.approx(0.45)
    assert difficulty("Stairs", 0) == pytest.approx(
        {"tread": 0.5, "riser": 0.05})
    assert difficulty("Gaps", 19)["gap_size"] == pytest.approx(0.955)
    _report(2, "curriculum oracle", f"{cases} cases, 100% agreement")


# ----------------------------------------------------------------------
def test_criterion_03_observation_layout():
    assert OBS_OFFSETS == {
        "linear_vel": 0, "angular_vel": 3, "roll_pitch": 6,
        "oracle_heading": 8, "v_cmd": 10, "joints_pos": 11,
        "joints_vel": 23, "prev_action": 35, "feet_contact": 47}
    env = VecEnv([generate(ObstacleSpec("Flat", 0), seed=0)], 0.6, seed=0)
    assert env.observe().shape == (1, 51)
    assert (MAP_ROWS, MAP_COLS) == (34, 31)
    assert MAP_ROWS * MAP_COLS == 1054
    assert env.elevation().shape == (1, 34, 31)
    shape = NetworkShape()
    assert (shape.proprio_dim, shape.history_len) == (51, 10)
    assert shape.hist_reduce == 30
    assert shape.hist_code == 20
    policy = Policy(shape, seed=0)
    hist = np.zeros((2, 10, 51), dtype=np.float32)
    assert policy.encode_history(hist).data.shape == (2, 20)
    _report(3, "observation layout", "51-D offsets, 34x31=1054, 51x10->20")


# ----------------------------------------------------------------------
def _fd_check(policy, loss_fn, rtol):
    """Central finite differences over every parameter component."""
    with qn.Tape() as tape:
        tape.backward(loss_fn())
    eps = 1e-6
    checked = 0
    for name, p in policy.params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        for i in range(p.data.size):
            keep = p.data.flat[i]
            p.data.flat[i] = keep + eps
            up = float(loss_fn().data)
            p.data.flat[i] = keep - eps
            dn = float(loss_fn().data)
            p.data.flat[i] = keep
            fd = (up - dn) / (2 * eps)
            a = analytic.flat[i] if analytic.ndim else float(analytic)
            assert abs(a - fd) <= rtol * max(1.0, abs(a), abs(fd)), (
                f"{name}[{i}]: analytic {a} vs fd {fd}")
            checked += 1
        p.grad = None
    return checked


def test_criterion_04_gradient_correctness():
    qn.set_default_dtype(np.float64)
    try:
        policy = Policy(NetworkShape.miniature(), seed=3)
        rng = np.random.default_rng(7)
        s = policy.shape
        obs = rng.normal(size=(2, s.proprio_dim))
        emap = rng.normal(size=(2,) + s.elev_shape)
        hist = rng.normal(size=(2, s.history_len, s.proprio_dim))
        acts = rng.normal(size=(2, s.n_actions))
        mix = rng.normal(size=(2, s.n_actions))

        def actor_loss():
            e = policy.encode_elevation(emap)
            h = policy.encode_history(hist)
            return qn.tsum(policy.action_mean(obs, e, h) * qn.tensor(mix))

        def critic_loss():
            e = policy.encode_elevation(emap)
            h = policy.encode_history(hist)
            return qn.tsum(policy.value(obs, e, h))

        def ppo_path_loss():
            lp, ent, val = policy.evaluate_actions(obs, emap, hist, acts)
            return qn.tsum(lp) + qn.tmean(ent) + qn.tsum(val)

        n = 0
        for fn in (actor_loss, critic_loss, ppo_path_loss):
            n += _fd_check(policy, fn, rtol=1e-4)
    finally:
        qn.set_default_dtype(np.float32)

    # convolution layers against nested-loop oracles, bit-exact
    rng = np.random.default_rng(12)
    x2 = qn.tensor(rng.standard_normal((3, 2, 9, 8)))
    k2 = qn.tensor(rng.standard_normal((4, 2, 3, 3)))
    b2 = qn.tensor(rng.standard_normal(4))
    got = qn.conv2d(x2, k2, stride=2, padding=1, bias=b2)
    ref = conv2d_loops(x2.data, k2.data, 2, 1, b2.data)
    assert np.array_equal(got.data, ref.astype(np.float32))
    x1 = qn.tensor(rng.standard_normal((3, 4, 10)))
    k1 = qn.tensor(rng.standard_normal((5, 4, 3)))
    b1 = qn.tensor(rng.standard_normal(5))
    got1 = qn.conv1d(x1, k1, stride=2, bias=b1)
    ref1 = conv1d_loops(x1.data, k1.data, 2, b1.data)
    assert np.array_equal(got1.data, ref1.astype(np.float32))
    _report(4, "gradient correctness",
            f"{n} parameter components at 1e-4, convs bit-exact")


# ----------------------------------------------------------------------
def _gae_oracle(r, v, d, boot, gamma, lam):
    T, N = r.shape
    adv = np.zeros((T, N))
    for j in range(N):
        acc = 0.0
        next_v = boot[j]
        for t in reversed(range(T)):
            live = 1.0 - float(d[t, j])
            delta = r[t, j] + gamma * next_v * live - v[t, j]
            acc = delta + gamma * lam * live * acc
            adv[t, j] = acc
            next_v = v[t, j]
    return adv, adv + v


def _bandit_run(seed, iters=200, n=32):
    """PPO on a two-arm bandit: +1 for a positive first action, else -1."""
    shape = NetworkShape.miniature()
    policy = Policy(shape, seed=seed)
    opt = Adam(policy.params, 1e-2)
    rng = np.random.default_rng(seed + 1000)
    obs = np.zeros((n, shape.proprio_dim), dtype=np.float32)
    elev = np.zeros((n,) + shape.elev_shape, dtype=np.float32)
    hist = np.zeros((n, shape.history_len, shape.proprio_dim),
                    dtype=np.float32)
    dones = np.ones(n, dtype=bool)
    e = policy.encode_elevation(elev).data
    h = policy.encode_history(hist).data
    for _ in range(iters):
        act, lp = policy.act(obs, e, h, stochastic=True, rng=rng)
        value = policy.value(obs, e, h).data
        reward = np.where(act[:, 0] > 0.0, 1.0, -1.0)
        buf = RolloutBuffer(1, n, shape.proprio_dim, shape.elev_shape,
                            shape.history_len, shape.n_actions)
        buf.store(0, obs, elev, hist, act, lp, reward, value, dones)
        ppo_update(policy, opt, buf, gamma=0.99, lam=0.95, clip_eps=0.2,
                   epochs=2, minibatches=2, lr=1e-2, entropy_coef=0.0,
                   value_coef=0.5, rng=rng)
    final, _ = policy.act(obs[:1], e[:1], h[:1], stochastic=False)
    return float(final[0, 0]) > 0.0


def test_criterion_05_gae_and_ppo_oracles():
    rng = np.random.default_rng(9)
    for T, N in ((4, 3), (16, 8), (32, 5)):
        r = rng.normal(size=(T, N))
        v = rng.normal(size=(T, N))
        d = rng.random((T, N)) < 0.2
        boot = rng.normal(size=N)
        adv, ret = gae(r, v, d, boot, 0.99, 0.95)
        oadv, oret = _gae_oracle(r, v, d, boot, 0.99, 0.95)
        assert np.allclose(adv, oadv, rtol=0, atol=1e-6)
        assert np.allclose(ret, oret, rtol=0, atol=1e-6)
    wins = sum(_bandit_run(seed) for seed in range(20))
    assert wins >= 19, f"only {wins}/20 bandit runs found the better arm"
    _report(5, "gae/ppo oracles",
            f"gae within 1e-6, bandit {wins}/20 converged")


# ----------------------------------------------------------------------
def _std_toy_config(std_cap):
    # the strong entropy bonus pushes the std upward into the cap
    return TrainConfig(total_iterations=500, pretrain_iterations=500,
                       n_agents=8, horizon=6, epochs=1, minibatches=2,
                       entropy_coef=1.0, learning_rate=3e-3, seed=5,
                       std_cap=std_cap)


def test_criterion_06_std_clipping(tmp_path):
    run(_std_toy_config(True), tmp_path / "capped", shape=SMALL_SHAPE)
    capped = _metric_column(tmp_path / "capped", "policy_std")
    assert capped.max() == 1.0
    run(_std_toy_config(False), tmp_path / "free", shape=SMALL_SHAPE)
    free = _metric_column(tmp_path / "free", "policy_std")
    assert free.max() > 1.0       # permitted once the cap is ablated
    _report(6, "std clipping",
            f"capped max {capped.max():.6g} exactly, ablated max "
            f"{free.max():.4g}")
