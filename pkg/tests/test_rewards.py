"""Reward library tests: pinned term values, coefficient relations, ablation
isolation, and the energy proxy."""

import numpy as np
import pytest

from quadparkour.errors import RuntimeFault
from quadparkour.rewards import (
    DEFAULT_COEFFICIENTS,
    REWARD_TERMS,
    compute,
    compute_terms,
    sum_squared_torques,
    weight_terms,
)
from quadparkour.sim import reset, step
from quadparkour.terrain import ObstacleSpec, generate


def base_signals(n=3, rng=None):
    rng = rng or np.random.default_rng(0)
    return dict(
        psi1=rng.normal(0, 0.5, n),
        speed_xy=rng.uniform(0, 1, n),
        v_cmd=np.full(n, 0.6),
        ang_vel=rng.normal(0, 0.3, (n, 3)),
        joint_acc=rng.normal(0, 5, (n, 12)),
        base_contacts=rng.integers(0, 3, n),
        action=rng.normal(0, 0.5, (n, 12)),
        prev_action=rng.normal(0, 0.5, (n, 12)),
        torques=rng.normal(0, 10, (n, 12)),
        prev_torques=rng.normal(0, 10, (n, 12)),
        joint_pos=rng.normal(0, 0.2, (n, 12)),
        stumble=rng.random((n, 4)) < 0.3,
        trotting=rng.random(n) < 0.5,
        all_feet_air=rng.random(n) < 0.3,
        touchdown_air_time=np.where(rng.random((n, 4)) < 0.4,
                                    rng.uniform(0.1, 1.0, (n, 4)), 0.0),
        is_flat=rng.random(n) < 0.5,
    )


# ---------------------------------------------------------------- pinned values

def test_zero_action_change_zeroes_action_rate():
    s = base_signals()
    s["action"] = s["prev_action"].copy()
    assert np.all(compute_terms(**s)["action_rate"] == 0.0)


def test_all_feet_in_air_term_is_minus_one():
    s = base_signals()
    s["all_feet_air"] = np.array([True, False, True])
    t = compute_terms(**s)["feet_in_air"]
    assert np.array_equal(t, [-1.0, 0.0, -1.0])


def test_trotting_zero_off_flat():
    s = base_signals()
    s["trotting"] = np.array([True, True, True])
    s["is_flat"] = np.array([False, True, False])
    t = compute_terms(**s)["trotting"]
    assert np.array_equal(t, [0.0, 1.0, 0.0])


def test_goal_and_velocity_peaks():
    s = base_signals()
    s["psi1"] = np.zeros(3)
    s["speed_xy"] = np.full(3, 0.6)
    t = compute_terms(**s)
    assert np.all(t["goal_tracking"] == 1.0)
    assert np.all(t["velocity_tracking"] == 1.0)


def test_penalty_terms_are_non_positive():
    t = compute_terms(**base_signals(n=64))
    for name in ("base_angular_vel", "joint_acceleration", "collision",
                 "action_rate", "torque_variation", "torques", "dof_error",
                 "stumbling", "feet_in_air"):
        assert np.all(t[name] <= 0.0), name


def test_feet_air_time_touchdown_sum():
    s = base_signals()
    s["touchdown_air_time"] = np.array([
        [0.7, 0.0, 0.0, 0.3],   # two touchdowns: (0.7-0.5) + (0.3-0.5)
        [0.0, 0.0, 0.0, 0.0],
        [0.5, 0.5, 0.5, 0.5],
    ])
    t = compute_terms(**s)["feet_air_time"]
    assert t == pytest.approx([0.2 - 0.2, 0.0, 0.0])


# ---------------------------------------------------------------- coefficients

def test_paper_coefficient_ratios():
    c = DEFAULT_COEFFICIENTS
    assert abs(c["torque_variation"]) == pytest.approx(1e-6 * abs(c["action_rate"]))
    assert abs(c["joint_acceleration"]) == pytest.approx(2.5 * abs(c["torque_variation"]))


def test_total_is_weighted_sum():
    terms = compute_terms(**base_signals(n=16))
    w = weight_terms(terms)
    expect = sum(w[name] for name in REWARD_TERMS)
    assert np.allclose(w["total"], expect, atol=0.0)


def test_linearity_in_coefficients():
    terms = compute_terms(**base_signals(n=8))
    base = weight_terms(terms)
    doubled = dict(DEFAULT_COEFFICIENTS)
    doubled["torques"] *= 2.0
    w2 = weight_terms(terms, coefficients=doubled)
    assert np.array_equal(w2["torques"], 2.0 * base["torques"])
    for name in REWARD_TERMS:
        if name != "torques":
            assert np.array_equal(w2[name], base[name])


def test_ablation_isolation():
    terms = compute_terms(**base_signals(n=8))
    full = weight_terms(terms)
    without = weight_terms(terms, disabled=("velocity_tracking",))
    assert np.all(without["velocity_tracking"] == 0.0)
    for name in REWARD_TERMS:
        if name != "velocity_tracking":
            assert np.array_equal(without[name], full[name])
    assert np.allclose(without["total"],
                       full["total"] - full["velocity_tracking"], atol=0.0)


def test_unknown_disable_rejected():
    terms = compute_terms(**base_signals())
    with pytest.raises(ValueError):
        weight_terms(terms, disabled=("no_such_term",))


# ---------------------------------------------------------------- single robot

def test_compute_from_snapshots():
    flat = generate(ObstacleSpec("Flat", 0), seed=0)
    s0 = reset(flat, 0.6)
    a = np.zeros(12)
    s1, _ = step(s0, a)
    br = compute(s0, s1, a, np.zeros(12), env_is_flat=True)
    assert br.action_rate == 0.0
    assert br.collision == 0.0
    assert br.feet_in_air == 0.0
    assert 0.0 < br.goal_tracking <= DEFAULT_COEFFICIENTS["goal_tracking"]
    parts = [getattr(br, n) for n in REWARD_TERMS]
    assert br.total == pytest.approx(sum(parts), abs=1e-12)


# ---------------------------------------------------------------- energy proxy

def test_sum_squared_torques_zero_and_constant():
    assert sum_squared_torques(np.zeros((5, 12))) == 0.0
    assert sum_squared_torques(np.ones((7, 12))) == pytest.approx(12.0)


def test_sum_squared_torques_matches_log_replay():
    rng = np.random.default_rng(1)
    traj = rng.normal(0, 20, (40, 12))
    logged = [row.copy() for row in traj]          # simulate a dumped log
    direct = sum_squared_torques(traj)
    replayed = sum_squared_torques(np.array(logged))
    assert direct == replayed


def test_sum_squared_torques_empty_rejected():
    with pytest.raises(RuntimeFault):
        sum_squared_torques([])
