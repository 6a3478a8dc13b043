"""Reward term library: thirteen named terms, per-term logging, ablations.

Each term is computed pre-coefficient with its sign built into the formula
(penalties are negative), and coefficients are non-negative magnitudes; the
total is the coefficient-weighted sum over enabled terms. Disabled terms
contribute exactly zero without touching any other term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RuntimeFault

REWARD_TERMS = (
    "goal_tracking",
    "velocity_tracking",
    "base_angular_vel",
    "joint_acceleration",
    "collision",
    "action_rate",
    "torque_variation",
    "torques",
    "dof_error",
    "stumbling",
    "trotting",
    "feet_in_air",
    "feet_air_time",
)

DEFAULT_COEFFICIENTS = {
    "goal_tracking": 1.5,
    "velocity_tracking": 1.0,
    "base_angular_vel": 0.05,
    "joint_acceleration": 2.5e-7,
    "collision": 1.0,
    "action_rate": 0.1,
    "torque_variation": 1e-7,
    "torques": 2e-4,
    "dof_error": 0.04,
    "stumbling": 0.5,
    "trotting": 0.8,
    "feet_in_air": 2.0,
    "feet_air_time": 0.5,
}

AIR_TIME_TARGET = 0.5       # seconds; touchdown bonus is (t_air - target)


def compute_terms(
    psi1, speed_toward, v_cmd, ang_vel, joint_acc, base_contacts,
    action, prev_action, torques, prev_torques, joint_pos,
    stumble, trotting, all_feet_air, touchdown_air_time, is_flat,
) -> dict[str, np.ndarray]:
    """Pre-coefficient term values for a batch of agents.

    All array arguments carry a leading agent axis; `touchdown_air_time`
    holds, per foot, the just-ended flight duration at the step the foot
    lands and zero otherwise. `speed_toward` is the planar base velocity
    projected onto the direction of the next goal, so retreating at the
    commanded pace scores near zero instead of a full tracking reward.
    """
    psi1 = np.asarray(psi1, dtype=np.float64)
    d_speed = np.asarray(speed_toward, dtype=np.float64) - np.asarray(v_cmd, dtype=np.float64)
    ang = np.asarray(ang_vel, dtype=np.float64)
    da = np.asarray(action, dtype=np.float64) - np.asarray(prev_action, dtype=np.float64)
    dtau = np.asarray(torques, dtype=np.float64) - np.asarray(prev_torques, dtype=np.float64)
    tau = np.asarray(torques, dtype=np.float64)
    q = np.asarray(joint_pos, dtype=np.float64)
    t_air = np.asarray(touchdown_air_time, dtype=np.float64)
    landed = t_air > 0.0
    return {
        "goal_tracking": np.exp(-psi1 ** 2 / 0.25),
        "velocity_tracking": np.exp(-d_speed ** 2 / 0.25),
        "base_angular_vel": -(ang[..., 0] ** 2 + ang[..., 1] ** 2),
        "joint_acceleration": -np.sum(np.asarray(joint_acc, dtype=np.float64) ** 2, axis=-1),
        "collision": -np.asarray(base_contacts, dtype=np.float64),
        "action_rate": -np.sum(da ** 2, axis=-1),
        "torque_variation": -np.sum(dtau ** 2, axis=-1),
        "torques": -np.sum(tau ** 2, axis=-1),
        "dof_error": -np.sum(q ** 2, axis=-1),
        "stumbling": -np.any(np.asarray(stumble, dtype=bool), axis=-1).astype(np.float64),
        "trotting": (np.asarray(trotting, dtype=bool)
                     & np.asarray(is_flat, dtype=bool)).astype(np.float64),
        "feet_in_air": -np.asarray(all_feet_air, dtype=bool).astype(np.float64),
        "feet_air_time": np.sum((t_air - AIR_TIME_TARGET) * landed, axis=-1),
    }


def weight_terms(terms: dict[str, np.ndarray], coefficients=None,
                 disabled=()) -> dict[str, np.ndarray]:
    """Coefficient-weighted contributions plus their sum under key 'total'."""
    coefficients = DEFAULT_COEFFICIENTS if coefficients is None else coefficients
    unknown = set(disabled) - set(REWARD_TERMS)
    if unknown:
        raise ValueError(f"unknown reward terms: {sorted(unknown)}")
    out: dict[str, np.ndarray] = {}
    total = None
    for name in REWARD_TERMS:
        if name in disabled:
            out[name] = np.zeros_like(np.asarray(terms[name], dtype=np.float64))
        else:
            out[name] = coefficients[name] * np.asarray(terms[name], dtype=np.float64)
        total = out[name] if total is None else total + out[name]
    out["total"] = total
    return out


@dataclass
class RewardBreakdown:
    """Per-term weighted contributions for one agent and their sum."""
    goal_tracking: float
    velocity_tracking: float
    base_angular_vel: float
    joint_acceleration: float
    collision: float
    action_rate: float
    torque_variation: float
    torques: float
    dof_error: float
    stumbling: float
    trotting: float
    feet_in_air: float
    feet_air_time: float
    total: float


def compute(prev_state, state, action, prev_action, env_is_flat: bool,
            coefficients=None, disabled=()) -> RewardBreakdown:
    """Single-robot reward between two consecutive states.

    Gait and contact-force signals are read from the attached environment;
    the remaining terms derive from the two snapshots alone.
    """
    env = state.env
    if env is None:
        raise ValueError("state is not attached to an environment (use reset())")
    from .sim.env import CONTROL_DT

    t1, _ = env.targets()
    yaw = np.arctan2(
        2 * (state.base_quat[0] * state.base_quat[3]
             + state.base_quat[1] * state.base_quat[2]),
        1 - 2 * (state.base_quat[2] ** 2 + state.base_quat[3] ** 2))
    psi1 = np.arctan2(t1[0, 1] - state.base_pos[1],
                      t1[0, 0] - state.base_pos[0]) - yaw
    psi1 = np.pi - np.mod(np.pi - psi1, 2 * np.pi)

    joint_acc = (state.joint_vel - prev_state.joint_vel) / CONTROL_DT
    forces = env.contact_forces[0]
    vertical = forces[:, 2]
    lateral = np.hypot(forces[:, 0], forces[:, 1])
    stumble = (vertical > 1.0) & (lateral > 2.0 * vertical)
    landed = (np.asarray(prev_state.feet_contact) == 0) & (np.asarray(state.feet_contact) > 0)
    t_air = np.where(landed, state.time - env.air_start[0], 0.0)

    gx = t1[0, 0] - state.base_pos[0]
    gy = t1[0, 1] - state.base_pos[1]
    gn = max(np.hypot(gx, gy), 1e-9)
    terms = compute_terms(
        psi1=np.array([psi1]),
        speed_toward=np.array([(state.lin_vel[0] * gx + state.lin_vel[1] * gy) / gn]),
        v_cmd=np.array([state.v_cmd]),
        ang_vel=state.ang_vel[None, :],
        joint_acc=joint_acc[None, :],
        base_contacts=np.array([env.base_contact_count[0]]),
        action=np.asarray(action)[None, :],
        prev_action=np.asarray(prev_action)[None, :],
        torques=state.torques[None, :],
        prev_torques=env.prev_torques[0][None, :],
        joint_pos=state.joint_pos[None, :],
        stumble=stumble[None, :],
        trotting=env._trot_flags()[:1],
        all_feet_air=np.array([not np.any(state.feet_contact > 0)]),
        touchdown_air_time=t_air[None, :],
        is_flat=np.array([env_is_flat]),
    )
    weighted = weight_terms(terms, coefficients, disabled)
    return RewardBreakdown(**{k: float(v[0]) for k, v in weighted.items()})


def sum_squared_torques(trajectory) -> float:
    """Mean over steps of the squared-torque sum: an energy-loss proxy."""
    tau = np.asarray(list(trajectory), dtype=np.float64)
    if tau.size == 0:
        raise RuntimeFault("sum_squared_torques of an empty trajectory is undefined")
    return float(np.mean(np.sum(tau ** 2, axis=-1)))
