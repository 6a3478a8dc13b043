"""Vectorized quadruped environment over heightfield tiles.

The dynamics are a single rigid base (box inertia) with four massless 3-DOF
legs: PD torques drive virtual joint inertias, feet couple to the terrain
through a one-sided spring-damper with capped viscous friction, and contact
forces are transmitted to the base both linearly and as moments. This keeps
the full observation/action interface (12 actions, 51-D proprioception,
contact flags, terminations) at a fraction of a full articulated solver's
cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ..errors import ConfigError
from ..terrain.elevation import FORWARD_SHIFT, sample_elevation_batch
from ..terrain.heightfield import Heightfield
from . import rotation as rot
from .kinematics import JOINT_LIMITS, N_JOINTS, STAND_HEIGHT, foot_positions

GRAVITY = 9.81
DT = 0.005                  # physics substep
SUBSTEPS = 4                # control period = 4 substeps (50 Hz)
CONTROL_DT = DT * SUBSTEPS
MASS = 30.0
INERTIA = np.array([0.5, 1.0, 1.3])     # base box principal inertia
JOINT_INERTIA = 0.12
KP, KD = 150.0, 8.0
B_STANCE = 40.0             # loaded-leg joint friction, integrated implicitly
TORQUE_LIMIT = 80.0
ACTION_SCALE = 0.25
KN = 5.0e4                  # contact normal stiffness
CN = 500.0                  # contact normal damping
KT = 1.0e4                  # tangential anchor-spring stiffness
CT = 100.0                  # tangential viscous coefficient
MU = 0.7
BASE_LIN_DRAG = 5.0         # small always-on drag; bleeds hybrid contact limit cycles
BASE_ANG_DRAG = 2.0
CONTACT_CLEARANCE = 0.01
TIMEOUT = 20.0
TIP_LIMIT = 1.2
V_CMD_RANGE = (0.4, 0.8)
WAYPOINT_RADIUS = 0.6
SETTLE_PENETRATION = MASS * GRAVITY / 4.0 / KN

# bottom corners of the base box, for collision checks
BASE_CORNERS = np.array([
    [0.3, 0.2, -0.1], [0.3, -0.2, -0.1], [-0.3, 0.2, -0.1], [-0.3, -0.2, -0.1],
])

PROPRIO_DIM = 51
# frozen slice offsets of the 51-D proprioception vector
OBS_OFFSETS = {
    "linear_vel": 0, "angular_vel": 3, "roll_pitch": 6, "oracle_heading": 8,
    "v_cmd": 10, "joints_pos": 11, "joints_vel": 23, "prev_action": 35,
    "feet_contact": 47,
}

REASON_TIP = "TipOver"
REASON_BASE = "BaseCollision"
REASON_OOB = "OutOfBounds"
REASON_TIMEOUT = "Timeout"

_TROT_A = np.array([True, False, False, True])
_TROT_B = np.array([False, True, True, False])


@dataclass
class EpisodeStatus:
    terminated: bool
    reason: str | None
    along_track_distance: float
    fault: bool = False

    def __post_init__(self):
        if self.terminated == (self.reason is None):
            raise ValueError("reason must be None exactly when not terminated")


@dataclass
class RobotState:
    """Single-robot snapshot of the vectorized state."""
    base_pos: np.ndarray
    base_quat: np.ndarray
    lin_vel: np.ndarray
    ang_vel: np.ndarray
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    feet_contact: np.ndarray
    feet_pos: np.ndarray
    last_action: np.ndarray
    torques: np.ndarray
    time: float
    v_cmd: float
    env: "VecEnv | None" = dc_field(default=None, repr=False)


class VecEnv:
    """N quadrupeds stepping in lockstep, each on its own heightfield tile."""

    def __init__(self, fields: list[Heightfield], v_cmd, seed: int = 0,
                 forward_shift: float = FORWARD_SHIFT, timeout: float = TIMEOUT):
        self.fields = list(fields)
        self.n = len(self.fields)
        v = np.broadcast_to(np.asarray(v_cmd, dtype=np.float64), (self.n,)).copy()
        if np.any(v < V_CMD_RANGE[0]) or np.any(v > V_CMD_RANGE[1]):
            raise ConfigError(f"v_cmd must lie in {V_CMD_RANGE}")
        self.v_cmd = v
        self.seed = seed
        self.forward_shift = forward_shift
        self.timeout = float(timeout)
        n = self.n
        self.pos = np.zeros((n, 3))
        self.quat = rot.quat_identity(n)
        self.lin_vel = np.zeros((n, 3))
        self.ang_vel = np.zeros((n, 3))
        self.q = np.zeros((n, N_JOINTS))
        self.qd = np.zeros((n, N_JOINTS))
        self.prev_action = np.zeros((n, N_JOINTS))
        self.torques = np.zeros((n, N_JOINTS))
        self.prev_torques = np.zeros((n, N_JOINTS))
        self.time = np.zeros(n)
        self.contacts = np.zeros((n, 4), dtype=bool)
        self.contact_forces = np.zeros((n, 4, 3))
        self.contact_anchor = np.zeros((n, 4, 2))
        self.air_start = np.zeros((n, 4))
        self.waypoint_idx = np.zeros(n, dtype=np.int64)
        self.spawn_x = np.zeros(n)
        self.base_contact_count = np.zeros(n, dtype=np.int64)
        self.fault = np.zeros(n, dtype=bool)
        self.trot_pattern = np.full(n, -1, dtype=np.int64)
        self.trot_enter_time = np.zeros(n)
        self.trot_stride = np.zeros(n)
        self.feet_pos = np.zeros((n, 4, 3))
        self._trot_now = np.zeros(n, dtype=bool)
        self.reset()

    # ------------------------------------------------------------------
    def set_field(self, i: int, field: Heightfield, v_cmd: float | None = None):
        self.fields[i] = field
        if v_cmd is not None:
            if not V_CMD_RANGE[0] <= v_cmd <= V_CMD_RANGE[1]:
                raise ConfigError(f"v_cmd must lie in {V_CMD_RANGE}")
            self.v_cmd[i] = v_cmd

    def _ground_under(self, points_xy_x, points_xy_y):
        """Terrain height under (N, K) world points, grouped by shared tiles."""
        out = np.empty(points_xy_x.shape)
        groups: dict[int, list[int]] = {}
        for i, f in enumerate(self.fields):
            groups.setdefault(id(f), []).append(i)
        for ids in groups.values():
            idx = np.asarray(ids)
            f = self.fields[idx[0]]
            out[idx] = f.height_at(points_xy_x[idx], points_xy_y[idx])
        return out

    def reset(self, mask=None):
        idx = np.arange(self.n) if mask is None else np.nonzero(mask)[0]
        if idx.size == 0:
            return
        for i in idx:
            f = self.fields[i]
            sx, sy, syaw = f.spawn_pose
            ground = float(f.height_at(sx, sy))
            self.pos[i] = (sx, sy, ground + STAND_HEIGHT - SETTLE_PENETRATION)
            self.quat[i] = rot.quat_from_yaw(syaw)
            self.spawn_x[i] = sx
        self.lin_vel[idx] = 0.0
        self.ang_vel[idx] = 0.0
        self.q[idx] = 0.0
        self.qd[idx] = 0.0
        self.prev_action[idx] = 0.0
        self.torques[idx] = 0.0
        self.prev_torques[idx] = 0.0
        self.time[idx] = 0.0
        self.air_start[idx] = 0.0
        self.waypoint_idx[idx] = 0
        self.base_contact_count[idx] = 0
        self.fault[idx] = False
        self.trot_pattern[idx] = -1
        self.trot_enter_time[idx] = 0.0
        self.trot_stride[idx] = 0.0
        self._trot_now[idx] = False
        self._refresh_contacts(idx)

    def _refresh_contacts(self, idx):
        local, _ = foot_positions(self.q[idx])
        rm = rot.quat_to_matrix(self.quat[idx])
        world = self.pos[idx, None, :] + np.einsum("nij,nlj->nli", rm, local)
        ground = self._ground_under_subset(idx, world[..., 0], world[..., 1])
        self.contacts[idx] = (world[..., 2] - ground) < CONTACT_CLEARANCE
        self.feet_pos[idx] = world
        self.contact_anchor[idx] = world[..., :2]
        self.contact_forces[idx] = 0.0

    def _ground_under_subset(self, idx, px, py):
        out = np.empty(px.shape)
        for k, i in enumerate(idx):
            out[k] = self.fields[i].height_at(px[k], py[k])
        return out

    # ------------------------------------------------------------------
    def step(self, actions: np.ndarray) -> dict:
        """Advance one control period (4 physics substeps) for all agents.

        Returns a per-step info dict of vectorized quantities used by the
        reward library and the trainer. Terminated agents are NOT auto-reset.
        """
        actions = np.asarray(actions, dtype=np.float64).reshape(self.n, N_JOINTS)
        prev_qd = self.qd.copy()
        prev_contacts = self.contacts.copy()
        self.prev_torques = self.torques.copy()
        touchdown_air = np.zeros((self.n, 4))
        target = ACTION_SCALE * actions
        for _ in range(SUBSTEPS):
            self._substep(target)
            self.time = self.time + DT
        # gait bookkeeping at control-step granularity
        now = self.time
        lifted = prev_contacts & ~self.contacts
        self.air_start[lifted] = np.broadcast_to(now[:, None], (self.n, 4))[lifted]
        landed = ~prev_contacts & self.contacts
        t_air = np.broadcast_to(now[:, None], (self.n, 4)) - self.air_start
        touchdown_air[landed] = t_air[landed]
        self._update_trot(now)
        joint_acc = (self.qd - prev_qd) / CONTROL_DT
        self.prev_action = actions.copy()

        vertical = self.contact_forces[..., 2]
        lateral = np.linalg.norm(self.contact_forces[..., :2], axis=-1)
        stumble = (vertical > 1.0) & (lateral > 2.0 * vertical)
        info = {
            "joint_acc": joint_acc,
            "contacts": self.contacts.copy(),
            "prev_contacts": prev_contacts,
            "contact_forces": self.contact_forces.copy(),
            "base_contact_count": self.base_contact_count.copy(),
            "touchdown_air_time": touchdown_air,
            "all_feet_air": ~self.contacts.any(axis=1),
            "stumble": stumble,
            "trotting": self._trot_flags(),
            "torques": self.torques.copy(),
            "prev_torques": self.prev_torques.copy(),
        }
        return info

    def _substep(self, target):
        tau_pd = np.clip(KP * (target - self.q) - KD * self.qd,
                         -TORQUE_LIMIT, TORQUE_LIMIT)
        local, jac = foot_positions(self.q)
        rm = rot.quat_to_matrix(self.quat)
        feet = self.pos[:, None, :] + np.einsum("nij,nlj->nli", rm, local)
        ground = self._ground_under(feet[..., 0], feet[..., 1])
        pen = ground - feet[..., 2]

        omega_w = np.einsum("nij,nj->ni", rm, self.ang_vel)
        r_world = np.einsum("nij,nlj->nli", rm, local)
        qd_leg = self.qd.reshape(self.n, 4, 3)
        foot_vel_local = np.einsum("nlkj,nlj->nlk", jac, qd_leg)
        joint_vel_world = np.einsum("nij,nlj->nli", rm, foot_vel_local)
        foot_vel = (self.lin_vel[:, None, :]
                    + np.cross(omega_w[:, None, :], r_world)
                    + joint_vel_world)

        fz = np.where(pen > 0, KN * pen - CN * foot_vel[..., 2], 0.0)
        fz = np.maximum(fz, 0.0)
        loaded = fz > 0.0
        # stick-slip friction: a tangential anchor spring, capped by mu*Fn;
        # when the cap binds the anchor slides to sit at the cap
        self.contact_anchor[~loaded] = feet[..., :2][~loaded]
        vt = foot_vel[..., :2]
        ft = -KT * (feet[..., :2] - self.contact_anchor) - CT * vt
        ft_norm = np.linalg.norm(ft, axis=-1)
        cap = MU * fz
        over = ft_norm > cap
        scale = np.where(over, cap / np.maximum(ft_norm, 1e-12), 1.0)
        ft = ft * scale[..., None]
        self.contact_anchor[over] = feet[..., :2][over] + (ft / KT)[over]
        forces = np.zeros((self.n, 4, 3))
        forces[..., :2] = ft
        forces[..., 2] = fz
        self.contact_forces = forces
        self.feet_pos = feet

        f_base = forces.sum(axis=1)
        f_base[:, 2] -= MASS * GRAVITY
        f_base -= BASE_LIN_DRAG * self.lin_vel
        torque_w = np.cross(r_world, forces).sum(axis=1)
        torque_b = np.einsum("nji,nj->ni", rm, torque_w)
        torque_b -= BASE_ANG_DRAG * self.ang_vel

        f_body = np.einsum("nji,nlj->nli", rm, forces)
        tau_contact = np.einsum("nlkj,nlk->nlj", jac, f_body).reshape(self.n, N_JOINTS)

        # semi-implicit Euler
        self.lin_vel += DT * f_base / MASS
        self.pos += DT * self.lin_vel
        gyro = np.cross(self.ang_vel, INERTIA * self.ang_vel)
        self.ang_vel += DT * (torque_b - gyro) / INERTIA
        self.quat = rot.integrate_quat(self.quat, self.ang_vel, DT)
        qdd = (tau_pd + tau_contact) / JOINT_INERTIA
        self.qd += DT * qdd
        # loaded-leg structural friction, implicit so it is stable at any
        # coefficient; bleeds landing-impulse energy out of the light joints
        drag = 1.0 + DT * B_STANCE / JOINT_INERTIA * np.repeat(loaded, 3, axis=1)
        self.qd /= drag
        self.q += DT * self.qd
        over = np.abs(self.q) > JOINT_LIMITS
        if over.any():
            outward = np.sign(self.qd) == np.sign(self.q)
            self.qd[over & outward] = 0.0
            self.q = np.clip(self.q, -JOINT_LIMITS, JOINT_LIMITS)
        self.torques = tau_pd

        clearance = feet[..., 2] - ground
        self.contacts = clearance < CONTACT_CLEARANCE

        corners = self.pos[:, None, :] + np.einsum("nij,lj->nli", rm, BASE_CORNERS)
        cg = self._ground_under(corners[..., 0], corners[..., 1])
        self.base_contact_count = (corners[..., 2] < cg).sum(axis=1)

    def _update_trot(self, now):
        is_a = (self.contacts == _TROT_A).all(axis=1)
        is_b = (self.contacts == _TROT_B).all(axis=1)
        pattern = np.where(is_a, 0, np.where(is_b, 1, -1))
        switched = (pattern >= 0) & (pattern != self.trot_pattern)
        completed = switched & (self.trot_pattern >= 0)
        self.trot_stride[completed] = (now - self.trot_enter_time)[completed]
        self.trot_enter_time[switched] = now[switched]
        self.trot_pattern[switched] = pattern[switched]
        self._trot_now = pattern >= 0

    def _trot_flags(self):
        return self._trot_now & (self.trot_stride > 0.3)

    # ------------------------------------------------------------------
    def statuses(self) -> list[EpisodeStatus]:
        finite = (np.isfinite(self.pos).all(axis=1)
                  & np.isfinite(self.quat).all(axis=1)
                  & np.isfinite(self.q).all(axis=1)
                  & np.isfinite(self.qd).all(axis=1))
        roll, pitch, _ = rot.roll_pitch_yaw(self.quat)
        out = []
        for i in range(self.n):
            along = float(self.pos[i, 0] - self.spawn_x[i])
            if not finite[i]:
                out.append(EpisodeStatus(True, REASON_BASE, along, fault=True))
                self.fault[i] = True
            elif self.base_contact_count[i] > 0:
                out.append(EpisodeStatus(True, REASON_BASE, along))
            elif abs(roll[i]) > TIP_LIMIT or abs(pitch[i]) > TIP_LIMIT:
                out.append(EpisodeStatus(True, REASON_TIP, along))
            elif abs(self.pos[i, 1]) > self.fields[i].width_m / 2.0:
                out.append(EpisodeStatus(True, REASON_OOB, along))
            elif self.time[i] >= self.timeout:
                out.append(EpisodeStatus(True, REASON_TIMEOUT, along))
            else:
                out.append(EpisodeStatus(False, None, along))
        return out

    # ------------------------------------------------------------------
    def _advance_waypoints(self):
        for i in range(self.n):
            wps = self.fields[i].goal_waypoints
            while self.waypoint_idx[i] < len(wps) - 1:
                wx, wy = wps[self.waypoint_idx[i]]
                d = np.hypot(wx - self.pos[i, 0], wy - self.pos[i, 1])
                if d < WAYPOINT_RADIUS or self.pos[i, 0] > wx + 0.3:
                    self.waypoint_idx[i] += 1
                else:
                    break

    def targets(self):
        """Next two waypoints per agent (final one duplicated at the end)."""
        self._advance_waypoints()
        t1 = np.empty((self.n, 2))
        t2 = np.empty((self.n, 2))
        for i in range(self.n):
            wps = self.fields[i].goal_waypoints
            k = int(self.waypoint_idx[i])
            t1[i] = wps[min(k, len(wps) - 1)]
            t2[i] = wps[min(k + 1, len(wps) - 1)]
        return t1, t2

    def observe(self) -> np.ndarray:
        """The 51-D proprioception block for every agent."""
        t1, t2 = self.targets()
        v_body = rot.rotate_inverse(self.quat, self.lin_vel)
        roll, pitch, yaw = rot.roll_pitch_yaw(self.quat)
        psi1 = rot.wrap_angle(np.arctan2(t1[:, 1] - self.pos[:, 1],
                                         t1[:, 0] - self.pos[:, 0]) - yaw)
        psi2 = rot.wrap_angle(np.arctan2(t2[:, 1] - self.pos[:, 1],
                                         t2[:, 0] - self.pos[:, 0]) - yaw)
        obs = np.concatenate([
            v_body, self.ang_vel,
            np.stack([roll, pitch], axis=1),
            np.stack([psi1, psi2], axis=1),
            self.v_cmd[:, None],
            self.q, self.qd, self.prev_action,
            self.contacts.astype(np.float64),
        ], axis=1)
        return obs.astype(np.float32)

    def elevation(self) -> np.ndarray:
        _, _, yaw = rot.roll_pitch_yaw(self.quat)
        poses = np.column_stack([self.pos, yaw])
        return sample_elevation_batch(self.fields, poses, self.forward_shift)

    def along_track(self) -> np.ndarray:
        return self.pos[:, 0] - self.spawn_x


# ----------------------------------------------------------------------
# Single-robot functional API


def _snapshot(env: VecEnv) -> RobotState:
    return RobotState(
        base_pos=env.pos[0].copy(), base_quat=env.quat[0].copy(),
        lin_vel=env.lin_vel[0].copy(), ang_vel=env.ang_vel[0].copy(),
        joint_pos=env.q[0].copy(), joint_vel=env.qd[0].copy(),
        feet_contact=env.contacts[0].astype(np.float64),
        feet_pos=env.feet_pos[0].copy(),
        last_action=env.prev_action[0].copy(), torques=env.torques[0].copy(),
        time=float(env.time[0]), v_cmd=float(env.v_cmd[0]), env=env)


def reset(field: Heightfield, v_cmd: float, seed: int = 0) -> RobotState:
    env = VecEnv([field], v_cmd, seed=seed)
    return _snapshot(env)


def step(state: RobotState, action: np.ndarray,
         dt: float = CONTROL_DT) -> tuple[RobotState, EpisodeStatus]:
    if not np.all(np.isfinite(action)):
        raise ValueError("action must be finite")
    env = state.env
    if env is None:
        raise ValueError("state is not attached to an environment (use reset())")
    n_ctrl = max(1, int(round(dt / CONTROL_DT)))
    for _ in range(n_ctrl):
        env.step(np.asarray(action)[None, :])
    status = env.statuses()[0]
    return _snapshot(env), status


def observe(state: RobotState, field: Heightfield, targets=None) -> np.ndarray:
    """Assemble the 51-D proprioception vector for a single robot."""
    if targets is None:
        env = state.env
        if env is not None:
            return env.observe()[0]
        targets = field.goal_waypoints[:2]
    targets = list(targets)
    if len(targets) == 1:
        targets = [targets[0], targets[0]]
    v_body = rot.rotate_inverse(state.base_quat, state.lin_vel)
    roll, pitch, yaw = rot.roll_pitch_yaw(state.base_quat)
    psis = []
    for wx, wy in targets[:2]:
        psis.append(rot.wrap_angle(
            np.arctan2(wy - state.base_pos[1], wx - state.base_pos[0]) - yaw))
    obs = np.concatenate([
        v_body, state.ang_vel, [roll, pitch], psis, [state.v_cmd],
        state.joint_pos, state.joint_vel, state.last_action,
        np.asarray(state.feet_contact, dtype=np.float64),
    ])
    return obs.astype(np.float32)
