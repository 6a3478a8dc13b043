"""Leg geometry: four 3-DOF legs (abduction, hip flexion, knee) with
point feet. Joint coordinates are zero at the nominal standing pose.
"""

from __future__ import annotations

import numpy as np

L1 = 0.25              # thigh length
L2 = 0.25              # shank length
HIP0 = 0.4             # nominal hip flexion (rad)
KNEE0 = -0.8           # nominal knee flexion (rad)

# hip mount points in the base frame: LF, RF, LH, RH
HIP_OFFSETS = np.array([
    [0.25, 0.15, 0.0],
    [0.25, -0.15, 0.0],
    [-0.25, 0.15, 0.0],
    [-0.25, -0.15, 0.0],
])

# base height above flat ground with feet touching at the nominal pose
STAND_HEIGHT = L1 * np.cos(HIP0) + L2 * np.cos(HIP0 + KNEE0)

JOINT_LIMITS = np.tile([0.6, 1.2, 1.6], 4)      # |q| bounds per leg: abd, hip, knee

N_LEGS = 4
N_JOINTS = 12


def foot_positions(q12: np.ndarray):
    """Foot positions in the base frame and their joint Jacobians.

    q12: (..., 12) joint offsets from nominal. Returns positions (..., 4, 3)
    and Jacobians (..., 4, 3, 3) indexed [leg, coordinate, joint].
    """
    q = np.asarray(q12, dtype=np.float64).reshape(q12.shape[:-1] + (N_LEGS, 3))
    t1 = q[..., 0]
    t2 = HIP0 + q[..., 1]
    t23 = t2 + KNEE0 + q[..., 2]
    s1, c1 = np.sin(t1), np.cos(t1)
    s2, c2 = np.sin(t2), np.cos(t2)
    s23, c23 = np.sin(t23), np.cos(t23)

    px = L1 * s2 + L2 * s23
    pz_plane = -(L1 * c2 + L2 * c23)

    pos = np.empty(q.shape[:-1] + (3,))
    pos[..., 0] = px
    pos[..., 1] = -s1 * pz_plane
    pos[..., 2] = c1 * pz_plane
    pos = pos + HIP_OFFSETS

    dpx_d2 = L1 * c2 + L2 * c23
    dpx_d3 = L2 * c23
    dpz_d2 = L1 * s2 + L2 * s23
    dpz_d3 = L2 * s23

    jac = np.zeros(q.shape[:-1] + (3, 3))
    jac[..., 0, 1] = dpx_d2
    jac[..., 0, 2] = dpx_d3
    jac[..., 1, 0] = -c1 * pz_plane
    jac[..., 1, 1] = -s1 * dpz_d2
    jac[..., 1, 2] = -s1 * dpz_d3
    jac[..., 2, 0] = -s1 * pz_plane
    jac[..., 2, 1] = c1 * dpz_d2
    jac[..., 2, 2] = c1 * dpz_d3
    return pos, jac
