"""Lightweight rigid-body quadruped simulation with the 51-D proprioception
interface, heightfield contact, and episode termination logic."""

from .env import (
    ACTION_SCALE,
    CONTROL_DT,
    DT,
    OBS_OFFSETS,
    PROPRIO_DIM,
    SUBSTEPS,
    TIMEOUT,
    EpisodeStatus,
    RobotState,
    VecEnv,
    observe,
    reset,
    step,
)
from .kinematics import JOINT_LIMITS, N_JOINTS, STAND_HEIGHT, foot_positions
from . import rotation

__all__ = [
    "ACTION_SCALE", "CONTROL_DT", "DT", "OBS_OFFSETS", "PROPRIO_DIM",
    "SUBSTEPS", "TIMEOUT", "EpisodeStatus", "RobotState", "VecEnv", "observe",
    "reset", "step", "JOINT_LIMITS", "N_JOINTS", "STAND_HEIGHT",
    "foot_positions", "rotation",
]
