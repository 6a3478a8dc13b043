"""Robot-centric elevation sampling: a 34 x 31 grid over a 1.6 x 1.0 m
window, long axis forward, optionally shifted ahead of the base."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .heightfield import Heightfield

MAP_ROWS = 34          # forward axis samples over 1.6 m
MAP_COLS = 31          # lateral axis samples over 1.0 m
WINDOW_LENGTH = 1.6
WINDOW_WIDTH = 1.0
FORWARD_SHIFT = 0.3


@dataclass
class ElevationMap:
    samples: np.ndarray
    origin_offset: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.shape != (MAP_ROWS, MAP_COLS):
            raise ValueError(f"elevation map must be {MAP_ROWS}x{MAP_COLS}")

    @property
    def n_samples(self) -> int:
        return self.samples.size


def _local_offsets(forward_shift: float):
    dx = np.linspace(-WINDOW_LENGTH / 2, WINDOW_LENGTH / 2, MAP_ROWS) + forward_shift
    dy = np.linspace(-WINDOW_WIDTH / 2, WINDOW_WIDTH / 2, MAP_COLS)
    return dx, dy


def sample_elevation(field: Heightfield, base_pose,
                     forward_shift: float = FORWARD_SHIFT) -> ElevationMap:
    """Sample terrain heights around a base pose (x, y, z, yaw), rotated with
    yaw and expressed relative to base height."""
    bx, by, bz, yaw = base_pose
    dx, dy = _local_offsets(forward_shift)
    lx = dx[:, None] * np.ones(MAP_COLS)
    ly = np.ones((MAP_ROWS, 1)) * dy[None, :]
    c, s = np.cos(yaw), np.sin(yaw)
    wx = bx + c * lx - s * ly
    wy = by + s * lx + c * ly
    h = field.height_at(wx, wy)
    return ElevationMap(samples=(h - bz).astype(np.float32), origin_offset=forward_shift)


def sample_elevation_batch(fields, poses: np.ndarray,
                           forward_shift: float = FORWARD_SHIFT) -> np.ndarray:
    """Vectorized sampling for N agents; poses is (N, 4) of (x, y, z, yaw).

    Agents sharing a Heightfield object are gathered in one lookup.
    """
    n = len(fields)
    out = np.empty((n, MAP_ROWS, MAP_COLS), dtype=np.float32)
    dx, dy = _local_offsets(forward_shift)
    lx = np.broadcast_to(dx[:, None], (MAP_ROWS, MAP_COLS))
    ly = np.broadcast_to(dy[None, :], (MAP_ROWS, MAP_COLS))
    groups: dict[int, list[int]] = {}
    for i, f in enumerate(fields):
        groups.setdefault(id(f), []).append(i)
    for ids in groups.values():
        f = fields[ids[0]]
        idx = np.asarray(ids)
        c = np.cos(poses[idx, 3])[:, None, None]
        s = np.sin(poses[idx, 3])[:, None, None]
        wx = poses[idx, 0][:, None, None] + c * lx - s * ly
        wy = poses[idx, 1][:, None, None] + s * lx + c * ly
        h = f.height_at(wx, wy)
        out[idx] = (h - poses[idx, 2][:, None, None]).astype(np.float32)
    return out
