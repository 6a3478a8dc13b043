"""Heightfield storage, bilinear height queries, and the portable grid file
format (magic "ACRO" binary plus a JSON metadata sidecar)."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TILE_LENGTH = 18.0
TILE_WIDTH = 4.0
RESOLUTION = 0.025

_MAGIC = b"ACRO"
_VERSION = 1


@dataclass
class Heightfield:
    """Regular grid of terrain elevations covering an 18 x 4 m tile.

    heights[ix, iy] is the elevation at x = ix*resolution (along track),
    y = -width/2 + iy*resolution (lateral). spawn_pose is (x, y, yaw).
    """

    resolution: float
    heights: np.ndarray
    spawn_pose: tuple[float, float, float]
    goal_waypoints: list[tuple[float, float]]
    category: str = "Flat"
    level: int = 0
    seed: int = 0
    resolved_parameters: dict = field(default_factory=dict)
    obstacle_spans: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=np.float32)
        if self.heights.ndim != 2:
            raise ValueError("heights must be a 2-D grid")
        if not np.all(np.isfinite(self.heights)):
            raise ValueError("heights must be finite")
        if not self.goal_waypoints:
            raise ValueError("goal_waypoints must be non-empty")

    @property
    def length_cells(self) -> int:
        return self.heights.shape[0]

    @property
    def width_cells(self) -> int:
        return self.heights.shape[1]

    @property
    def length_m(self) -> float:
        return self.length_cells * self.resolution

    @property
    def width_m(self) -> float:
        return self.width_cells * self.resolution

    def height_at(self, x, y):
        """Bilinear elevation at world (x, y); out-of-bounds clamps to edge."""
        return sample_height(self.heights, self.resolution, self.width_m, x, y)


def sample_height(heights: np.ndarray, resolution: float, width_m: float, x, y):
    """Vectorized bilinear interpolation on the node grid with edge clamping."""
    nx, ny = heights.shape
    gx = np.clip(np.asarray(x, dtype=np.float64) / resolution, 0.0, nx - 1.0)
    gy = np.clip((np.asarray(y, dtype=np.float64) + width_m / 2.0) / resolution, 0.0, ny - 1.0)
    i0 = np.minimum(gx.astype(np.int64), nx - 2)
    j0 = np.minimum(gy.astype(np.int64), ny - 2)
    fx = gx - i0
    fy = gy - j0
    h = (heights[i0, j0] * (1 - fx) * (1 - fy)
         + heights[i0 + 1, j0] * fx * (1 - fy)
         + heights[i0, j0 + 1] * (1 - fx) * fy
         + heights[i0 + 1, j0 + 1] * fx * fy)
    return h


def save_heightfield(hf: Heightfield, path) -> None:
    """Write the binary grid and its JSON sidecar next to it."""
    path = Path(path)
    nx, ny = hf.heights.shape
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<f", hf.resolution))
        f.write(struct.pack("<II", nx, ny))
        f.write(np.ascontiguousarray(hf.heights, dtype="<f4").tobytes())
    sidecar = {
        "category": hf.category,
        "level": hf.level,
        "seed": hf.seed,
        "spawn_pose": list(hf.spawn_pose),
        "waypoints": [list(w) for w in hf.goal_waypoints],
        "resolved_parameters": hf.resolved_parameters,
        "obstacle_spans": [list(s) for s in hf.obstacle_spans],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_heightfield(path) -> Heightfield:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not a heightfield file (magic {magic!r})")
        (version,) = struct.unpack("<I", f.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported heightfield version {version}")
        (resolution,) = struct.unpack("<f", f.read(4))
        nx, ny = struct.unpack("<II", f.read(8))
        heights = np.frombuffer(f.read(nx * ny * 4), dtype="<f4").reshape(nx, ny)
    meta_path = path.with_suffix(".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
    else:
        meta = {}
    return Heightfield(
        resolution=float(resolution),
        heights=heights.copy(),
        spawn_pose=tuple(meta.get("spawn_pose", (0.75, 0.0, 0.0))),
        goal_waypoints=[tuple(w) for w in meta.get("waypoints", [(17.75, 0.0)])],
        category=meta.get("category", "Flat"),
        level=int(meta.get("level", 0)),
        seed=int(meta.get("seed", 0)),
        resolved_parameters=meta.get("resolved_parameters", {}),
        obstacle_spans=[tuple(s) for s in meta.get("obstacle_spans", [])],
    )
