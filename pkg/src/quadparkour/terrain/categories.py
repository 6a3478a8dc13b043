"""The eight training obstacle categories: difficulty interpolation and
procedural heightfield generation.

Difficulty level l in [0, 19] resolves each parameter to
alpha + l * (beta - alpha) / 20, where level 0 is always the easy end of the
range (for stair tread and stone length the easy end is the larger value, so
those ranges run downward).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .heightfield import Heightfield, RESOLUTION, TILE_LENGTH, TILE_WIDTH

N_LEVELS = 20

# (easy, hard) endpoints per parameter; lengths in meters, angles in degrees.
PARAM_RANGES = {
    "Flat": {},
    "Steps": {"height": (0.1, 0.8)},
    "Boxes": {"height": (0.1, 1.0)},
    "Stairs": {"tread": (0.5, 0.3), "riser": (0.05, 0.25)},
    "Gaps": {"gap_size": (0.1, 1.0)},
    "InclinedBoxes": {"tilt": (0.0, 50.0), "stone_length": (1.8, 0.9)},
    "Slopes": {"angle": (10.0, 30.0)},
    "WeavePoles": {"spreading": (0.1, 0.7)},
}

CATEGORIES = tuple(PARAM_RANGES)

# Parameters measured in meters, subject to the grid-realizability check.
_METRIC_PARAMS = {"height", "tread", "riser", "gap_size", "stone_length", "spreading"}


def difficulty(category: str, level: int) -> dict[str, float]:
    """Resolve the parameter set for a category at a difficulty level."""
    if category not in PARAM_RANGES:
        raise ConfigError(f"unknown obstacle category {category!r}")
    if not isinstance(level, (int, np.integer)) or not 0 <= level < N_LEVELS:
        raise ConfigError(f"level must be an integer in [0, {N_LEVELS - 1}], got {level!r}")
    return {
        name: alpha + level * (beta - alpha) / N_LEVELS
        for name, (alpha, beta) in PARAM_RANGES[category].items()
    }


@dataclass
class ObstacleSpec:
    category: str
    level: int
    resolved_parameters: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        resolved = difficulty(self.category, self.level)
        if not self.resolved_parameters:
            self.resolved_parameters = resolved
        else:
            for name, value in self.resolved_parameters.items():
                if name not in resolved:
                    raise ConfigError(f"unknown parameter {name!r} for {self.category}")
                lo, hi = sorted(PARAM_RANGES[self.category][name])
                if not lo <= value <= hi:
                    raise ConfigError(
                        f"{self.category}.{name}={value} outside range [{lo}, {hi}]")


def generate(spec: ObstacleSpec, seed: int, resolution: float = RESOLUTION) -> Heightfield:
    """Deterministically build the heightfield realizing a resolved spec."""
    for name, value in spec.resolved_parameters.items():
        if name in _METRIC_PARAMS and resolution > value / 2.0:
            raise ConfigError(
                f"resolution {resolution} too coarse for {spec.category}.{name}={value}"
                " (cell must be <= parameter/2)")
    nx = int(round(TILE_LENGTH / resolution))
    ny = int(round(TILE_WIDTH / resolution))
    x = np.arange(nx) * resolution
    y = -TILE_WIDTH / 2.0 + np.arange(ny) * resolution
    heights = np.zeros((nx, ny), dtype=np.float64)
    rng = np.random.default_rng(seed)
    builder = _BUILDERS[spec.category]
    waypoints, spans = builder(heights, x, y, spec.resolved_parameters, rng)
    waypoints = list(waypoints) + [(TILE_LENGTH - 0.25, 0.0)]
    return Heightfield(
        resolution=resolution,
        heights=heights.astype(np.float32),
        spawn_pose=(0.75, 0.0, 0.0),
        goal_waypoints=waypoints,
        category=spec.category,
        level=spec.level,
        seed=seed,
        resolved_parameters=dict(spec.resolved_parameters),
        obstacle_spans=spans,
    )


def _band(heights, x, x0, x1, value):
    heights[(x >= x0) & (x < x1), :] = value


def _build_flat(heights, x, y, params, rng):
    return [], []


def _build_steps(heights, x, y, params, rng):
    # alternating raised platforms and ground-level gaps across the full width
    h = params["height"]
    waypoints, spans = [], []
    cursor = 4.0 + rng.uniform(-0.3, 0.3)
    while cursor + 1.4 < 14.5:
        length = rng.uniform(1.0, 1.4)
        _band(heights, x, cursor, cursor + length, h)
        waypoints.append((cursor + length / 2.0, 0.0))
        spans.append((cursor, cursor + length))
        cursor += length + rng.uniform(1.0, 1.4)
    return waypoints, spans


def _build_boxes(heights, x, y, params, rng):
    h = params["height"]
    waypoints, spans = [], []
    for center in (5.5, 9.0, 12.5):
        cx = center + rng.uniform(-0.5, 0.5)
        cy = rng.uniform(-0.4, 0.4)
        length = rng.uniform(1.2, 1.6)
        width = rng.uniform(2.2, 2.8)
        mask_x = (x >= cx - length / 2) & (x < cx + length / 2)
        mask_y = (y >= cy - width / 2) & (y < cy + width / 2)
        heights[np.ix_(mask_x, mask_y)] = h
        waypoints.append((cx, cy))
        spans.append((cx - length / 2, cx + length / 2))
    return waypoints, spans


def _build_stairs(heights, x, y, params, rng):
    tread, riser = params["tread"], params["riser"]
    n = 5
    x0 = 4.0 + rng.uniform(-0.3, 0.3)
    plateau = 1.5
    up_end = x0 + n * tread
    down_end = up_end + plateau + n * tread
    ascending = (x >= x0) & (x < up_end)
    k = np.floor((x[ascending] - x0) / tread) + 1
    heights[ascending, :] = (k * riser)[:, None]
    _band(heights, x, up_end, up_end + plateau, n * riser)
    descending = (x >= up_end + plateau) & (x < down_end)
    k = np.floor((x[descending] - up_end - plateau) / tread) + 1
    heights[descending, :] = ((n - k) * riser)[:, None]
    waypoint = (up_end + plateau / 2.0, 0.0)
    return [waypoint], [(x0, down_end)]


def _build_gaps(heights, x, y, params, rng):
    g = params["gap_size"]
    waypoints, spans = [], []
    for center in (6.5, 11.5):
        cx = center + rng.uniform(-0.8, 0.8)
        _band(heights, x, cx - g / 2, cx + g / 2, -1.0)
        waypoints.append((cx + g / 2 + 0.5, 0.0))
        spans.append((cx - g / 2, cx + g / 2))
    return waypoints, spans


def _build_inclined_boxes(heights, x, y, params, rng):
    # wedge-top stones: 5 cm plinth with both faces inclined at the tilt angle
    tilt = np.deg2rad(params["tilt"])
    length = params["stone_length"]
    slope = np.tan(tilt)
    plinth = 0.05
    waypoints, spans = [], []
    cursor = 4.5 + rng.uniform(-0.3, 0.3)
    side = 1.0
    while cursor + length < 14.5:
        cy = side * 0.3
        side = -side
        mask_x = (x >= cursor) & (x < cursor + length)
        mask_y = (y >= cy - 1.0) & (y < cy + 1.0)
        center = cursor + length / 2.0
        profile = plinth + slope * (length / 2.0 - np.abs(x[mask_x] - center))
        heights[np.ix_(mask_x, mask_y)] = profile[:, None]
        waypoints.append((center, cy))
        spans.append((cursor, cursor + length))
        cursor += length + 0.3
    return waypoints, spans


def _build_slopes(heights, x, y, params, rng):
    slope = np.tan(np.deg2rad(params["angle"]))
    run = 2.2
    plateau = 1.0
    x0 = 5.0 + rng.uniform(-0.5, 0.5)
    crest = slope * run
    up = (x >= x0) & (x < x0 + run)
    heights[up, :] = (slope * (x[up] - x0))[:, None]
    _band(heights, x, x0 + run, x0 + run + plateau, crest)
    down = (x >= x0 + run + plateau) & (x < x0 + 2 * run + plateau)
    heights[down, :] = (crest - slope * (x[down] - x0 - run - plateau))[:, None]
    waypoint = (x0 + run + plateau / 2.0, 0.0)
    return [waypoint], [(x0, x0 + 2 * run + plateau)]


def _build_weave_poles(heights, x, y, params, rng):
    spreading = params["spreading"]
    pole_half = 0.075
    waypoints, spans = [], []
    first = 5.5 + rng.uniform(-0.3, 0.3)
    for k in range(6):
        cx = first + 1.5 * k
        cy = (spreading / 2.0) * (1 if k % 2 == 0 else -1)
        mask_x = (x >= cx - pole_half) & (x < cx + pole_half)
        mask_y = (y >= cy - pole_half) & (y < cy + pole_half)
        heights[np.ix_(mask_x, mask_y)] = 1.0
        waypoints.append((cx, -cy))
    spans.append((first - pole_half, first + 1.5 * 5 + pole_half))
    return waypoints, spans


_BUILDERS = {
    "Flat": _build_flat,
    "Steps": _build_steps,
    "Boxes": _build_boxes,
    "Stairs": _build_stairs,
    "Gaps": _build_gaps,
    "InclinedBoxes": _build_inclined_boxes,
    "Slopes": _build_slopes,
    "WeavePoles": _build_weave_poles,
}
