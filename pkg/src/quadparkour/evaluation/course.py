"""Obstacle-course construction for the adapted agility benchmark.

One 18 m heightfield holding five consecutive sections: an elevated start
table, weave poles, a 30-degree A-frame, a jump gap, and an elevated end
table. Variable sections are realized at 70% of their training difficulty
range; the A-frame angle is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..terrain.categories import PARAM_RANGES
from ..terrain.heightfield import Heightfield, RESOLUTION, TILE_LENGTH, TILE_WIDTH

COURSE_LENGTH = TILE_LENGTH          # 18 m
COURSE_DIFFICULTY = 0.7
TABLE_HEIGHT = 0.6
TABLE_LENGTH = 1.0
AFRAME_ANGLE_DEG = 30.0


def _fraction(category: str, name: str, frac: float) -> float:
    alpha, beta = PARAM_RANGES[category][name]
    return alpha + frac * (beta - alpha)


@dataclass
class BarkourCourse:
    """The course field plus per-section bounds used by penalty detection."""
    field: Heightfield
    sections: list[tuple[str, float, float]]    # (name, x_start, x_end)
    finish_x: float
    length: float = COURSE_LENGTH

    def section_bounds(self, name: str) -> tuple[float, float]:
        for sec, x0, x1 in self.sections:
            if sec == name:
                return x0, x1
        raise KeyError(name)


def build_course(resolution: float = RESOLUTION) -> BarkourCourse:
    nx = int(round(COURSE_LENGTH / resolution))
    ny = int(round(TILE_WIDTH / resolution))
    x = np.arange(nx) * resolution
    y = -TILE_WIDTH / 2.0 + np.arange(ny) * resolution
    heights = np.zeros((nx, ny), dtype=np.float64)
    waypoints: list[tuple[float, float]] = []
    sections: list[tuple[str, float, float]] = []

    # start table: the robot begins on top
    t0, t1 = 0.4, 0.4 + TABLE_LENGTH
    heights[(x >= t0) & (x < t1), :] = TABLE_HEIGHT
    sections.append(("start_table", t0, t1))
    waypoints.append((t1 + 0.6, 0.0))

    # weave poles, spreading at 70% difficulty
    spreading = _fraction("WeavePoles", "spreading", COURSE_DIFFICULTY)
    pole_half = 0.075
    pole_xs = [3.0, 4.2, 5.4, 6.6]
    for k, cx in enumerate(pole_xs):
        cy = (spreading / 2.0) * (1 if k % 2 == 0 else -1)
        mask_x = (x >= cx - pole_half) & (x < cx + pole_half)
        mask_y = (y >= cy - pole_half) & (y < cy + pole_half)
        heights[np.ix_(mask_x, mask_y)] = 1.0
        waypoints.append((cx, -cy))
    sections.append(("weave_poles", pole_xs[0] - pole_half, pole_xs[-1] + pole_half))

    # A-frame: fixed 30-degree ramps with a short ridge
    slope = np.tan(np.deg2rad(AFRAME_ANGLE_DEG))
    run, ridge = 1.2, 0.4
    a0 = 8.0
    crest = slope * run
    up = (x >= a0) & (x < a0 + run)
    heights[up, :] = slope * (x[up] - a0)[:, None]
    heights[(x >= a0 + run) & (x < a0 + run + ridge), :] = crest
    down = (x >= a0 + run + ridge) & (x < a0 + 2 * run + ridge)
    heights[down, :] = crest - slope * (x[down] - a0 - run - ridge)[:, None]
    sections.append(("a_frame", a0, a0 + 2 * run + ridge))
    waypoints.append((a0 + run + ridge / 2.0, 0.0))
    waypoints.append((a0 + 2 * run + ridge + 0.6, 0.0))

    # jump gap at 70% difficulty
    gap = _fraction("Gaps", "gap_size", COURSE_DIFFICULTY)
    g_center = 12.5
    heights[(x >= g_center - gap / 2) & (x < g_center + gap / 2), :] = -1.0
    sections.append(("jump", g_center - gap / 2, g_center + gap / 2))
    waypoints.append((g_center + gap / 2 + 0.6, 0.0))

    # end table: completion means getting on top and over
    e0, e1 = 15.0, 15.0 + TABLE_LENGTH
    heights[(x >= e0) & (x < e1), :] = TABLE_HEIGHT
    sections.append(("end_table", e0, e1))
    waypoints.append((e0 + TABLE_LENGTH / 2.0, 0.0))
    waypoints.append((COURSE_LENGTH - 0.25, 0.0))

    field = Heightfield(
        resolution=resolution,
        heights=heights.astype(np.float32),
        spawn_pose=(0.9, 0.0, 0.0),
        goal_waypoints=waypoints,
        category="Barkour",
        level=0,
        seed=0,
        resolved_parameters={"spreading": spreading, "gap_size": gap,
                             "angle": AFRAME_ANGLE_DEG},
        obstacle_spans=[(x0, x1) for _, x0, x1 in sections],
    )
    return BarkourCourse(field=field, sections=sections, finish_x=e1 + 0.2)
