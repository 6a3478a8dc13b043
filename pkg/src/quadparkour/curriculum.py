"""Per-agent difficulty progression over the 20-level obstacle curriculum.

Each agent is judged on tumbling 20-second windows: it is promoted when it
crosses more than 80% of the expected distance (v_cmd * 20 s), demoted when it
covers 40% or less, and stays put otherwise. Promotion past the final level
reassigns a uniformly random level of the same category. An episode that
terminates early is evaluated immediately with the same ratio rule.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from .terrain.categories import CATEGORIES, N_LEVELS

WINDOW_SECONDS = 20.0
PROMOTE_RATIO = 0.8
DEMOTE_RATIO = 0.4


class Decision(enum.Enum):
    PROMOTE = "Promote"
    DEMOTE = "Demote"
    STAY = "Stay"


@dataclass
class CurriculumState:
    category: str
    level: int
    window_start_time: float = 0.0
    distance_traversed: float = 0.0
    v_cmd: float = 0.6

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not 0 <= self.level < N_LEVELS:
            raise ValueError(f"level {self.level} outside [0, {N_LEVELS - 1}]")
        if self.distance_traversed < 0:
            raise ValueError("distance_traversed must be >= 0")


def evaluate_window(state: CurriculumState, elapsed: float = WINDOW_SECONDS) -> Decision:
    """Judge one window. Expected distance is always v_cmd * 20 s, also for
    windows cut short by early termination."""
    expected = state.v_cmd * WINDOW_SECONDS
    ratio = state.distance_traversed / expected
    if ratio > PROMOTE_RATIO:
        return Decision.PROMOTE
    if ratio <= DEMOTE_RATIO:
        return Decision.DEMOTE
    return Decision.STAY


def apply(decision: Decision, state: CurriculumState,
          rng: np.random.Generator) -> CurriculumState:
    """Advance the level per the decision; resets the traversal accumulator."""
    level = state.level
    if decision is Decision.PROMOTE:
        if level == N_LEVELS - 1:
            level = int(rng.integers(0, N_LEVELS))
        else:
            level += 1
    elif decision is Decision.DEMOTE:
        level = max(level - 1, 0)
    return dataclasses.replace(state, level=level, distance_traversed=0.0)


def trace_row(agent: int, state: CurriculumState, ratio: float,
              decision: Decision) -> str:
    """One CSV row for the curriculum trace log."""
    return f"{agent},{state.category},{state.level},{ratio:.6f},{decision.value}"
