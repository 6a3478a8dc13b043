"""Course scoring and automated penalty detection.

The score compares the run time against the time the velocity command
implies for the course length, minus a tenth per penalty, clamped at zero.
Penalties are detected from the trajectory dump by two declared rules:
a stumble held for at least 0.2 s, and an obstacle section needing more
than two approach attempts (retreating at least half a meter resets an
attempt). Every detected event is returned for audit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.env import V_CMD_RANGE
from .course import BarkourCourse, COURSE_LENGTH

TIME_WEIGHT = 0.01
PENALTY_WEIGHT = 0.1
STUMBLE_HOLD_S = 0.2
RETREAT_DISTANCE = 0.5
MAX_CLEAN_ATTEMPTS = 2


@dataclass
class BarkourResult:
    completed: bool
    t_run: float
    v_cmd: float
    penalties: int
    score: float


def expected_time(v_cmd: float, length: float = COURSE_LENGTH) -> float:
    return length / v_cmd


def score(t_run: float, v_cmd: float, penalties: int,
          length: float = COURSE_LENGTH) -> float:
    if t_run <= 0:
        raise ValueError("t_run must be positive")
    if not V_CMD_RANGE[0] <= v_cmd <= V_CMD_RANGE[1]:
        raise ValueError(f"v_cmd must lie in {V_CMD_RANGE}")
    raw = (1.0 - TIME_WEIGHT * abs(t_run - expected_time(v_cmd, length))
           - PENALTY_WEIGHT * penalties)
    return max(0.0, raw)


def penalty_events(trajectory: dict, course: BarkourCourse) -> list[dict]:
    """All penalty events with their kind, time, and location.

    `trajectory` holds per-control-step arrays: "time" (T,), "pos" (T, >=2),
    and "stumble" (T,) booleans.
    """
    t = np.asarray(trajectory["time"], dtype=np.float64)
    pos = np.asarray(trajectory["pos"], dtype=np.float64)
    stumble = np.asarray(trajectory["stumble"], dtype=bool)
    events: list[dict] = []

    # stumble runs held >= the hold threshold
    padded = np.concatenate([[False], stumble, [False]])
    starts = np.nonzero(padded[1:] & ~padded[:-1])[0]
    ends = np.nonzero(~padded[1:] & padded[:-1])[0]
    for s, e in zip(starts, ends):
        duration = t[e - 1] - t[s] + (t[1] - t[0] if len(t) > 1 else 0.0)
        if duration >= STUMBLE_HOLD_S:
            events.append({"kind": "stumble", "time": float(t[s]),
                           "x": float(pos[s, 0]), "duration": float(duration)})

    # repeated approaches per obstacle section
    x = pos[:, 0]
    for name, x0, x1 in course.sections:
        attempts = 0
        state = "outside"
        high_water = low_water = 0.0
        for k in range(len(x)):
            if x[k] >= x1:
                break
            if state == "outside":
                if x[k] >= x0:
                    attempts += 1
                    state = "advancing"
                    high_water = x[k]
            elif state == "advancing":
                high_water = max(high_water, x[k])
                if high_water - x[k] >= RETREAT_DISTANCE:
                    state = "retreated"
                    low_water = x[k]
            else:   # retreated: a new attempt starts when motion turns forward
                if x[k] < x0:
                    state = "outside"
                    continue
                low_water = min(low_water, x[k])
                if x[k] - low_water >= 0.05:
                    attempts += 1
                    state = "advancing"
                    high_water = x[k]
        if attempts > MAX_CLEAN_ATTEMPTS:
            events.append({"kind": "repeated_attempts", "section": name,
                           "attempts": attempts, "x": float(x0)})
    return events


def detect_penalties(trajectory: dict, course: BarkourCourse) -> int:
    return len(penalty_events(trajectory, course))
