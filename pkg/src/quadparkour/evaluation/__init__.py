"""Course-based policy evaluation: scoring, penalties, sweeps, statistics."""

from .course import BarkourCourse, COURSE_LENGTH, build_course
from .runner import (barkour_report, policy_episode_runner, run_course,
                     skill_sweep)
from .scoring import (BarkourResult, detect_penalties, expected_time,
                      penalty_events, score)
from .stats import prediction_interval, wilson_interval

__all__ = [
    "BarkourCourse", "COURSE_LENGTH", "build_course", "barkour_report",
    "policy_episode_runner", "run_course", "skill_sweep", "BarkourResult",
    "detect_penalties", "expected_time", "penalty_events", "score",
    "prediction_interval", "wilson_interval",
]
