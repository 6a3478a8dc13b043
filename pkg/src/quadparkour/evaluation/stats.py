"""Interval statistics for evaluation aggregates."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps


def prediction_interval(samples, level: float = 0.90) -> tuple[float, float]:
    """t-distribution prediction interval for one future observation:
    mean +/- t_{(1+level)/2, n-1} * s * sqrt(1 + 1/n)."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("prediction interval needs at least 2 samples")
    mean = float(x.mean())
    s = float(x.std(ddof=1))
    t = float(sps.t.ppf(0.5 + level / 2.0, n - 1))
    half = t * s * np.sqrt(1.0 + 1.0 / n)
    return mean - half, mean + half


def wilson_interval(successes: int, n: int, level: float = 0.90) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    z = float(sps.norm.ppf(0.5 + level / 2.0))
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)
