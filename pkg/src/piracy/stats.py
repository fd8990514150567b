"""Confidence intervals for Monte-Carlo estimates."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.stats import norm
from scipy.stats import t as student_t

from src.core.errors import PreconditionError

DEFAULT_CONFIDENCE = 0.95


def wilson_interval(successes: int, trials: int, confidence: float = DEFAULT_CONFIDENCE) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise PreconditionError("a confidence interval needs at least one trial")
    if not 0 <= successes <= trials:
        raise PreconditionError(f"{successes} successes out of {trials} trials")
    z = float(norm.ppf(0.5 + confidence / 2))
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p_hat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def hoeffding_radius(shots: int, delta: float = 1 - DEFAULT_CONFIDENCE) -> float:
    """Two-sided Hoeffding radius sqrt(ln(2/delta) / (2 * shots))."""
    if shots <= 0:
        raise PreconditionError("shots must be positive")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * shots))


def draw_interval(
    values: Sequence[float], confidence: float = DEFAULT_CONFIDENCE
) -> tuple[float, float, float, float]:
    """
    Mean of per-draw values in [0, 1] with a Student-t interval.

    Returns (mean, low, high, standard_error). A single draw or draws that
    all agree give a zero-width interval.
    """
    if len(values) == 0:
        raise PreconditionError("an interval over draws needs at least one draw")
    data = np.asarray(values, dtype=float)
    mean = float(data.mean())
    if data.size == 1 or float(np.ptp(data)) == 0.0:
        return mean, mean, mean, 0.0
    sem = float(data.std(ddof=1) / math.sqrt(data.size))
    half = float(student_t.ppf(0.5 + confidence / 2, df=data.size - 1)) * sem
    return mean, max(0.0, mean - half), min(1.0, mean + half), sem


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)
