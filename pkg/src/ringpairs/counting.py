"""Counting-statistics helpers."""

import math


def poisson_sigma(count: int) -> float:
    """sqrt(count), floored at 1 so that zero counts still carry an error bar."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return math.sqrt(count) if count > 0 else 1.0
