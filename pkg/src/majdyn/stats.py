"""Binomial estimates with Wilson score intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

Z95 = 1.959963984540054


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    lo: float
    hi: float
    trials: int

    @property
    def halfwidth(self):
        return (self.hi - self.lo) / 2

    def contains(self, value):
        return self.lo <= value <= self.hi

    def to_dict(self):
        return {"point": self.point, "lo": self.lo, "hi": self.hi, "trials": self.trials}


def wilson_interval(successes, trials, z=Z95):
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard rounding at the extremes
    lo, hi = min(lo, p), max(hi, p)
    return EstimateWithCI(p, lo, hi, trials)
