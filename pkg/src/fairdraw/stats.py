"""Pearson chi-square goodness of fit against the uniform distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

SIGNIFICANCE = 1e-3

# upper 0.1% quantiles of the chi-square distribution, by degrees of freedom
CRITICAL_1E3 = {
    1: 10.828, 2: 13.816, 3: 16.266, 4: 18.467, 5: 20.515,
    6: 22.458, 7: 24.322, 8: 26.124, 9: 27.877, 10: 29.588,
    11: 31.264, 12: 32.909, 13: 34.528, 14: 36.123, 15: 37.697,
    16: 39.252, 17: 40.790, 18: 42.312, 19: 43.820, 20: 45.315,
    21: 46.797, 22: 48.268, 23: 49.728, 24: 51.179, 25: 52.620,
    26: 54.052, 27: 55.476, 28: 56.892, 29: 58.301, 30: 59.703,
    31: 61.098, 32: 62.487, 33: 63.870, 34: 65.247, 35: 66.619,
    36: 67.985, 37: 69.346, 38: 70.703, 39: 72.055, 40: 73.402,
}
_Z_1E3 = 3.090232  # standard normal upper 0.1% point


def critical_value(dof: int) -> float:
    """Critical value at 1e-3; Wilson-Hilferty beyond the table."""
    if dof < 1:
        raise ValueError("need at least one degree of freedom")
    if dof in CRITICAL_1E3:
        return CRITICAL_1E3[dof]
    c = 2.0 / (9.0 * dof)
    return dof * (1.0 - c + _Z_1E3 * math.sqrt(c)) ** 3


def chi_square(counts: Sequence[int]) -> float:
    total = sum(counts)
    if total == 0:
        raise ValueError("no observations")
    expected = total / len(counts)
    return sum((c - expected) ** 2 for c in counts) / expected


@dataclass(frozen=True)
class ChiSquareReport:
    counts: tuple[int, ...]
    statistic: float
    dof: int
    critical: float
    aborted_runs: int = 0

    @property
    def trials(self) -> int:
        return sum(self.counts)

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical

    def __str__(self) -> str:
        verdict = "uniform" if self.passed else "NOT uniform"
        return (
            f"trials={self.trials} aborted={self.aborted_runs} chi2={self.statistic:.3f} "
            f"dof={self.dof} critical={self.critical:.3f} -> {verdict}"
        )


def chi_square_report(counts: Sequence[int], aborted_runs: int = 0) -> ChiSquareReport:
    if len(counts) < 2:
        raise ValueError("need at least two categories")
    dof = len(counts) - 1
    stat = chi_square(counts) if sum(counts) else float("inf")
    return ChiSquareReport(tuple(counts), stat, dof, critical_value(dof), aborted_runs)
