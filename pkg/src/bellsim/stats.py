"""Coincidence counting and the CHSH statistic.

The correlation estimator is (N++ + N-- - N+- - N-+) / N with the Wald
standard error sqrt((1 - E^2)/N). The S statistic is a signed sum of the
four correlations; the sign pattern (one minus among four terms) is an
explicit parameter because the literature uses several equivalent
placements of the minus sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .quantum import TwoQubitState, expectation

SQRT2 = math.sqrt(2.0)
TSIRELSON_BOUND = 2.0 * SQRT2
LOCAL_BOUND = 2.0
ALGEBRAIC_BOUND = 4.0

SettingPair = tuple[str, str]

# Canonical ordering of the four setting pairs; sign patterns index into it.
PAIR_ORDER: tuple[SettingPair, ...] = (("a", "b"), ("a", "b'"), ("a'", "b"), ("a'", "b'"))

# The four valid sign patterns: exactly one -1. Default matches S =
# E(a,b) - E(a,b') + E(a',b) + E(a',b').
SIGN_PATTERNS: tuple[tuple[int, ...], ...] = (
    (-1, 1, 1, 1),
    (1, -1, 1, 1),
    (1, 1, -1, 1),
    (1, 1, 1, -1),
)
DEFAULT_SIGN_PATTERN: tuple[int, ...] = (1, -1, 1, 1)


def validate_sign_pattern(sign_pattern: Iterable[int]) -> tuple[int, ...]:
    """Return the pattern as a tuple, rejecting anything but one -1 among +-1s."""
    pattern = tuple(int(s) for s in sign_pattern)
    if len(pattern) != 4 or any(s not in (-1, 1) for s in pattern):
        raise ValueError(f"sign pattern must be four values in {{-1,+1}}, got {pattern}")
    if pattern.count(-1) != 1:
        raise ValueError(f"sign pattern must contain exactly one -1, got {pattern}")
    return pattern


@dataclass(frozen=True)
class CoincidenceCounts:
    """The four coincidence counters for one setting pair."""

    n_pp: int = 0
    n_pm: int = 0
    n_mp: int = 0
    n_mm: int = 0

    def __post_init__(self) -> None:
        for name in ("n_pp", "n_pm", "n_mp", "n_mm"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm

    def merge(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        """Pairwise counter addition; associative and commutative."""
        return CoincidenceCounts(
            self.n_pp + other.n_pp,
            self.n_pm + other.n_pm,
            self.n_mp + other.n_mp,
            self.n_mm + other.n_mm,
        )


def accumulate(counts: CoincidenceCounts, outcome: tuple[int, int]) -> CoincidenceCounts:
    """Return counts with the counter keyed by (left sign, right sign) incremented."""
    left, right = outcome
    if left == 1 and right == 1:
        return CoincidenceCounts(counts.n_pp + 1, counts.n_pm, counts.n_mp, counts.n_mm)
    if left == 1 and right == -1:
        return CoincidenceCounts(counts.n_pp, counts.n_pm + 1, counts.n_mp, counts.n_mm)
    if left == -1 and right == 1:
        return CoincidenceCounts(counts.n_pp, counts.n_pm, counts.n_mp + 1, counts.n_mm)
    if left == -1 and right == -1:
        return CoincidenceCounts(counts.n_pp, counts.n_pm, counts.n_mp, counts.n_mm + 1)
    raise ValueError(f"outcome must be a pair of +-1, got {outcome!r}")


def counts_from_outcomes(outcomes: np.ndarray) -> CoincidenceCounts:
    """Tally an (N, 2) array of +-1 outcome pairs in one pass."""
    arr = np.asarray(outcomes)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (N, 2) outcome array, got shape {arr.shape}")
    # Map (left, right) to an index in OUTCOME_ORDER: (1,1)->0 (1,-1)->1 (-1,1)->2 (-1,-1)->3
    idx = (1 - arr[:, 0]) + (1 - arr[:, 1]) // 2
    tally = np.bincount(idx, minlength=4)
    return CoincidenceCounts(int(tally[0]), int(tally[1]), int(tally[2]), int(tally[3]))


@dataclass(frozen=True)
class CorrelationEstimate:
    """Estimated correlation with its Wald standard error."""

    value: float
    std_error: float
    total: int

    def __post_init__(self) -> None:
        if abs(self.value) > 1.0:
            raise ValueError(f"correlation value {self.value} outside [-1, 1]")
        if not 0.0 <= self.std_error <= 1.0:
            raise ValueError(f"std_error {self.std_error} outside [0, 1]")


def correlation(counts: CoincidenceCounts) -> CorrelationEstimate:
    """Correlation (N++ + N-- - N+- - N-+) / total with Wald standard error."""
    total = counts.total
    if total == 0:
        raise ValueError("cannot estimate a correlation from zero counts")
    value = (counts.n_pp + counts.n_mm - counts.n_pm - counts.n_mp) / total
    std_error = math.sqrt(max(0.0, 1.0 - value * value) / total)
    return CorrelationEstimate(value=value, std_error=std_error, total=total)


def correlation_fraction(counts: CoincidenceCounts) -> Fraction:
    """The correlation as an exact rational number."""
    total = counts.total
    if total == 0:
        raise ValueError("cannot estimate a correlation from zero counts")
    return Fraction(counts.n_pp + counts.n_mm - counts.n_pm - counts.n_mp, total)


@dataclass(frozen=True)
class ChshResult:
    """Four correlations combined into S, with uncertainty and bound class."""

    correlations: Mapping[SettingPair, CorrelationEstimate]
    s_value: float
    s_std_error: float
    sign_pattern: tuple[int, ...]
    bound_class: str

    def __post_init__(self) -> None:
        if abs(self.s_value) > ALGEBRAIC_BOUND + 4.0 * self.s_std_error:
            raise ValueError(
                f"|S| = {abs(self.s_value)} exceeds 4 + 4*std_error; estimator is broken"
            )


def classify_bound(abs_s: float, s_std_error: float) -> str:
    """Classify |S| against 2 and 2*sqrt(2) with a 3-sigma guard band."""
    guard = 3.0 * s_std_error
    if abs_s <= LOCAL_BOUND + guard:
        return "local"
    if abs_s <= TSIRELSON_BOUND + guard:
        return "quantum"
    return "algebraic"


def chsh_s(
    correlations: Mapping[SettingPair, CorrelationEstimate],
    sign_pattern: Iterable[int] = DEFAULT_SIGN_PATTERN,
) -> ChshResult:
    """Signed sum of the four correlations, errors combined in quadrature."""
    pattern = validate_sign_pattern(sign_pattern)
    missing = [pair for pair in PAIR_ORDER if pair not in correlations]
    if missing:
        raise ValueError(f"missing correlation estimates for setting pairs {missing}")
    s_value = sum(
        sign * correlations[pair].value for sign, pair in zip(pattern, PAIR_ORDER)
    )
    s_std_error = math.sqrt(
        sum(correlations[pair].std_error ** 2 for pair in PAIR_ORDER)
    )
    return ChshResult(
        correlations={pair: correlations[pair] for pair in PAIR_ORDER},
        s_value=s_value,
        s_std_error=s_std_error,
        sign_pattern=pattern,
        bound_class=classify_bound(abs(s_value), s_std_error),
    )


def exact_chsh_s(
    state: TwoQubitState,
    angles: Iterable[float],
    sign_pattern: Iterable[int] = DEFAULT_SIGN_PATTERN,
) -> float:
    """S from exact expectation values at angles (a, a', b, b')."""
    pattern = validate_sign_pattern(sign_pattern)
    theta = tuple(float(t) for t in angles)
    if len(theta) != 4:
        raise ValueError(f"expected four angles (a, a', b, b'), got {len(theta)}")
    by_label = {"a": theta[0], "a'": theta[1], "b": theta[2], "b'": theta[3]}
    return sum(
        sign * expectation(state, by_label[x], by_label[y])
        for sign, (x, y) in zip(pattern, PAIR_ORDER)
    )
