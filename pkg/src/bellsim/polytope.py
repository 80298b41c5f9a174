"""The local correlation polytope for two settings per side.

The 16 deterministic strategies (one +-1 response per setting label) span
the polytope of correlation vectors reachable by any setting-independent
hidden-variable mixture. Its nontrivial facets are exactly the eight
inequalities |sum_i p_i E_i| <= 2 over the four one-minus sign patterns,
so membership is decided by checking those facets directly; component
bounds |E| <= 1 are enforced by the CorrelationVector type itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from .models import LhvStrategy
from .stats import PAIR_ORDER, SIGN_PATTERNS, validate_sign_pattern

_COMPONENT_SLACK = 1e-12
_WITNESS_RESIDUAL = 1e-10


@dataclass(frozen=True)
class CorrelationVector:
    """The four correlations (E(a,b), E(a,b'), E(a',b), E(a',b'))."""

    e_ab: float
    e_abp: float
    e_apb: float
    e_apbp: float

    def __post_init__(self) -> None:
        for name, value in zip(PAIR_ORDER, self.as_tuple()):
            if not math.isfinite(value) or abs(value) > 1.0 + _COMPONENT_SLACK:
                raise ValueError(f"correlation E{name} = {value!r} outside [-1, 1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.e_ab, self.e_abp, self.e_apb, self.e_apbp)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple())


@dataclass(frozen=True)
class ViolatedFacet:
    """The sign pattern whose facet a vector violates, and by how much."""

    sign_pattern: tuple[int, ...]
    margin: float


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Membership verdict with exactly one witness: weights or a violated facet."""

    feasible: bool
    weights: Optional[np.ndarray] = None
    violated_facet: Optional[ViolatedFacet] = None

    def __post_init__(self) -> None:
        if self.feasible and (self.weights is None or self.violated_facet is not None):
            raise ValueError("feasible verdict requires weights and no violated facet")
        if not self.feasible and (self.weights is not None or self.violated_facet is None):
            raise ValueError("infeasible verdict requires a violated facet and no weights")


def enumerate_deterministic_strategies() -> tuple[LhvStrategy, ...]:
    """All 16 assignments of +-1 to the labels (a, a', b, b'), in index order."""
    return tuple(LhvStrategy.from_index(i) for i in range(16))


def strategy_correlation(strategy: LhvStrategy) -> CorrelationVector:
    """Correlations of one deterministic strategy: products of its responses."""
    return CorrelationVector(
        *(strategy.response_left[x] * strategy.response_right[y] for x, y in PAIR_ORDER)
    )


def vertex_matrix() -> np.ndarray:
    """16x4 matrix of deterministic-strategy correlation vectors, in index order."""
    rows = [strategy_correlation(s).as_tuple() for s in enumerate_deterministic_strategies()]
    return np.array(rows, dtype=float)


def max_classical_s(sign_pattern) -> float:
    """Maximum signed sum over the 16 deterministic strategies (always 2)."""
    pattern = validate_sign_pattern(sign_pattern)
    vertices = vertex_matrix()
    return float(np.max(vertices @ np.array(pattern, dtype=float)))


def facet_margin(vector: CorrelationVector) -> tuple[float, tuple[int, ...]]:
    """Largest |signed sum| - 2 over the four facet patterns, with the achiever."""
    e = vector.as_array()
    best_margin = -math.inf
    best_pattern = SIGN_PATTERNS[0]
    for pattern in SIGN_PATTERNS:
        margin = abs(float(e @ np.array(pattern, dtype=float))) - 2.0
        if margin > best_margin:
            best_margin = margin
            best_pattern = pattern
    return best_margin, best_pattern


def _witness_weights(target: np.ndarray, tolerance: float) -> np.ndarray:
    # Nonnegative least squares over the 16 vertices with a sum-to-one row;
    # for a point inside the hull the active-set solve reaches residual ~0.
    system = np.vstack([vertex_matrix().T, np.ones(16)])
    rhs = np.concatenate([target, [1.0]])
    weights, residual = nnls(system, rhs)
    if residual > max(_WITNESS_RESIDUAL, 4.0 * tolerance):
        raise RuntimeError(
            f"witness solve did not converge (residual {residual:.3e}); "
            "facet check and vertex geometry disagree"
        )
    return weights / weights.sum()


def local_membership(
    vector: CorrelationVector, facet_tolerance: float = 1e-9
) -> FeasibilityVerdict:
    """Decide hull membership by the facet inequalities.

    `facet_tolerance` is the slack allowed on facet margins; pass a
    statistical margin (for example 5 sigma of S) when testing empirical
    correlation vectors.
    """
    if facet_tolerance < 0.0:
        raise ValueError("facet_tolerance must be non-negative")
    margin, pattern = facet_margin(vector)
    if margin <= facet_tolerance:
        weights = _witness_weights(np.clip(vector.as_array(), -1.0, 1.0), facet_tolerance)
        return FeasibilityVerdict(feasible=True, weights=weights)
    return FeasibilityVerdict(
        feasible=False,
        violated_facet=ViolatedFacet(sign_pattern=pattern, margin=margin),
    )
