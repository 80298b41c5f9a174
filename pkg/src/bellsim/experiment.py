"""Experiment orchestration: trial batches in, CHSH statistics out.

Stream ids are allocated per setting pair in canonical PAIR_ORDER: pair i
of a run owns ids [base + i*N, base + (i+1)*N), so every trial's stream is
fixed by the configuration alone and results do not depend on worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .models import ModelDescriptor, generate_outcomes
from .polytope import CorrelationVector, vertex_matrix
from .quantum import expectation
from .stats import (
    PAIR_ORDER,
    ChshResult,
    CoincidenceCounts,
    DEFAULT_SIGN_PATTERN,
    SettingPair,
    chsh_s,
    correlation,
    counts_from_outcomes,
)

import numpy as np


@dataclass(frozen=True)
class ChshExperimentResult:
    counts: Mapping[SettingPair, CoincidenceCounts]
    result: ChshResult


def run_chsh_experiment(
    model: ModelDescriptor,
    trials_per_pair: int,
    seed: int,
    sign_pattern: Iterable[int] = DEFAULT_SIGN_PATTERN,
    threads: int = 1,
    stream_base: int = 0,
) -> ChshExperimentResult:
    """Run trials for all four setting pairs and estimate S."""
    if trials_per_pair < 1:
        raise ValueError(f"trials_per_pair must be at least 1, got {trials_per_pair}")
    counts: dict[SettingPair, CoincidenceCounts] = {}
    for pair_index, pair in enumerate(PAIR_ORDER):
        outcomes = generate_outcomes(
            model,
            pair,
            seed,
            stream_base + pair_index * trials_per_pair,
            trials_per_pair,
            threads,
        )
        counts[pair] = counts_from_outcomes(outcomes)
    estimates = {pair: correlation(counts[pair]) for pair in PAIR_ORDER}
    return ChshExperimentResult(counts=counts, result=chsh_s(estimates, sign_pattern))


def estimate_correlation_vector(
    model: ModelDescriptor,
    trials_per_pair: int,
    seed: int,
    threads: int = 1,
    stream_base: int = 0,
) -> tuple[CorrelationVector, Mapping[SettingPair, CoincidenceCounts]]:
    """Empirical correlation vector over the four setting pairs."""
    outcome = run_chsh_experiment(
        model,
        trials_per_pair,
        seed,
        DEFAULT_SIGN_PATTERN,
        threads=threads,
        stream_base=stream_base,
    )
    values = [outcome.result.correlations[pair].value for pair in PAIR_ORDER]
    return CorrelationVector(*values), outcome.counts


def model_exact_correlations(model: ModelDescriptor) -> CorrelationVector:
    """The correlation vector a model produces in expectation, no sampling."""
    if model.kind in ("quantum", "nonlocal"):
        state = model.quantum_state()
        values = [
            expectation(state, model.angle_for(x), model.angle_for(y))
            for x, y in PAIR_ORDER
        ]
        return CorrelationVector(*values)
    if model.kind in ("lhv_deterministic", "lhv_stochastic"):
        mixed = np.asarray(model.weights) @ vertex_matrix()
        return CorrelationVector(*(float(v) for v in mixed))
    values = []
    for pair in PAIR_ORDER:
        p_pp, p_pm, p_mp, p_mm = model.table[pair]
        values.append(p_pp + p_mm - p_pm - p_mp)
    return CorrelationVector(*values)
