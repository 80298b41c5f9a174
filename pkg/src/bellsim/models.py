"""World models: one trial generator per way of producing outcome pairs.

Five kinds share the run_trial interface:

  quantum             sample the Born joint distribution of a two-qubit state
  nonlocal            same statistics, factored as left marginal then right
                      outcome conditioned on the left outcome and BOTH settings
  lhv_deterministic   a single fixed response strategy (point-mass mixture)
  lhv_stochastic      a setting-independent mixture over the 16 strategies
  superdeterministic  outcome table conditioned on the setting pair itself

Trials draw from per-trial streams keyed by (run seed, stream_id), so any
trial can be regenerated in isolation and batches are independent of worker
scheduling. The scalar and vectorized paths consume stream variates in the
same order and therefore produce identical outcomes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .quantum import (
    OUTCOME_ORDER,
    TwoQubitState,
    joint_probabilities,
    make_named_state,
    sample_outcome,
)
from .stats import PAIR_ORDER, SettingPair
from .streams import TrialStream, batch_uniforms

LEFT_LABELS = ("a", "a'")
RIGHT_LABELS = ("b", "b'")

MODEL_KINDS = (
    "quantum",
    "lhv_deterministic",
    "lhv_stochastic",
    "superdeterministic",
    "nonlocal",
)

SINGLET_OPTIMAL_ANGLES = (0.0, math.pi / 2.0, math.pi / 4.0, 3.0 * math.pi / 4.0)
PSI_PLUS_OPTIMAL_ANGLES = (0.0, math.pi / 2.0, 3.0 * math.pi / 4.0, math.pi / 4.0)

_OUTCOME_ARRAY = np.array(OUTCOME_ORDER, dtype=np.int8)
_CHUNK = 1 << 16


@dataclass(frozen=True)
class LhvStrategy:
    """Deterministic +-1 responses, one per local setting label.

    A response depends only on the local label; the strategy index packs the
    four responses as bits (a, a', b, b'), bit value 0 meaning +1.
    """

    response_left: Mapping[str, int]
    response_right: Mapping[str, int]

    def __post_init__(self) -> None:
        left = {label: int(self.response_left[label]) for label in LEFT_LABELS}
        right = {label: int(self.response_right[label]) for label in RIGHT_LABELS}
        for responses in (left, right):
            if any(v not in (-1, 1) for v in responses.values()):
                raise ValueError(f"strategy responses must be +-1, got {responses}")
        object.__setattr__(self, "response_left", left)
        object.__setattr__(self, "response_right", right)

    @classmethod
    def from_index(cls, index: int) -> "LhvStrategy":
        if not 0 <= index < 16:
            raise ValueError(f"strategy index must be in 0..15, got {index}")
        bits = [(index >> shift) & 1 for shift in (3, 2, 1, 0)]
        signs = [1 if bit == 0 else -1 for bit in bits]
        return cls(
            response_left={"a": signs[0], "a'": signs[1]},
            response_right={"b": signs[2], "b'": signs[3]},
        )

    @property
    def index(self) -> int:
        signs = (
            self.response_left["a"],
            self.response_left["a'"],
            self.response_right["b"],
            self.response_right["b'"],
        )
        return sum((0 if s == 1 else 1) << shift for s, shift in zip(signs, (3, 2, 1, 0)))


@dataclass(frozen=True)
class TrialRecord:
    """One trial: settings, outcomes, optional hidden variable, stream id."""

    settings: SettingPair
    outcomes: tuple[int, int]
    hidden: Optional[int]
    stream_id: int


def _validate_weights(weights: Sequence[float]) -> tuple[float, ...]:
    w = tuple(float(x) for x in weights)
    if len(w) != 16:
        raise ValueError(f"expected 16 mixture weights, got {len(w)}")
    if any(not math.isfinite(x) or x < 0.0 for x in w):
        raise ValueError("mixture weights must be finite and non-negative")
    if abs(sum(w) - 1.0) > 1e-12:
        raise ValueError(f"mixture weights sum to {sum(w)!r}, expected 1")
    return w


def _validate_table(
    table: Mapping[SettingPair, Sequence[float]],
) -> dict[SettingPair, tuple[float, ...]]:
    cleaned: dict[SettingPair, tuple[float, ...]] = {}
    for pair in PAIR_ORDER:
        if pair not in table:
            raise ValueError(f"outcome table is missing setting pair {pair}")
        row = tuple(float(p) for p in table[pair])
        if len(row) != 4:
            raise ValueError(f"table row for {pair} must have 4 probabilities")
        if any(not math.isfinite(p) or p < -1e-15 for p in row):
            raise ValueError(f"table row for {pair} has invalid probabilities {row}")
        row = tuple(max(p, 0.0) for p in row)
        if abs(sum(row) - 1.0) > 1e-12:
            raise ValueError(f"table row for {pair} sums to {sum(row)!r}, expected 1")
        cleaned[pair] = row
    extra = set(table) - set(PAIR_ORDER)
    if extra:
        raise ValueError(f"outcome table has unknown setting pairs {sorted(extra)}")
    return cleaned


@dataclass(frozen=True)
class ModelDescriptor:
    """A validated world-model configuration."""

    kind: str
    state: Optional[str] = None
    angles: Optional[tuple[float, float, float, float]] = None
    weights: Optional[tuple[float, ...]] = None
    table: Optional[Mapping[SettingPair, tuple[float, ...]]] = None

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind in ("quantum", "nonlocal"):
            if self.state is None or self.angles is None:
                raise ValueError(f"{self.kind} model requires a state kind and four angles")
            make_named_state(self.state)  # validates the name
            angles = tuple(float(t) for t in self.angles)
            if len(angles) != 4 or any(not math.isfinite(t) for t in angles):
                raise ValueError(f"angles must be four finite radians, got {self.angles!r}")
            object.__setattr__(self, "angles", angles)
            if self.weights is not None or self.table is not None:
                raise ValueError(f"{self.kind} model takes no weights or table")
        elif self.kind in ("lhv_deterministic", "lhv_stochastic"):
            if self.weights is None:
                raise ValueError(f"{self.kind} model requires 16 mixture weights")
            weights = _validate_weights(self.weights)
            if self.kind == "lhv_deterministic" and max(weights) != 1.0:
                raise ValueError("lhv_deterministic requires a point-mass weight vector")
            object.__setattr__(self, "weights", weights)
            if self.state is not None or self.angles is not None or self.table is not None:
                raise ValueError(f"{self.kind} model takes only mixture weights")
        else:  # superdeterministic
            if self.table is None:
                raise ValueError("superdeterministic model requires a setting-conditioned table")
            object.__setattr__(self, "table", _validate_table(self.table))
            if self.state is not None or self.angles is not None or self.weights is not None:
                raise ValueError("superdeterministic model takes only an outcome table")

    def angle_for(self, label: str) -> float:
        assert self.angles is not None
        index = {"a": 0, "a'": 1, "b": 2, "b'": 3}[label]
        return self.angles[index]

    def quantum_state(self) -> TwoQubitState:
        assert self.state is not None
        return make_named_state(self.state)

    def exposes_hidden_variable(self) -> bool:
        return self.kind in ("lhv_deterministic", "lhv_stochastic", "superdeterministic")

    def to_dict(self) -> dict:
        if self.kind in ("quantum", "nonlocal"):
            return {"kind": self.kind, "state": self.state, "angles": list(self.angles)}
        if self.kind == "lhv_deterministic":
            return {"kind": self.kind, "strategy": self.weights.index(1.0)}
        if self.kind == "lhv_stochastic":
            return {"kind": self.kind, "weights": list(self.weights)}
        return {
            "kind": self.kind,
            "table": {",".join(pair): list(row) for pair, row in self.table.items()},
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ModelDescriptor":
        if not isinstance(payload, Mapping) or "kind" not in payload:
            raise ValueError(f"model payload must be a mapping with a 'kind', got {payload!r}")
        kind = payload["kind"]
        if kind in ("quantum", "nonlocal"):
            return cls(kind=kind, state=payload.get("state"), angles=payload.get("angles"))
        if kind == "lhv_deterministic":
            if "strategy" in payload:
                return lhv_deterministic_model(payload["strategy"])
            return cls(kind=kind, weights=payload.get("weights"))
        if kind == "lhv_stochastic":
            return cls(kind=kind, weights=payload.get("weights"))
        if kind == "superdeterministic":
            table = payload.get("table")
            if not isinstance(table, Mapping):
                raise ValueError("superdeterministic payload requires a 'table' mapping")
            parsed = {}
            for key, row in table.items():
                labels = tuple(key.split(",")) if isinstance(key, str) else tuple(key)
                parsed[labels] = row
            return cls(kind=kind, table=parsed)
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def quantum_model(
    state: str = "psi_minus",
    angles: Sequence[float] = SINGLET_OPTIMAL_ANGLES,
) -> ModelDescriptor:
    return ModelDescriptor(kind="quantum", state=state, angles=tuple(angles))


def nonlocal_model(
    state: str = "psi_minus",
    angles: Sequence[float] = SINGLET_OPTIMAL_ANGLES,
) -> ModelDescriptor:
    return ModelDescriptor(kind="nonlocal", state=state, angles=tuple(angles))


def lhv_deterministic_model(strategy: "LhvStrategy | int") -> ModelDescriptor:
    index = strategy.index if isinstance(strategy, LhvStrategy) else int(strategy)
    if not 0 <= index < 16:
        raise ValueError(f"strategy index must be in 0..15, got {index}")
    weights = tuple(1.0 if i == index else 0.0 for i in range(16))
    return ModelDescriptor(kind="lhv_deterministic", weights=weights)


def lhv_stochastic_model(weights: Sequence[float]) -> ModelDescriptor:
    return ModelDescriptor(kind="lhv_stochastic", weights=tuple(weights))


def superdeterministic_model(
    table: Mapping[SettingPair, Sequence[float]],
) -> ModelDescriptor:
    return ModelDescriptor(kind="superdeterministic", table=table)


def pr_box_table(strength: float = 1.0) -> dict[SettingPair, tuple[float, ...]]:
    """Setting-conditioned outcome table interpolating uniform noise -> PR box.

    At strength 1 the table is the PR box: perfectly correlated outcomes on
    every pair except (a, b'), which is perfectly anticorrelated, giving
    S = 4 under the default sign pattern. Marginals stay uniform at every
    strength, so the conditioning is invisible at the marginal level.
    """
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must be in [0, 1], got {strength}")
    correlated = np.array([0.5, 0.0, 0.0, 0.5])
    anticorrelated = np.array([0.0, 0.5, 0.5, 0.0])
    uniform = np.full(4, 0.25)
    table = {}
    for pair in PAIR_ORDER:
        target = anticorrelated if pair == ("a", "b'") else correlated
        table[pair] = tuple(strength * target + (1.0 - strength) * uniform)
    return table


def catalog() -> dict[str, ModelDescriptor]:
    """Named ready-to-run model configurations used by the CLI and tests."""
    uniform = tuple([1.0 / 16.0] * 16)
    edge = tuple([0.5, 0.5] + [0.0] * 14)
    return {
        "quantum-optimal": quantum_model("psi_minus", SINGLET_OPTIMAL_ANGLES),
        "quantum-psi-plus": quantum_model("psi_plus", PSI_PLUS_OPTIMAL_ANGLES),
        "nonlocal-optimal": nonlocal_model("psi_minus", SINGLET_OPTIMAL_ANGLES),
        "lhv-uniform": lhv_stochastic_model(uniform),
        "lhv-edge": lhv_stochastic_model(edge),
        "lhv-all-plus": lhv_deterministic_model(0),
        "pr-box": superdeterministic_model(pr_box_table(1.0)),
        "pr-box-soft": superdeterministic_model(pr_box_table(0.5)),
    }


def _validate_pair(settings: SettingPair) -> SettingPair:
    x, y = settings
    if x not in LEFT_LABELS or y not in RIGHT_LABELS:
        raise ValueError(
            f"settings must be a pair from {LEFT_LABELS} x {RIGHT_LABELS}, got {settings!r}"
        )
    return (x, y)


def _weight_cdf(model: ModelDescriptor) -> np.ndarray:
    return np.cumsum(np.array(model.weights))


def _sample_index(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def run_trial(
    model: ModelDescriptor, settings: SettingPair, rng_stream: TrialStream
) -> TrialRecord:
    """Produce one outcome pair under the model's semantics.

    quantum draws from the Born joint distribution; lhv kinds draw the
    hidden strategy from the setting-independent mixture and answer with
    its responses; superdeterministic draws from the table row conditioned
    on the settings; nonlocal draws the left outcome from its marginal and
    the right outcome from the conditional given the left outcome.
    """
    x, y = _validate_pair(settings)
    if model.kind == "quantum":
        dist = joint_probabilities(model.quantum_state(), model.angle_for(x), model.angle_for(y))
        outcome = sample_outcome(dist, rng_stream)
        return TrialRecord((x, y), outcome, None, rng_stream.stream_id)
    if model.kind == "nonlocal":
        probs = joint_probabilities(
            model.quantum_state(), model.angle_for(x), model.angle_for(y)
        ).as_array()
        p_left_plus = probs[0] + probs[1]
        left = 1 if rng_stream.uniform() < p_left_plus else -1
        if left == 1:
            c_plus = probs[0] / (p_left_plus if p_left_plus > 0.0 else 1.0)
        else:
            p_left_minus = probs[2] + probs[3]
            c_plus = probs[2] / (p_left_minus if p_left_minus > 0.0 else 1.0)
        right = 1 if rng_stream.uniform() < c_plus else -1
        return TrialRecord((x, y), (left, right), None, rng_stream.stream_id)
    if model.kind in ("lhv_deterministic", "lhv_stochastic"):
        lam = _sample_index(_weight_cdf(model), rng_stream.uniform())
        strategy = LhvStrategy.from_index(lam)
        outcome = (strategy.response_left[x], strategy.response_right[y])
        return TrialRecord((x, y), outcome, lam, rng_stream.stream_id)
    # superdeterministic: the hidden draw is conditioned on the setting pair
    row = np.array(model.table[(x, y)])
    k = _sample_index(np.cumsum(row), rng_stream.uniform())
    return TrialRecord((x, y), OUTCOME_ORDER[k], k, rng_stream.stream_id)


def _outcome_batch(
    model: ModelDescriptor, settings: SettingPair, seed: int, stream_ids: np.ndarray
) -> np.ndarray:
    """Vectorized mirror of run_trial; identical stream consumption per trial."""
    x, y = settings
    if model.kind == "quantum":
        dist = joint_probabilities(model.quantum_state(), model.angle_for(x), model.angle_for(y))
        cdf = np.cumsum(dist.as_array())
        u = batch_uniforms(seed, stream_ids, 1)[:, 0]
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), 3)
        return _OUTCOME_ARRAY[idx]
    if model.kind == "nonlocal":
        probs = joint_probabilities(
            model.quantum_state(), model.angle_for(x), model.angle_for(y)
        ).as_array()
        p_left_plus = probs[0] + probs[1]
        p_left_minus = probs[2] + probs[3]
        c_given_plus = probs[0] / (p_left_plus if p_left_plus > 0.0 else 1.0)
        c_given_minus = probs[2] / (p_left_minus if p_left_minus > 0.0 else 1.0)
        u = batch_uniforms(seed, stream_ids, 2)
        left = np.where(u[:, 0] < p_left_plus, 1, -1).astype(np.int8)
        c_plus = np.where(left == 1, c_given_plus, c_given_minus)
        right = np.where(u[:, 1] < c_plus, 1, -1).astype(np.int8)
        return np.column_stack([left, right])
    if model.kind in ("lhv_deterministic", "lhv_stochastic"):
        cdf = _weight_cdf(model)
        u = batch_uniforms(seed, stream_ids, 1)[:, 0]
        lam = np.minimum(np.searchsorted(cdf, u, side="right"), 15)
        strategies = [LhvStrategy.from_index(i) for i in range(16)]
        left_resp = np.array([s.response_left[x] for s in strategies], dtype=np.int8)
        right_resp = np.array([s.response_right[y] for s in strategies], dtype=np.int8)
        return np.column_stack([left_resp[lam], right_resp[lam]])
    cdf = np.cumsum(np.array(model.table[(x, y)]))
    u = batch_uniforms(seed, stream_ids, 1)[:, 0]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), 3)
    return _OUTCOME_ARRAY[idx]


def generate_outcomes(
    model: ModelDescriptor,
    settings: SettingPair,
    seed: int,
    stream_start: int,
    count: int,
    threads: int = 1,
) -> np.ndarray:
    """Outcomes for trials with stream ids stream_start..stream_start+count-1.

    The result depends only on (model, settings, seed, stream ids): work is
    split into fixed-size chunks regardless of the thread count, so any
    worker pool assembles the same array.
    """
    _validate_pair(settings)
    if count < 0:
        raise ValueError("count must be non-negative")
    starts = list(range(0, count, _CHUNK))
    ranges = [
        np.arange(stream_start + lo, stream_start + min(lo + _CHUNK, count), dtype=np.uint64)
        for lo in starts
    ]
    if threads <= 1 or len(ranges) <= 1:
        chunks = [_outcome_batch(model, settings, seed, ids) for ids in ranges]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(
                pool.map(lambda ids: _outcome_batch(model, settings, seed, ids), ranges)
            )
    if not chunks:
        return np.empty((0, 2), dtype=np.int8)
    return np.concatenate(chunks, axis=0)


@dataclass(frozen=True)
class MarginalComparison:
    """One side's marginal under the two remote settings."""

    side: str
    local_label: str
    difference: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class NoSignallingReport:
    """Marginal-level signalling check plus the hidden-variable-level flag."""

    comparisons: tuple[MarginalComparison, ...]
    max_difference: float
    passed: bool
    hidden_variable_setting_dependent: bool
    trials_per_cell: int
    marginals: Mapping[SettingPair, tuple[float, float]]


def no_signalling_check(
    model: ModelDescriptor,
    trials_per_cell: int,
    seed: int = 0,
    threads: int = 1,
) -> NoSignallingReport:
    """Estimate each side's outcome marginals under each remote setting.

    A comparison passes when the marginal difference stays within five
    pooled binomial standard deviations. Superdeterministic models are
    additionally flagged: their hidden draw is conditioned on the setting
    pair, which is signalling at the hidden-variable level even when the
    measured marginals are balanced.
    """
    if trials_per_cell < 10_000:
        raise ValueError("trials_per_cell must be at least 10000")
    p_left: dict[SettingPair, float] = {}
    p_right: dict[SettingPair, float] = {}
    for pair_index, pair in enumerate(PAIR_ORDER):
        outcomes = generate_outcomes(
            model, pair, seed, pair_index * trials_per_cell, trials_per_cell, threads
        )
        p_left[pair] = float(np.mean(outcomes[:, 0] == 1))
        p_right[pair] = float(np.mean(outcomes[:, 1] == 1))

    def compare(side: str, label: str, p1: float, p2: float) -> MarginalComparison:
        pooled = 0.5 * (p1 + p2)
        sigma = math.sqrt(max(0.0, pooled * (1.0 - pooled)) * 2.0 / trials_per_cell)
        difference = abs(p1 - p2)
        return MarginalComparison(
            side=side,
            local_label=label,
            difference=difference,
            threshold=5.0 * sigma,
            passed=difference <= 5.0 * sigma,
        )

    comparisons = []
    for x in LEFT_LABELS:
        comparisons.append(compare("left", x, p_left[(x, "b")], p_left[(x, "b'")]))
    for y in RIGHT_LABELS:
        comparisons.append(compare("right", y, p_right[("a", y)], p_right[("a'", y)]))
    return NoSignallingReport(
        comparisons=tuple(comparisons),
        max_difference=max(c.difference for c in comparisons),
        passed=all(c.passed for c in comparisons),
        hidden_variable_setting_dependent=model.kind == "superdeterministic",
        trials_per_cell=trials_per_cell,
        marginals={pair: (p_left[pair], p_right[pair]) for pair in PAIR_ORDER},
    )
