import math

import numpy as np
import pytest

from bellsim.models import lhv_deterministic_model
from bellsim.polytope import (
    CorrelationVector,
    FeasibilityVerdict,
    ViolatedFacet,
    enumerate_deterministic_strategies,
    facet_margin,
    local_membership,
    max_classical_s,
    strategy_correlation,
    vertex_matrix,
)
from bellsim.stats import PAIR_ORDER, SIGN_PATTERNS

from oracles import brute_force_max_s, deterministic_vertices, lp_local_membership

SQRT_HALF = math.sqrt(0.5)
SINGLET_OPTIMAL_VECTOR = CorrelationVector(-SQRT_HALF, SQRT_HALF, -SQRT_HALF, -SQRT_HALF)


class TestEnumeration:
    def test_sixteen_strategies(self):
        strategies = enumerate_deterministic_strategies()
        assert len(strategies) == 16
        assert len({s.index for s in strategies}) == 16

    def test_all_plus_vertex(self):
        vector = strategy_correlation(enumerate_deterministic_strategies()[0])
        assert vector.as_tuple() == (1.0, 1.0, 1.0, 1.0)

    def test_mixed_strategy_vertex(self):
        # responses (a -> +1, a' -> +1, b -> +1, b' -> -1) is index 1
        vector = strategy_correlation(enumerate_deterministic_strategies()[1])
        assert vector.as_tuple() == (1.0, -1.0, 1.0, -1.0)

    def test_vertex_matrix_matches_independent_enumeration(self):
        ours = {tuple(row) for row in vertex_matrix()}
        oracle = {tuple(row) for row in deterministic_vertices()}
        assert ours == oracle


class TestMaxClassicalS:
    @pytest.mark.parametrize("pattern", SIGN_PATTERNS)
    def test_exactly_two_for_every_pattern(self, pattern):
        assert max_classical_s(pattern) == 2.0
        assert brute_force_max_s(pattern) == 2.0

    def test_invalid_pattern_rejected(self):
        with pytest.raises(ValueError):
            max_classical_s((1, -1, -1, 1))


class TestCorrelationVector:
    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            CorrelationVector(1.1, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            CorrelationVector(math.nan, 0.0, 0.0, 0.0)

    def test_verdict_witness_exclusivity(self):
        with pytest.raises(ValueError):
            FeasibilityVerdict(feasible=True)
        with pytest.raises(ValueError):
            FeasibilityVerdict(feasible=False, weights=np.ones(16) / 16.0)
        with pytest.raises(ValueError):
            FeasibilityVerdict(
                feasible=True,
                weights=np.ones(16) / 16.0,
                violated_facet=ViolatedFacet((1, -1, 1, 1), 0.1),
            )


class TestMembership:
    def test_vertex_membership(self):
        verdict = local_membership(CorrelationVector(1.0, 1.0, 1.0, 1.0))
        assert verdict.feasible
        assert verdict.weights[0] == pytest.approx(1.0, abs=1e-8)
        assert np.all(verdict.weights >= -1e-12)

    def test_origin_membership(self):
        verdict = local_membership(CorrelationVector(0.0, 0.0, 0.0, 0.0))
        assert verdict.feasible
        assert verdict.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_singlet_optimal_infeasible(self):
        verdict = local_membership(SINGLET_OPTIMAL_VECTOR)
        assert not verdict.feasible
        assert verdict.violated_facet.sign_pattern == (1, -1, 1, 1)
        assert verdict.violated_facet.margin == pytest.approx(
            2.0 * math.sqrt(2.0) - 2.0, abs=1e-12
        )

    def test_witness_weights_reproduce_vector(self):
        rng = np.random.default_rng(42)
        vertices = vertex_matrix()
        for _ in range(50):
            mixture = rng.dirichlet(np.ones(16))
            target = mixture @ vertices
            verdict = local_membership(CorrelationVector(*target))
            assert verdict.feasible
            recovered = verdict.weights @ vertices
            assert np.max(np.abs(recovered - target)) < 1e-8
            assert verdict.weights.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(verdict.weights >= 0.0)

    def test_statistical_tolerance_allows_boundary_noise(self):
        # a point just outside a facet is accepted under a statistical slack
        scale = (2.0 + 2e-4) / 4.0
        vector = CorrelationVector(-scale, scale, -scale, -scale)
        strict = local_membership(vector)
        assert not strict.feasible
        assert strict.violated_facet.margin == pytest.approx(2e-4, abs=1e-12)
        loose = local_membership(vector, facet_tolerance=1e-3)
        assert loose.feasible

    def test_facet_margin_on_pr_box(self):
        margin, pattern = facet_margin(CorrelationVector(1.0, -1.0, 1.0, 1.0))
        assert margin == pytest.approx(2.0, abs=1e-12)
        assert pattern == (1, -1, 1, 1)


class TestOracleAgreement:
    def test_facets_agree_with_lp_on_random_vectors(self):
        rng = np.random.default_rng(2025)
        for _ in range(500):
            vector = CorrelationVector(*rng.uniform(-1.0, 1.0, 4))
            assert local_membership(vector).feasible == lp_local_membership(
                vector.as_tuple()
            )

    def test_quantum_vectors_classified_by_best_pattern(self):
        from bellsim.experiment import model_exact_correlations
        from bellsim.models import quantum_model

        rng = np.random.default_rng(31415)
        for _ in range(200):
            angles = tuple(float(t) for t in rng.uniform(0.0, 2.0 * math.pi, 4))
            vector = model_exact_correlations(quantum_model("psi_minus", angles))
            values = vector.as_tuple()
            per_pattern = {
                pattern: abs(sum(s * e for s, e in zip(pattern, values)))
                for pattern in SIGN_PATTERNS
            }
            best_pattern = max(per_pattern, key=per_pattern.get)
            verdict = local_membership(vector)
            if per_pattern[best_pattern] <= 2.0 + 1e-9:
                assert verdict.feasible
            else:
                assert not verdict.feasible
                assert verdict.violated_facet.sign_pattern == best_pattern

    def test_lhv_mixture_vectors_always_feasible(self):
        rng = np.random.default_rng(161803)
        vertices = vertex_matrix()
        for _ in range(100):
            mixture = rng.dirichlet(np.ones(16) * 0.3)
            vector = CorrelationVector(*(mixture @ vertices))
            assert local_membership(vector).feasible
            assert lp_local_membership(vector.as_tuple())


def test_deterministic_model_vertices_match_strategy_correlations():
    for index in range(16):
        model = lhv_deterministic_model(index)
        weights = np.asarray(model.weights)
        vector = weights @ vertex_matrix()
        expected = strategy_correlation(
            enumerate_deterministic_strategies()[index]
        ).as_tuple()
        assert tuple(vector) == expected
