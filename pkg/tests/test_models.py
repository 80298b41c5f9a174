import math

import numpy as np
import pytest

from bellsim.models import (
    LhvStrategy,
    ModelDescriptor,
    SINGLET_OPTIMAL_ANGLES,
    catalog,
    generate_outcomes,
    lhv_deterministic_model,
    lhv_stochastic_model,
    no_signalling_check,
    nonlocal_model,
    pr_box_table,
    quantum_model,
    run_trial,
    superdeterministic_model,
)
from bellsim.quantum import expectation, make_bell_state
from bellsim.stats import PAIR_ORDER, correlation, counts_from_outcomes
from bellsim.streams import TrialStream

ALL_PLUS = lhv_deterministic_model(0)
UNIFORM_LHV = lhv_stochastic_model([1.0 / 16.0] * 16)
PR_BOX = superdeterministic_model(pr_box_table(1.0))


class TestLhvStrategy:
    def test_index_round_trip(self):
        for index in range(16):
            assert LhvStrategy.from_index(index).index == index

    def test_all_plus_is_zero(self):
        strategy = LhvStrategy.from_index(0)
        assert strategy.response_left == {"a": 1, "a'": 1}
        assert strategy.response_right == {"b": 1, "b'": 1}

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            LhvStrategy.from_index(16)

    def test_bad_response(self):
        with pytest.raises(ValueError):
            LhvStrategy(response_left={"a": 0, "a'": 1}, response_right={"b": 1, "b'": 1})


class TestDescriptorValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ModelDescriptor(kind="classical")

    def test_quantum_requires_state_and_angles(self):
        with pytest.raises(ValueError):
            ModelDescriptor(kind="quantum", state="psi_minus")
        with pytest.raises(ValueError):
            ModelDescriptor(kind="quantum", angles=(0.0, 1.0, 2.0, 3.0))
        with pytest.raises(ValueError):
            quantum_model(angles=(0.0, 1.0, 2.0))
        with pytest.raises(ValueError):
            quantum_model(angles=(0.0, 1.0, 2.0, math.nan))

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            lhv_stochastic_model([0.5] * 16)  # sums to 8
        with pytest.raises(ValueError):
            lhv_stochastic_model([-1.0 / 16.0] * 16)
        with pytest.raises(ValueError):
            lhv_stochastic_model([1.0])

    def test_deterministic_requires_point_mass(self):
        with pytest.raises(ValueError, match="point-mass"):
            ModelDescriptor(kind="lhv_deterministic", weights=tuple([1.0 / 16.0] * 16))

    def test_table_validation(self):
        table = pr_box_table(1.0)
        del table[("a", "b")]
        with pytest.raises(ValueError, match="missing"):
            superdeterministic_model(table)
        bad = pr_box_table(1.0)
        bad[("a", "b")] = (0.5, 0.5, 0.5, 0.5)
        with pytest.raises(ValueError, match="sums"):
            superdeterministic_model(bad)

    def test_pr_strength_validation(self):
        with pytest.raises(ValueError):
            pr_box_table(1.5)

    @pytest.mark.parametrize("name", sorted(catalog()))
    def test_catalog_round_trips_through_dict(self, name):
        model = catalog()[name]
        assert ModelDescriptor.from_dict(model.to_dict()) == model


class TestRunTrial:
    def test_constant_strategy_all_pairs(self):
        for pair in PAIR_ORDER:
            record = run_trial(ALL_PLUS, pair, TrialStream(1, 0))
            assert record.outcomes == (1, 1)
            assert record.hidden == 0

    def test_quantum_equal_angles_anticorrelated(self):
        theta = 0.7
        model = quantum_model("psi_minus", (theta, theta, theta, theta))
        for stream_id in range(200):
            record = run_trial(model, ("a", "b"), TrialStream(5, stream_id))
            assert record.outcomes[0] == -record.outcomes[1]
            assert record.hidden is None

    def test_pr_table_product_plus_one(self):
        for stream_id in range(200):
            record = run_trial(PR_BOX, ("a", "b"), TrialStream(9, stream_id))
            assert record.outcomes[0] * record.outcomes[1] == 1
            assert record.hidden in (0, 3)

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="settings"):
            run_trial(ALL_PLUS, ("a", "c"), TrialStream(0, 0))
        with pytest.raises(ValueError, match="settings"):
            run_trial(ALL_PLUS, ("b", "a"), TrialStream(0, 0))

    def test_determinism(self):
        model = quantum_model()
        first = run_trial(model, ("a'", "b"), TrialStream(123, 45))
        second = run_trial(model, ("a'", "b"), TrialStream(123, 45))
        assert first == second

    def test_lhv_left_outcome_ignores_right_label(self):
        # same stream -> same hidden strategy -> left response fixed
        for seed in range(30):
            one = run_trial(UNIFORM_LHV, ("a", "b"), TrialStream(seed, 0))
            other = run_trial(UNIFORM_LHV, ("a", "b'"), TrialStream(seed, 0))
            assert one.outcomes[0] == other.outcomes[0]
            assert one.hidden == other.hidden


class TestBatchGeneration:
    @pytest.mark.parametrize(
        "model",
        [
            quantum_model(),
            nonlocal_model(),
            ALL_PLUS,
            UNIFORM_LHV,
            PR_BOX,
        ],
        ids=["quantum", "nonlocal", "lhv_det", "lhv_stoch", "superdet"],
    )
    def test_batch_matches_scalar(self, model):
        pair = ("a'", "b'")
        seed = 31337
        batch = generate_outcomes(model, pair, seed, stream_start=100, count=500)
        for offset in range(500):
            record = run_trial(model, pair, TrialStream(seed, 100 + offset))
            assert tuple(int(v) for v in batch[offset]) == record.outcomes

    def test_thread_count_does_not_change_outcomes(self):
        model = quantum_model()
        single = generate_outcomes(model, ("a", "b"), 7, 0, 150_000, threads=1)
        pooled = generate_outcomes(model, ("a", "b"), 7, 0, 150_000, threads=4)
        assert np.array_equal(single, pooled)

    def test_empty_batch(self):
        assert generate_outcomes(quantum_model(), ("a", "b"), 0, 0, 0).shape == (0, 2)


class TestQuantumFidelity:
    def test_empirical_matches_exact_ten_angle_pairs(self):
        state = make_bell_state("psi_minus")
        rng = np.random.default_rng(2718)
        n = 10**6
        for case in range(10):
            ta, tb = rng.uniform(0.0, 2.0 * math.pi, 2)
            model = quantum_model("psi_minus", (float(ta), 0.0, float(tb), 0.0))
            outcomes = generate_outcomes(model, ("a", "b"), 1000 + case, 0, n)
            estimate = correlation(counts_from_outcomes(outcomes))
            exact = expectation(state, float(ta), float(tb))
            bound = 5.0 * math.sqrt((1.0 - exact**2) / n) + 1e-9
            assert abs(estimate.value - exact) < max(bound, 5.0 * estimate.std_error)


class TestNoSignalling:
    def test_requires_enough_trials(self):
        with pytest.raises(ValueError, match="at least"):
            no_signalling_check(quantum_model(), 100)

    def test_quantum_marginals_balanced(self):
        report = no_signalling_check(quantum_model(), 10**6, seed=11)
        assert report.max_difference < 0.004
        assert report.passed
        assert not report.hidden_variable_setting_dependent

    def test_pr_box_flagged_at_hidden_level(self):
        report = no_signalling_check(PR_BOX, 10**5, seed=13)
        assert report.hidden_variable_setting_dependent
        # PR-box marginals are uniform, so the measured level passes
        assert report.passed

    def test_uniform_lhv_marginals(self):
        report = no_signalling_check(UNIFORM_LHV, 10**6, seed=17)
        assert report.max_difference < 0.004
        assert report.passed
        assert not report.hidden_variable_setting_dependent


def test_singlet_optimal_angles_constant():
    assert SINGLET_OPTIMAL_ANGLES == (0.0, math.pi / 2.0, math.pi / 4.0, 3.0 * math.pi / 4.0)
