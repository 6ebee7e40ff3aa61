import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infsamp.errors import ContractViolation
from infsamp.sampling import (DETERMINISTIC_BIB, PROBABILISTIC_BIB,
                              SamplerConfig, batch_in_bag_sample,
                              post_hoc_sample, robustness_bound,
                              sigmoid_derivative, sigmoid_probability,
                              target_count, weighted_draw_without_replacement,
                              write_selection_csv)


class TestSigmoid:
    def test_zero_is_half(self):
        for alpha in (0.5, 1.0, 7.0):
            assert sigmoid_probability(0.0, alpha) == 0.5

    def test_analytic_values(self):
        assert sigmoid_probability(math.log(3), 1.0) == pytest.approx(0.25)
        assert sigmoid_probability(-math.log(9), 1.0) == pytest.approx(0.9)

    def test_extreme_scores_stay_inside_unit_interval(self):
        for phi in (-1e9, -50.0, 50.0, 1e9):
            p = sigmoid_probability(phi, 1.0)
            assert 0.0 < p < 1.0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0.01, 10.0))
    def test_strictly_decreasing(self, a, b, alpha):
        lo, hi = min(a, b), max(a, b)
        p_lo, p_hi = sigmoid_probability(lo, alpha), sigmoid_probability(hi, alpha)
        assert p_lo >= p_hi
        if (hi - lo) * alpha > 1e-9 and max(abs(a), abs(b)) * alpha < 30:
            # gaps below float resolution of exp() cannot stay strict
            assert p_lo > p_hi

    def test_alpha_must_be_positive(self):
        with pytest.raises(ContractViolation):
            sigmoid_probability(0.0, 0.0)


class TestSigmoidDerivative:
    def test_max_slope_at_zero(self):
        assert sigmoid_derivative(0.0, 1.0) == pytest.approx(-0.25)
        assert sigmoid_derivative(0.0, 3.0) == pytest.approx(-0.75)

    def test_saturation(self):
        assert sigmoid_derivative(60.0, 1.0) == pytest.approx(0.0, abs=1e-15)
        assert sigmoid_derivative(-60.0, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_formula_value(self):
        # pi(ln 3; alpha=2) = 0.1, so the slope is -2 * 0.1 * 0.9
        assert sigmoid_derivative(math.log(3), 2.0) == pytest.approx(-0.18)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            phi = float(rng.uniform(-5, 5))
            alpha = float(rng.uniform(0.1, 4.0))
            h = 1e-7
            fd = (sigmoid_probability(phi + h, alpha)
                  - sigmoid_probability(phi - h, alpha)) / (2 * h)
            assert sigmoid_derivative(phi, alpha) == pytest.approx(fd, abs=1e-6)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-500, 500), st.floats(0.01, 8.0))
    def test_bounded_by_quarter_alpha(self, phi, alpha):
        val = abs(sigmoid_derivative(phi, alpha))
        assert val <= alpha / 4 + 1e-15
        if abs(phi) * alpha > 1e-6:
            assert val < alpha / 4


class TestTargetCount:
    def test_ceiling(self):
        assert target_count(10, 0.10) == 1
        assert target_count(10, 0.11) == 2
        assert target_count(4, 0.5) == 2

    def test_float_fuzz(self):
        assert target_count(15, 0.2) == 3       # 0.2 * 15 = 3.0000000000000004
        assert target_count(10, 0.3) == 3

    def test_floor_and_cap(self):
        assert target_count(1, 0.05) == 1
        assert target_count(3, 0.05, min_keep=2) == 2
        assert target_count(2, 1.0, min_keep=5) == 2


class TestWeightedDraw:
    def test_small_k_all_returned(self):
        gen = np.random.default_rng(0)
        assert weighted_draw_without_replacement([1, 2], [0.5, 0.5], 5,
                                                 gen) == [1, 2]

    def test_zero_weight_never_drawn(self):
        gen = np.random.default_rng(1)
        for _ in range(200):
            out = weighted_draw_without_replacement([1, 2, 3],
                                                    [1.0, 0.0, 1.0], 2, gen)
            assert 2 not in out

    def test_single_draw_proportional(self):
        weights = np.array([0.1, 0.2, 0.3, 0.4])
        counts = np.zeros(4)
        for t in range(20000):
            gen = np.random.default_rng(t)
            picked = weighted_draw_without_replacement([0, 1, 2, 3], weights,
                                                       1, gen)[0]
            counts[picked] += 1
        freq = counts / counts.sum()
        np.testing.assert_allclose(freq, weights, atol=0.02)


class TestBatchInBag:
    def test_ceil_count_per_bag(self):
        config = SamplerConfig(ratio=0.10)
        bags = [(0, list(range(10)), np.zeros(10))]
        result = batch_in_bag_sample(bags, config, rng_seed=1)
        assert result.per_bag_counts[0] == (1, 10)
        assert len(result.kept) == 1

    def test_singleton_bag_always_kept(self):
        for mode in (PROBABILISTIC_BIB, DETERMINISTIC_BIB):
            config = SamplerConfig(ratio=0.05, mode=mode)
            result = batch_in_bag_sample([(3, [42], [0.7])], config,
                                         rng_seed=0)
            assert result.kept == frozenset([42])

    def test_equal_phi_marginals_near_half(self):
        config = SamplerConfig(ratio=0.5)
        counts = np.zeros(4)
        trials = 10_000
        for t in range(trials):
            result = batch_in_bag_sample([(0, [0, 1, 2, 3], np.zeros(4))],
                                         config, rng_seed=t)
            for iid in result.kept:
                counts[iid] += 1
        np.testing.assert_allclose(counts / trials, 0.5, atol=0.02)

    def test_deterministic_mode_takes_smallest_phi(self):
        config = SamplerConfig(ratio=0.5, mode=DETERMINISTIC_BIB)
        bags = [(0, [10, 11, 12, 13], [0.3, -0.2, 0.5, -0.2])]
        result = batch_in_bag_sample(bags, config, rng_seed=0)
        # ties on phi=-0.2 break by instance id: 11 before 13
        assert result.kept == frozenset([11, 13])
        assert result.probabilities_used[11] == 1.0
        assert result.probabilities_used[10] == 0.0

    def test_seed_determinism_and_bag_order_independence(self):
        config = SamplerConfig(ratio=0.4)
        rng = np.random.default_rng(9)
        bags = [(b, list(range(10 * b, 10 * b + 6)), rng.normal(size=6))
                for b in range(5)]
        a = batch_in_bag_sample(bags, config, rng_seed=77)
        b = batch_in_bag_sample(list(reversed(bags)), config, rng_seed=77)
        assert a.kept == b.kept
        c = batch_in_bag_sample(bags, config, rng_seed=78)
        assert a.kept != c.kept  # different stream actually changes draws

    def test_ratio_preservation_invariant(self):
        rng = np.random.default_rng(3)
        config = SamplerConfig(ratio=0.3)
        bags = [(b, list(range(100 * b, 100 * b + size)),
                 rng.normal(size=size))
                for b, size in enumerate(rng.integers(1, 20, size=30))]
        result = batch_in_bag_sample(bags, config, rng_seed=5)
        for bag_id, (kept, total) in result.per_bag_counts.items():
            assert 0.3 <= kept / total <= 0.3 + 1 / total + 1e-12

    def test_empty_bag_rejected(self):
        with pytest.raises(ContractViolation):
            batch_in_bag_sample([(0, [], [])], SamplerConfig(), rng_seed=0)


class TestPostHoc:
    def test_keep_everything_at_full_ratio(self):
        entries = [(i, i % 3, 0.0) for i in range(12)]
        result = post_hoc_sample(entries, SamplerConfig(ratio=1.0), rng_seed=0)
        assert result.kept == frozenset(range(12))

    def test_dominant_weight_always_kept(self):
        entries = [(0, 0, -800.0)] + [(i, 0, 800.0) for i in range(1, 10)]
        for seed in range(50):
            result = post_hoc_sample(entries, SamplerConfig(ratio=0.1),
                                     rng_seed=seed)
            assert result.kept == frozenset([0])

    def test_majority_domination_vs_bib(self):
        # 90/10 instance split with equal scores: pooled draws track the
        # 9:1 marginal while in-bag sampling pins every bag's share
        entries = [(i, 0, 0.0) for i in range(90)] + \
                  [(i, 1, 0.0) for i in range(90, 100)]
        kept_minority = []
        for seed in range(200):
            result = post_hoc_sample(entries, SamplerConfig(ratio=0.1),
                                     rng_seed=seed)
            kept_minority.append(result.per_bag_counts[1][0])
        assert np.mean(kept_minority) == pytest.approx(1.0, abs=0.3)
        bags = [(0, list(range(90)), np.zeros(90)),
                (1, list(range(90, 100)), np.zeros(10))]
        for seed in range(50):
            res = batch_in_bag_sample(bags, SamplerConfig(ratio=0.1),
                                      rng_seed=seed)
            assert res.per_bag_counts[1][0] == 1

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            post_hoc_sample([], SamplerConfig(), rng_seed=0)


class TestRobustnessBound:
    def test_exact_zero_when_scores_agree(self):
        rng = np.random.default_rng(4)
        phi = rng.normal(size=6)
        pair = rng.normal(size=(6, 3))
        for mode in ("sigmoid", "deterministic"):
            bound = robustness_bound(phi, phi, pair, alpha=1.0, mode=mode)
            assert bound.exact_bound == 0.0

    def test_deterministic_threshold_crossing(self):
        eps = 0.01
        pair = np.array([[1.5, -0.5]])
        bound = robustness_bound([eps], [-eps], pair, mode="deterministic")
        assert bound.exact_bound == pytest.approx(1.5 ** 2 + 0.5 ** 2)
        assert bound.taylor_bound is None

    def test_sigmoid_crossing_vanishes_with_epsilon(self):
        pair = np.array([[1.5, -0.5]])
        row = 1.5 ** 2 + 0.5 ** 2
        for eps in (0.05, 0.005):
            bound = robustness_bound([eps], [-eps], pair, alpha=1.0,
                                     mode="sigmoid")
            approx = (2 * eps * 0.25) ** 2 * row
            assert bound.exact_bound == pytest.approx(approx, rel=1e-2)

    def test_taylor_converges_to_exact(self):
        rng = np.random.default_rng(5)
        phi = rng.uniform(-0.5, 0.5, size=10)
        pair = rng.normal(size=(10, 4))
        direction = rng.uniform(-1, 1, size=10)
        gaps = []
        for scale in (0.1, 0.01, 0.001):
            bound = robustness_bound(phi, phi + scale * direction, pair,
                                     alpha=1.0)
            gaps.append(abs(bound.exact_bound - bound.taylor_bound)
                        / bound.exact_bound)
        assert gaps[0] > gaps[1] > gaps[2]

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            robustness_bound([0.1, 0.2], [0.1], np.ones((2, 2)))
        with pytest.raises(ContractViolation):
            robustness_bound([0.1], [0.1], np.ones((2, 2)))


class TestSelectionCsv:
    def test_columns_and_rows(self, tmp_path):
        config = SamplerConfig(ratio=0.5)
        bags = [(0, [1, 2, 3, 4], [0.1, -0.1, 0.2, -0.2])]
        result = batch_in_bag_sample(bags, config, rng_seed=0)
        path = tmp_path / "sel.csv"
        write_selection_csv(result, {i: p for i, p in
                                     zip([1, 2, 3, 4],
                                         [0.1, -0.1, 0.2, -0.2])},
                            {i: 0 for i in [1, 2, 3, 4]}, path, epoch=2)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "instance_id,bag_id,phi,pi,kept,epoch"
        assert len(lines) == 5
        assert sum(int(line.split(",")[4]) for line in lines[1:]) == 2
