import numpy as np
import pytest
import scipy.stats

from infsamp.errors import ContractViolation, DivergenceError
from infsamp.influence import (InverseHvp, LissaParams,
                               aggregate_validation_gradient,
                               exact_inverse_hvp, influence_matrix,
                               influence_scores, lissa_inverse_hvp,
                               loo_retrain_oracle, read_influence_csv,
                               write_influence_csv)
from infsamp.model import (ErmConfig, SoftmaxModel, batch_gradients,
                           train_erm)


def seeded_problem(seed, n=12, d=2, K=2, l2=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, K, size=n)
    model = SoftmaxModel(rng.normal(size=(d, K)) * 0.5, l2_reg=l2)
    return model, X, y, rng


class TestAggregateValidationGradient:
    def test_all_correct_gives_zero(self):
        model = SoftmaxModel(np.array([[90.0, -90.0]]))
        Xv = np.array([[1.0], [2.0]])
        yv = np.array([0, 0])
        g = aggregate_validation_gradient(model, Xv, yv)
        np.testing.assert_allclose(g, 0.0, atol=1e-30)

    def test_singleton_equals_instance_gradient(self):
        model, X, y, _ = seeded_problem(0)
        g = aggregate_validation_gradient(model, X[:1], y[:1])
        np.testing.assert_allclose(g, batch_gradients(model, X[:1], y[:1])[0],
                                   atol=1e-15)

    def test_mean_of_ten(self):
        model, X, y, _ = seeded_problem(1, n=10)
        g = aggregate_validation_gradient(model, X, y)
        singles = np.stack([batch_gradients(model, X[i:i + 1], y[i:i + 1])[0]
                            for i in range(10)])
        np.testing.assert_allclose(g, singles.mean(axis=0), atol=1e-12)

    def test_empty_rejected(self):
        model = SoftmaxModel(np.zeros((2, 2)))
        with pytest.raises(ContractViolation):
            aggregate_validation_gradient(model, np.empty((0, 2)), np.empty(0))


class TestExactInverseHvp:
    def test_pure_damping_identity(self):
        # zero features make the data Hessian vanish: H = (l2 + damping) I
        model = SoftmaxModel(np.zeros((2, 2)), l2_reg=0.3)
        X = np.zeros((4, 2))
        y = np.array([0, 1, 0, 1])
        v = np.array([1.0, -2.0, 3.0, 4.0])
        s = exact_inverse_hvp(model, X, y, v, damping=0.2)
        np.testing.assert_allclose(s.s, v / 0.5, atol=1e-12)
        assert s.converged and s.iterations == 1

    def test_zero_vector(self):
        model, X, y, _ = seeded_problem(2)
        s = exact_inverse_hvp(model, X, y, np.zeros(model.num_params),
                              damping=0.1)
        np.testing.assert_allclose(s.s, 0.0)

    def test_residual(self):
        from infsamp.influence import _damped_hvp
        model, X, y, rng = seeded_problem(3)
        v = rng.normal(size=model.num_params)
        s = exact_inverse_hvp(model, X, y, v, damping=0.05)
        back = _damped_hvp(model, X, y, s.s, 0.05)
        assert np.linalg.norm(back - v) / np.linalg.norm(v) < 1e-8

    def test_cap_and_damping_contracts(self):
        model, X, y, rng = seeded_problem(4)
        v = rng.normal(size=model.num_params)
        with pytest.raises(ContractViolation):
            exact_inverse_hvp(model, X, y, v, damping=-0.1)
        with pytest.raises(ContractViolation):
            exact_inverse_hvp(model, X, y, v, damping=0.1, dim_cap=2)
        bare = SoftmaxModel(model.beta, l2_reg=0.0)
        with pytest.raises(ContractViolation):
            exact_inverse_hvp(bare, X, y, v, damping=0.0)


class TestLissaInverseHvp:
    def test_pure_damping_identity(self):
        model = SoftmaxModel(np.zeros((2, 2)), l2_reg=0.4)
        X = np.zeros((6, 2))
        y = np.array([0, 1] * 3)
        v = np.array([2.0, 0.0, -1.0, 1.0])
        params = LissaParams(batch_size=6, max_iters=10000, scale=2.0,
                             damping=0.1, tol=1e-12, seed=0)
        s = lissa_inverse_hvp(model, X, y, v, params)
        np.testing.assert_allclose(s.s, v / 0.5, rtol=1e-9)
        assert s.converged

    def test_zero_vector_immediate(self):
        model, X, y, _ = seeded_problem(5)
        params = LissaParams(batch_size=4, max_iters=100, scale=10,
                             damping=0.1, tol=1e-8, seed=0)
        s = lissa_inverse_hvp(model, X, y, np.zeros(model.num_params), params)
        np.testing.assert_allclose(s.s, 0.0)
        assert s.converged and s.iterations == 1

    def test_full_batch_matches_exact(self):
        model, X, y, rng = seeded_problem(6, n=20, d=2, K=4)  # d*K = 8
        v = rng.normal(size=model.num_params)
        exact = exact_inverse_hvp(model, X, y, v, damping=0.05)
        params = LissaParams(batch_size=len(X), max_iters=50000, scale=6.0,
                             damping=0.05, tol=1e-6, seed=0)
        approx = lissa_inverse_hvp(model, X, y, v, params)
        rel = np.linalg.norm(approx.s - exact.s) / np.linalg.norm(exact.s)
        assert approx.converged and rel < 1e-3

    def test_error_decreases_with_tolerance(self):
        model, X, y, rng = seeded_problem(7, n=16)
        v = rng.normal(size=model.num_params)
        exact = exact_inverse_hvp(model, X, y, v, damping=0.05)
        errs = []
        for tol in (1e-2, 1e-4, 1e-6):
            params = LissaParams(batch_size=len(X), max_iters=100000,
                                 scale=6.0, damping=0.05, tol=tol, seed=0)
            s = lissa_inverse_hvp(model, X, y, v, params)
            errs.append(np.linalg.norm(s.s - exact.s)
                        / np.linalg.norm(exact.s))
        assert errs[0] > errs[1] > errs[2]

    def test_divergence_detected(self):
        rng = np.random.default_rng(8)
        model = SoftmaxModel(rng.normal(size=(3, 3)), l2_reg=0.0)
        X = rng.normal(size=(10, 3)) * 40   # spectral norm far above scale
        y = rng.integers(0, 3, size=10)
        v = rng.normal(size=9)
        params = LissaParams(batch_size=10, max_iters=100000, scale=1.0,
                             damping=0.0, tol=1e-10, seed=0)
        with pytest.raises(DivergenceError):
            lissa_inverse_hvp(model, X, y, v, params)


class TestInfluenceScores:
    def test_zero_s_gives_zero_phi_and_half_pi(self):
        model, X, y, _ = seeded_problem(9)
        s = InverseHvp(s=np.zeros(model.num_params),
                       model_fingerprint=model.fingerprint())
        report = influence_scores(s, model, X, y, list(range(len(X))))
        assert all(v == 0.0 for v in report.phi.values())
        assert all(v == 0.5 for v in report.pi.values())

    def test_perfectly_predicted_instance_scores_zero(self):
        model = SoftmaxModel(np.array([[400.0, -400.0]]), l2_reg=0.1)
        s = InverseHvp(s=np.ones(2), model_fingerprint=model.fingerprint())
        report = influence_scores(s, model, np.array([[1.0]]), np.array([0]),
                                  [7])
        assert report.phi[7] == 0.0

    def test_self_alignment_is_beneficial(self):
        # identity-Hessian regime: train point equal to the one validation
        # point gets phi = -||g||^2 / c < 0
        model = SoftmaxModel(np.zeros((2, 2)), l2_reg=0.5)
        Xh = np.zeros((3, 2))
        yh = np.array([0, 1, 0])
        x = np.array([[1.0, 2.0]])
        y = np.array([1])
        g = aggregate_validation_gradient(model, x, y)
        s = exact_inverse_hvp(model, Xh, yh, g, damping=0.0)
        report = influence_scores(s, model, x, y, [0])
        expected = -np.dot(g, g) / 0.5
        assert report.phi[0] == pytest.approx(expected, rel=1e-12)
        assert report.phi[0] < 0

    def test_sign_flips_with_validation_gradient(self):
        model, X, y, rng = seeded_problem(10)
        v = rng.normal(size=model.num_params)
        s_pos = exact_inverse_hvp(model, X, y, v, damping=0.1)
        s_neg = exact_inverse_hvp(model, X, y, -v, damping=0.1)
        rep_pos = influence_scores(s_pos, model, X, y, list(range(len(X))))
        rep_neg = influence_scores(s_neg, model, X, y, list(range(len(X))))
        for i in rep_pos.phi:
            assert rep_pos.phi[i] == pytest.approx(-rep_neg.phi[i], abs=1e-12)

    def test_linearity_in_s(self):
        model, X, y, rng = seeded_problem(11)
        vec = rng.normal(size=model.num_params)
        fp = model.fingerprint()
        base = influence_scores(InverseHvp(s=vec, model_fingerprint=fp),
                                model, X, y, list(range(len(X))))
        doubled = influence_scores(InverseHvp(s=2 * vec, model_fingerprint=fp),
                                   model, X, y, list(range(len(X))))
        for i in base.phi:
            assert doubled.phi[i] == pytest.approx(2 * base.phi[i], rel=1e-12)

    def test_stale_fingerprint_rejected(self):
        model, X, y, rng = seeded_problem(12)
        other = SoftmaxModel(model.beta + 1.0, l2_reg=model.l2_reg)
        s = InverseHvp(s=np.zeros(model.num_params),
                       model_fingerprint=other.fingerprint())
        with pytest.raises(ContractViolation):
            influence_scores(s, model, X, y, list(range(len(X))))
        report = influence_scores(s, model, X, y, list(range(len(X))),
                                  check_fingerprint=False)
        assert len(report.phi) == len(X)


class TestInfluenceMatrix:
    def test_row_sums_match_scores(self):
        model, X, y, rng = seeded_problem(13, n=15)
        Xv = rng.normal(size=(6, 2))
        yv = rng.integers(0, 2, size=6)
        ids = list(range(15))
        vids = list(range(100, 106))
        matrix_report = influence_matrix(model, (X, y, ids), (Xv, yv, vids),
                                         method="exact", damping=0.05)
        v = aggregate_validation_gradient(model, Xv, yv)
        s = exact_inverse_hvp(model, X, y, v, damping=0.05)
        score_report = influence_scores(s, model, X, y, ids)
        for i in ids:
            row_sum = sum(matrix_report.pairwise[(i, j)] for j in vids)
            assert row_sum == pytest.approx(score_report.phi[i], abs=1e-8)
            assert matrix_report.phi[i] == pytest.approx(score_report.phi[i],
                                                         abs=1e-8)

    def test_zero_gradient_row_is_zero(self):
        model = SoftmaxModel(np.array([[400.0, -400.0]]), l2_reg=0.1)
        X = np.array([[1.0], [0.5]])
        y = np.array([0, 0])     # both saturated correct: zero gradients
        Xv = np.array([[2.0]])
        yv = np.array([1])
        report = influence_matrix(model, (X, y, [0, 1]), (Xv, yv, [9]),
                                  method="exact", damping=0.1)
        assert report.pairwise[(0, 9)] == 0.0

    def test_duplicated_validation_columns_identical(self):
        model, X, y, rng = seeded_problem(14, n=8)
        xv = rng.normal(size=(1, 2))
        Xv = np.vstack([xv, xv])
        yv = np.array([1, 1])
        report = influence_matrix(model, (X, y, list(range(8))),
                                  (Xv, yv, [50, 51]), method="exact",
                                  damping=0.1)
        for i in range(8):
            assert report.pairwise[(i, 50)] == report.pairwise[(i, 51)]

    def test_pair_cap(self):
        model, X, y, rng = seeded_problem(15, n=30)
        Xv = rng.normal(size=(20, 2))
        yv = rng.integers(0, 2, size=20)
        with pytest.raises(ContractViolation, match="pairs"):
            influence_matrix(model, (X, y, list(range(30))),
                             (Xv, yv, list(range(20))), max_pairs=100)

    def test_lissa_method_agrees_with_exact(self):
        model, X, y, rng = seeded_problem(16, n=16)
        Xv = rng.normal(size=(3, 2))
        yv = rng.integers(0, 2, size=3)
        params = LissaParams(batch_size=16, max_iters=100000, scale=8.0,
                             damping=0.05, tol=1e-9, seed=1)
        exact = influence_matrix(model, (X, y, list(range(16))),
                                 (Xv, yv, [0, 1, 2]), method="exact",
                                 damping=0.05)
        approx = influence_matrix(model, (X, y, list(range(16))),
                                  (Xv, yv, [0, 1, 2]), method="lissa",
                                  lissa_params=params)
        for key, val in exact.pairwise.items():
            assert approx.pairwise[key] == pytest.approx(val, abs=1e-6)


class TestLooRetrainOracle:
    CONFIG = ErmConfig(l2_reg=0.1, grad_tol=1e-9, max_iters=50000)

    def test_duplicate_removal_cheaper_than_outlier(self):
        rng = np.random.default_rng(17)
        X = np.vstack([rng.normal(size=(10, 2)) + [2, 0],
                       rng.normal(size=(10, 2)) - [2, 0]])
        X = np.vstack([X, X[0], [8.0, 8.0]])       # duplicate pair + outlier
        y = np.array([0] * 10 + [1] * 10 + [0, 1])
        Xv = np.vstack([rng.normal(size=(5, 2)) + [2, 0],
                        rng.normal(size=(5, 2)) - [2, 0]])
        yv = np.array([0] * 5 + [1] * 5)
        base = train_erm(X, y, self.CONFIG)
        d_dup = loo_retrain_oracle(X, y, Xv, yv, 20, self.CONFIG, base)
        d_out = loo_retrain_oracle(X, y, Xv, yv, 21, self.CONFIG, base)
        assert abs(d_dup) < abs(d_out)

    def test_stationary_instance_small_delta(self):
        # an instance whose gradient vanishes at the optimum barely moves it
        rng = np.random.default_rng(18)
        X = rng.normal(size=(20, 2))
        y = rng.integers(0, 2, size=20)
        base = train_erm(X, y, self.CONFIG)
        from infsamp.model import batch_gradients
        G = batch_gradients(base, X, y)
        i = int(np.argmin(np.linalg.norm(G, axis=1)))
        delta = loo_retrain_oracle(X, y, X, y, i, self.CONFIG, base)
        assert abs(delta) < 5e-3

    def test_spearman_against_influence(self):
        rng = np.random.default_rng(19)
        centers = rng.normal(size=(3, 3)) * 2.0
        y = rng.integers(0, 3, size=30)
        X = centers[y] + rng.normal(size=(30, 3))
        yv = rng.integers(0, 3, size=10)
        Xv = centers[yv] + rng.normal(size=(10, 3))
        base = train_erm(X, y, self.CONFIG)
        v = aggregate_validation_gradient(base, Xv, yv)
        s = exact_inverse_hvp(base, X, y, v, damping=0.0)
        report = influence_scores(s, base, X, y, list(range(30)))
        phis = [report.phi[i] for i in range(30)]
        deltas = [loo_retrain_oracle(X, y, Xv, yv, i, self.CONFIG, base)
                  for i in range(30)]
        rho = scipy.stats.spearmanr(phis, [-30 * d for d in deltas]).statistic
        assert rho >= 0.9


class TestCsvRoundTrip:
    def test_influence_csv(self, tmp_path):
        model, X, y, _ = seeded_problem(20, n=5)
        s = InverseHvp(s=np.ones(model.num_params),
                       model_fingerprint=model.fingerprint(), epoch=3)
        report = influence_scores(s, model, X, y, [3, 1, 4, 1 + 10, 5])
        path = tmp_path / "influences.csv"
        write_influence_csv(report, {i: i % 2 for i in report.phi}, path)
        loaded = read_influence_csv(path)
        assert loaded.phi == report.phi
        assert loaded.pi == report.pi
        assert loaded.epoch == 3
