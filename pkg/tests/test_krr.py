import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diverse_nystrom import datasets, krr, nystrom
from diverse_nystrom.kernel import CholeskyFactor, NotPositiveDefinite, cholesky, gram

from .conftest import random_kernel

# 40-digit solution of (K_C^T K_C + n gamma K_CC) a = K_C^T y on the conftest
# oracle points with landmarks {0, 2}, y = (1, 2, -1, 0.5), gamma = 0.01.
ORACLE_COEF = [1.776746200059442, -1.244336382582103]
ORACLE_Y = np.array([1.0, 2.0, -1.0, 0.5])
# Bias and variance of the same Nystrom smoother with z = y and noise variance 0.04.
ORACLE_BIAS, ORACLE_VAR = 0.62838629052050248, 0.018667573648096971


def system(K, C):
    f = nystrom.build(K, C)
    return f.k_cross, f.chol_cc


class TestFitDirect:
    def test_scalar(self):
        m = krr.fit_direct(np.array([[1.0]]), cholesky(np.array([[1.0]])), [2.0], 1.0)
        assert m.coefficients[0] == pytest.approx(1.0)

    def test_frozen_oracle(self, oracle_kernel):
        m = krr.fit_direct(*system(oracle_kernel, [0, 2]), ORACLE_Y, 0.01)
        np.testing.assert_allclose(m.coefficients, ORACLE_COEF, rtol=1e-10)

    def test_shrinks_with_gamma(self):
        K = random_kernel(20, seed=1)
        y = np.random.default_rng(1).standard_normal(20)
        KC, R = system(K, [0, 4, 9])
        a = [np.linalg.norm(krr.fit_direct(KC, R, y, g).coefficients) for g in (1e-2, 1e-1)]
        assert a[1] < a[0]

    def test_all_landmarks_equal_full_krr(self):
        K = random_kernel(15, seed=2, sigma=1.5)
        y = np.random.default_rng(2).standard_normal(15)
        g = 1e-2
        m = krr.fit_direct(*system(K, range(15)), y, g)
        full = K @ np.linalg.solve(K + 15 * g * np.eye(15), y)
        np.testing.assert_allclose(K @ m.coefficients, full, atol=1e-6)

    @given(st.integers(0, 10_000), st.integers(1, 10))
    def test_normal_equation_residual(self, seed, k):
        K = random_kernel(25, seed=seed, sigma=1.0)
        y = np.random.default_rng(seed).standard_normal(25)
        KC, R = system(K, np.arange(k) * 2)
        g = 1e-3
        a = krr.fit_direct(KC, R, y, g).coefficients
        res = (KC.T @ KC + 25 * g * R.matrix()) @ a - KC.T @ y
        assert np.linalg.norm(res) <= 1e-6 * np.linalg.norm(KC.T @ y)

    def test_rejects_gamma(self):
        with pytest.raises(ValueError):
            krr.fit_direct(np.ones((1, 1)), cholesky(np.eye(1)), [1.0], 0.0)

    def test_singular_system_raises(self):
        K = gram(np.array([[0.0], [1e-9], [5.0]]), 1.0)
        KC = K[:, :2]
        with pytest.raises(NotPositiveDefinite):
            krr.fit_direct(KC, CholeskyFactor(np.eye(2)), [1.0, 1.0, 0.0], 1e-20)


class TestPredict:
    def test_interpolation_limit(self):
        X = np.linspace(0, 1, 6)[:, None]
        y = np.sin(3 * X[:, 0])
        m = krr.fit(datasets.DataMatrix(X, y), range(6), 0.5, 1e-12)
        np.testing.assert_allclose(m.predict(X), y, atol=1e-4)

    def test_zero_coefficients(self):
        m = krr.KrrModel(np.array([0, 1]), np.zeros(2), sigma=1.0, gamma=1.0)
        np.testing.assert_array_equal(krr.predict(m, np.ones((3, 2)), np.zeros((2, 2))), 0.0)

    def test_training_predictions_are_kc_times_coefficients(self):
        X = np.random.default_rng(3).random((30, 2))
        y = X[:, 0]
        m = krr.fit(datasets.DataMatrix(X, y), [2, 5, 11, 17], 0.4, 1e-4)
        KC = gram(X, 0.4)[:, [2, 5, 11, 17]]
        np.testing.assert_allclose(m.predict(X), KC @ m.coefficients, atol=1e-12)


class TestPreconditioner:
    def test_scalar_formula(self):
        R = cholesky(np.array([[0.8]]))
        p = krr.build_preconditioner(R, None, 10, 0.01, "uniform")
        assert p.B[0, 0] == pytest.approx(1 / math.sqrt(0.8**2 * 10 + 10 * 0.01 * 0.8))

    @pytest.mark.parametrize("choice", ["uniform", "inverse-leverage"])
    def test_inverts_inner_matrix(self, choice):
        K = random_kernel(40, seed=4, sigma=2.0)
        C = [0, 7, 13, 21, 33]
        _, R = system(K, C)
        scores = np.linspace(0.2, 0.9, 5)
        p = krr.build_preconditioner(R, scores, 40, 0.1, choice)
        Kcc = R.matrix()
        D = np.full(5, 40 / 5) if choice == "uniform" else 1 / scores
        inner = Kcc @ np.diag(D) @ Kcc + 40 * 0.1 * Kcc
        np.testing.assert_allclose(p.B @ p.B.T @ inner, np.eye(5), atol=1e-6)
        assert np.allclose(p.B, np.triu(p.B))

    def test_requires_scores(self):
        with pytest.raises(ValueError):
            krr.build_preconditioner(cholesky(np.eye(2)), None, 4, 0.1, "inverse-leverage")

    def test_unknown_choice(self):
        with pytest.raises(ValueError):
            krr.build_preconditioner(cholesky(np.eye(2)), None, 4, 0.1, "other")


class TestPcg:
    def test_matches_direct(self):
        K = random_kernel(60, seed=5, sigma=1.0)
        y = np.random.default_rng(5).standard_normal(60)
        KC, R = system(K, np.arange(0, 60, 6))
        direct = krr.fit_direct(KC, R, y, 1e-2).coefficients
        p = krr.build_preconditioner(R, None, 60, 1e-2)
        model, it = krr.fit_pcg(KC, R, y, 1e-2, p)
        assert model.converged
        np.testing.assert_allclose(model.coefficients, direct, rtol=1e-8, atol=1e-8)

    def test_identity_system_converges_immediately(self):
        x, it, ok, _ = krr.conjugate_gradient(np.eye(5), np.arange(1.0, 6.0))
        assert ok and it <= 5
        np.testing.assert_allclose(x, np.arange(1.0, 6.0))

    def test_non_convergence_flagged(self):
        K = random_kernel(50, seed=6, sigma=3.0)
        KC, R = system(K, np.arange(0, 50, 3))
        model, it = krr.fit_pcg(KC, R, np.ones(50), 1e-10, None, max_iter=2)
        assert it == 2 and not model.converged

    def test_preconditioning_reduces_iterations_when_ill_conditioned(self):
        rng = np.random.default_rng(7)
        raw, pre = [], []
        for t in range(10):
            X = rng.standard_normal((300, 3))
            K = gram(X, 2.0)
            C = np.sort(rng.choice(300, 25, replace=False))
            KC, R = system(K, C)
            y = X[:, 0]
            raw.append(krr.fit_pcg(KC, R, y, 1e-10)[1])
            pre.append(krr.fit_pcg(KC, R, y, 1e-10, krr.build_preconditioner(R, None, 300, 1e-10))[1])
        assert np.mean(pre) <= np.mean(raw)


class TestRisk:
    def test_frozen_oracle(self, oracle_kernel):
        Kh = nystrom.build(oracle_kernel, [0, 2]).approximation()
        b, v = krr.risk_components(Kh, ORACLE_Y, 0.01, 0.04)
        assert b == pytest.approx(ORACLE_BIAS, rel=1e-9)
        assert v == pytest.approx(ORACLE_VAR, rel=1e-9)

    def test_zero_signal(self):
        assert krr.risk_components(random_kernel(5), np.zeros(5), 0.1, 1.0)[0] == 0.0

    def test_zero_kernel(self):
        z = np.array([1.0, -2.0, 2.0])
        b, v = krr.risk_components(np.zeros((3, 3)), z, 0.5, 1.0)
        assert v == 0.0
        assert b == pytest.approx(np.linalg.norm(z) / math.sqrt(3))

    def test_monotone_in_gamma(self):
        K = random_kernel(20, seed=8)
        z = np.random.default_rng(8).standard_normal(20)
        comps = [krr.risk_components(K, z, g, 0.1) for g in (1e-3, 1e-2, 1e-1)]
        assert comps[0][0] <= comps[1][0] <= comps[2][0]
        assert comps[0][1] >= comps[1][1] >= comps[2][1]


class TestCrossValidation:
    def test_single_grid_point(self):
        d = datasets.generate_toy_regression(40, seed=0)
        assert krr.cross_validate_gamma(d, [0, 1, 2], 1.0, grid=[0.3]) == 0.3

    def test_empty_grid(self):
        d = datasets.generate_toy_regression(40, seed=0)
        with pytest.raises(ValueError):
            krr.cross_validate_gamma(d, [0, 1], 1.0, grid=[])

    def test_folds_partition(self):
        folds = krr.fold_indices(23, 5, seed=1)
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(23))

    def test_representable_noiseless_target_prefers_smallest(self):
        X = np.random.default_rng(3).standard_normal((150, 2))
        C = np.arange(0, 150, 15)
        y = gram(X, 2.0)[:, C] @ np.random.default_rng(4).standard_normal(C.size)
        d = datasets.DataMatrix(X, y)
        assert krr.cross_validate_gamma(d, C, 2.0, seed=0) == min(krr.DEFAULT_GAMMA_GRID)

    @pytest.mark.parametrize("seed", range(4))
    def test_noiseless_toy_needs_no_more_ridge_than_noisy(self, seed):
        C = np.arange(0, 200, 20)
        picked = []
        for noise in (0.0, 1.0):
            d = datasets.standardize(datasets.generate_toy_regression(200, 2, 20.0, noise, seed=seed))[0]
            picked.append(krr.cross_validate_gamma(d, C, 5.0, seed=seed))
        assert picked[0] <= picked[1]

    def test_deterministic(self):
        d = datasets.generate_toy_regression(100, seed=4, noise_sigma=0.5)
        a = krr.cross_validate_gamma(d, np.arange(0, 100, 4), 1.0, seed=2)
        assert a == krr.cross_validate_gamma(d, np.arange(0, 100, 4), 1.0, seed=2)


def test_export(tmp_path):
    m = krr.KrrModel(np.array([3, 8]), np.array([0.5, -1.25]), sigma=2.0, gamma=1e-3)
    path = tmp_path / "m.csv"
    krr.export_model(path, m)
    lines = path.read_text().splitlines()
    assert lines[0] == "# sigma=2.0,gamma=0.001"
    rows = list(csv.reader(lines[1:]))
    assert rows == [["landmark_index", "coefficient"], ["3", "0.5"], ["8", "-1.25"]]
