import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diverse_nystrom import kernel
from diverse_nystrom.kernel import NotPositiveDefinite

from .conftest import random_kernel


class TestGram:
    def test_identical_points_give_one(self):
        K = kernel.gram(np.array([[1.0, 2.0], [1.0, 2.0]]), 0.7)
        assert K[0, 1] == 1.0

    def test_distance_equal_to_sigma(self):
        K = kernel.gram(np.array([[0.0], [2.0]]), 2.0)
        assert K[0, 1] == pytest.approx(math.exp(-1), abs=1e-15)

    def test_distance_two_unit_bandwidth(self):
        K = kernel.gram(np.array([[0.0, 0.0], [2.0, 0.0]]), 1.0)
        assert K[0, 1] == pytest.approx(math.exp(-4), rel=1e-14)

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            kernel.gram(np.zeros((2, 1)), 0.0)

    def test_symmetric_unit_diagonal_and_pd(self):
        K = random_kernel(15, seed=1)
        assert np.array_equal(K, K.T)
        assert np.all(np.diag(K) == 1.0)
        assert np.all((K > 0) & (K <= 1))
        assert np.linalg.eigvalsh(K)[0] > 0


class TestCrossGram:
    def test_all_landmarks_equals_gram(self):
        X = np.random.default_rng(0).random((6, 2))
        np.testing.assert_allclose(kernel.cross_gram(X, range(6), 0.8), kernel.gram(X, 0.8), atol=1e-12)

    def test_single_landmark_column(self):
        X = np.random.default_rng(1).random((5, 2))
        col = kernel.cross_gram(X, [3], 0.5)[:, 0]
        expected = np.exp(-np.sum((X - X[3]) ** 2, axis=1) / 0.25)
        np.testing.assert_allclose(col, expected, atol=1e-12)

    def test_empty(self):
        assert kernel.cross_gram(np.zeros((4, 2)), [], 1.0).shape == (4, 0)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            kernel.cross_gram(np.zeros((4, 2)), [4], 1.0)


class TestSubmatrix:
    def test_full_singleton_pair(self):
        K = random_kernel(5)
        np.testing.assert_array_equal(kernel.submatrix(K, range(5)), K)
        np.testing.assert_array_equal(kernel.submatrix(K, [2]), [[1.0]])
        np.testing.assert_array_equal(kernel.submatrix(K, [1, 3]), [[1.0, K[1, 3]], [K[3, 1], 1.0]])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            kernel.submatrix(random_kernel(4), [1, 1])


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(kernel.cholesky(np.eye(3)).R, np.eye(3))

    def test_hand_example(self):
        R = kernel.cholesky(np.array([[4.0, 2.0], [2.0, 3.0]])).R
        np.testing.assert_allclose(R, [[2.0, 1.0], [0.0, math.sqrt(2.0)]], atol=1e-15)

    def test_rank_deficient_reports_pivot(self):
        with pytest.raises(NotPositiveDefinite) as err:
            kernel.cholesky(np.ones((2, 2)))
        assert err.value.pivot == 1

    def test_logdet_examples(self):
        assert kernel.logdet(kernel.cholesky(np.eye(4))) == 0.0
        f = kernel.CholeskyFactor(np.array([[2.0, 1.0], [0.0, math.sqrt(2.0)]]))
        assert kernel.logdet(f) == pytest.approx(math.log(8.0), abs=1e-15)
        assert kernel.logdet(kernel.empty_factor()) == 0.0

    def test_logdet_matches_determinant(self):
        K = random_kernel(12, seed=4, sigma=2.0)
        sign, ld = np.linalg.slogdet(K)
        assert kernel.logdet(kernel.cholesky(K)) == pytest.approx(ld, abs=1e-8)


class TestUpdates:
    def test_append_to_empty(self):
        f = kernel.chol_append(kernel.empty_factor(), [], 9.0)
        np.testing.assert_array_equal(f.R, [[3.0]])

    def test_append_matches_refactorization(self):
        K = random_kernel(7, seed=2)
        f = kernel.cholesky(K[:6, :6])
        g = kernel.chol_append(f, K[:6, 6], K[6, 6])
        assert kernel.logdet(g) == pytest.approx(kernel.logdet(kernel.cholesky(K)), abs=1e-10)
        np.testing.assert_allclose(g.matrix(), K, atol=1e-12)

    def test_append_duplicate_fails(self):
        K = random_kernel(3)
        f = kernel.cholesky(K)
        with pytest.raises(NotPositiveDefinite):
            kernel.chol_append(f, K[:, 1], 1.0)

    def test_remove_from_single(self):
        f = kernel.chol_remove(kernel.cholesky(np.array([[2.0]])), 0)
        assert f.size == 0 and kernel.logdet(f) == 0.0

    @pytest.mark.parametrize("pos", [0, 2, 5])
    def test_remove_matches_refactorization(self, pos):
        K = random_kernel(6, seed=5)
        g = kernel.chol_remove(kernel.cholesky(K), pos)
        keep = [i for i in range(6) if i != pos]
        fresh = kernel.cholesky(K[np.ix_(keep, keep)])
        assert kernel.logdet(g) == pytest.approx(kernel.logdet(fresh), abs=1e-10)
        np.testing.assert_allclose(g.R, fresh.R, atol=1e-10)

    def test_remove_last_is_truncation(self):
        f = kernel.cholesky(random_kernel(5, seed=6))
        np.testing.assert_allclose(kernel.chol_remove(f, 4).R, f.R[:4, :4], atol=1e-15)

    def test_remove_out_of_range(self):
        with pytest.raises(IndexError):
            kernel.chol_remove(kernel.cholesky(np.eye(2)), 2)

    @given(st.integers(0, 2**32 - 1), st.lists(st.booleans(), min_size=1, max_size=30))
    def test_interleaved_updates_track_fresh_logdet(self, seed, ops):
        rng = np.random.default_rng(seed)
        K = random_kernel(10, seed=seed, sigma=1.5)
        members = [0]
        f = kernel.cholesky(K[:1, :1])
        for add in ops:
            out = [i for i in range(10) if i not in members]
            if (add and out) or len(members) == 1:
                c = int(rng.choice(out))
                f = kernel.chol_append(f, K[members, c], K[c, c])
                members.append(c)
            else:
                p = int(rng.integers(len(members)))
                f = kernel.chol_remove(f, p)
                members.pop(p)
            fresh = kernel.cholesky(K[np.ix_(members, members)])
            assert abs(kernel.logdet(f) - kernel.logdet(fresh)) <= 1e-8


def test_gram_binary_roundtrip(tmp_path):
    K = random_kernel(5)
    path = tmp_path / "k.bin"
    kernel.save_gram(path, K)
    raw = path.read_bytes()
    assert int.from_bytes(raw[:8], "little") == 5 and len(raw) == 8 + 8 * 25
    np.testing.assert_array_equal(kernel.load_gram(path), K)
