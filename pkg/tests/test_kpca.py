import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diverse_nystrom import kpca, nystrom, sampling
from diverse_nystrom.kernel import gram

from .conftest import random_kernel


def test_all_landmarks_recover_spectrum():
    K = random_kernel(12, seed=1, sigma=2.0)
    model = kpca.fit(nystrom.build(K, range(12)), 12)
    np.testing.assert_allclose(model.eigvals, np.linalg.eigvalsh(K / 12)[::-1], atol=1e-8)
    assert kpca.reconstruction_error(K, model) == pytest.approx(0.0, abs=1e-8)


def test_single_landmark_eigenvalue():
    K = gram(np.array([[0.0], [0.1]]), 1.0)
    model = kpca.fit(nystrom.build(K, [0]), 1)
    assert model.eigvals[0] == pytest.approx(np.sum(K[:, 0] ** 2) / 2, rel=1e-12)


def test_eigvecs_orthonormal():
    K = random_kernel(20, seed=2)
    model = kpca.fit(nystrom.build(K, [0, 3, 5, 9, 11]), 3)
    np.testing.assert_allclose(model.eigvecs.T @ model.eigvecs, np.eye(5), atol=1e-8)
    assert np.all(np.diff(model.eigvals) <= 0) and np.all(model.eigvals >= 0)


def test_component_range():
    f = nystrom.build(random_kernel(5), [0, 1])
    for c in (0, 3):
        with pytest.raises(ValueError):
            kpca.fit(f, c)


def test_half_components():
    assert [kpca.half_components(k) for k in (1, 2, 7, 186)] == [1, 1, 3, 93]


def test_trace_identity_at_c_equal_k():
    K = random_kernel(15, seed=3)
    model = kpca.fit(nystrom.build(K, [1, 4, 8]), 3)
    err = kpca.reconstruction_error(K, model)
    assert err == pytest.approx(1.0 - model.eigvals.sum(), abs=1e-14)
    assert err >= 0


@given(st.integers(0, 10_000), st.integers(2, 10))
def test_domination_and_monotone_error(seed, k):
    K = random_kernel(30, seed=seed, sigma=0.8)
    C = sampling.sample_uniform(30, k, seed)
    f = nystrom.build(K, C)
    exact = np.linalg.eigvalsh(K / 30)[::-1]
    errs = []
    for c in range(1, k + 1):
        model = kpca.fit(f, c)
        assert np.all(model.eigvals <= exact[:k] + 1e-8)
        errs.append(kpca.reconstruction_error(K, model))
        assert errs[-1] >= exact[c:].sum() - 1e-8
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
