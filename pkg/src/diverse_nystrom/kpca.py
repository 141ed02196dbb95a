"""Nystrom kernel PCA and its reconstruction error.

The Gram matrix is used uncentered: the RKHS functions are assumed to have
zero mean under the data distribution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nystrom import NystromFactor


@dataclass(frozen=True)
class KpcaModel:
    eigvals: np.ndarray
    eigvecs: np.ndarray
    c: int
    landmarks: np.ndarray
    n: int

    @property
    def retained(self) -> np.ndarray:
        return self.eigvals[: self.c]


def fit(factor: NystromFactor, c: int) -> KpcaModel:
    """Eigendecomposition of ``M / n`` with ``M = R^{-T} K_C^T K_C R^{-1}``.

    ``R`` is the Cholesky factor of ``K_CC``; ``M`` is similar to the symmetric
    ``K_CC^{-1/2} K_C^T K_C K_CC^{-1/2}`` and shares its eigenvalues.
    """
    k = factor.k
    if not 1 <= c <= k:
        raise ValueError(f"c must be in [1, {k}], got {c}")
    F = factor.features()
    n = F.shape[0]
    M = F.T @ F
    M = 0.5 * (M + M.T)
    w, U = np.linalg.eigh(M / n)
    order = np.argsort(w)[::-1]
    w = np.maximum(w[order], 0.0)
    return KpcaModel(w, U[:, order], c, factor.landmarks, n)


def reconstruction_error(K: np.ndarray, model: KpcaModel) -> float:
    """``trace(K)/n - sum of the c leading Nystrom eigenvalues``."""
    return float(np.trace(K) / K.shape[0] - np.sum(model.retained))


def half_components(k: int) -> int:
    return max(1, k // 2)
