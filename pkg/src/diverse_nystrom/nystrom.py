"""Nystrom approximation ``K_C K_CC^{-1} K_C^T`` and its diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernel import (CholeskyFactor, NotPositiveDefinite, _values, as_landmarks, cholesky,
                     cross_gram, gram, logdet)

#: Jitter added to ``K_CC`` when measuring approximation error.
ERROR_JITTER = 1e-12


@dataclass(frozen=True)
class NystromFactor:
    landmarks: np.ndarray
    k_cross: np.ndarray
    chol_cc: CholeskyFactor
    jitter: float = ERROR_JITTER

    @property
    def k(self) -> int:
        return self.landmarks.size

    @property
    def n(self) -> int:
        return self.k_cross.shape[0]

    def features(self) -> np.ndarray:
        """``F = K_C R^{-1}`` so that ``F F^T`` is the approximation."""
        return solve_triangular(self.chol_cc.R, self.k_cross.T, trans="T", lower=False).T

    def approximation(self) -> np.ndarray:
        F = self.features()
        return F @ F.T


def build(K: np.ndarray, landmarks) -> NystromFactor:
    idx = as_landmarks(landmarks, K.shape[0], allow_empty=False)
    Kc = K[:, idx]
    return NystromFactor(idx, Kc, cholesky(Kc[idx], order=tuple(idx.tolist())))


def build_from_data(data, landmarks, sigma: float) -> NystromFactor:
    """Same as :func:`build` but only evaluates the ``n x k`` cross kernel."""
    X = _values(data)
    idx = as_landmarks(landmarks, X.shape[0], allow_empty=False)
    Kc = cross_gram(X, idx, sigma)
    return NystromFactor(idx, Kc, cholesky(Kc[idx], order=tuple(idx.tolist())))


def _jittered_features(k_block: np.ndarray, Kcc: np.ndarray, jitter: float) -> np.ndarray:
    """Rows ``k_block (Kcc + jitter I)^{-1/2}``; falls back to a clipped eigen-solve."""
    A = Kcc + jitter * np.eye(Kcc.shape[0])
    try:
        R = cholesky(A).R
        return solve_triangular(R, k_block.T, trans="T", lower=False).T
    except NotPositiveDefinite:
        w, U = np.linalg.eigh(A)
        keep = w > 0
        return (k_block @ U[:, keep]) / np.sqrt(w[keep])


def frobenius_rel_error(K: np.ndarray, factor: NystromFactor) -> float:
    """``||K - K_hat||_F / ||K||_F`` with ``K_hat = K_C (K_CC + 1e-12 I)^{-1} K_C^T``."""
    if factor.k == 0:
        raise ValueError("at least one landmark is required")
    return _rel_error(K, factor.landmarks, factor.jitter)


def _rel_error(K, idx, jitter):
    F = _jittered_features(K[:, idx], K[np.ix_(idx, idx)], jitter)
    return float(np.linalg.norm(K - F @ F.T) / np.linalg.norm(K))


def frobenius_error_sampled(data, sigma: float, factor: NystromFactor, n_blocks: int = 50,
                            block_size: int = 3000, seed=None) -> float:
    """Block-sampled estimate of ``||K - K_hat||_F`` that never forms the full Gram matrix.

    Each block is a uniform draw of ``block_size`` distinct rows (blocks are
    independent of each other); the exact error on the principal block is
    computed and the mean block error is scaled by ``n / block_size`` to
    estimate the full-matrix norm.  With a single block covering every row the
    result is the exact dense error.
    """
    X = _values(data)
    n = X.shape[0]
    if not 1 <= block_size <= n:
        raise ValueError(f"block_size must be in [1, {n}]")
    if n_blocks < 1:
        raise ValueError("n_blocks must be positive")
    rng = np.random.default_rng(seed)
    idx = factor.landmarks
    Kcc = factor.k_cross[idx]
    errs = np.empty(n_blocks)
    for b in range(n_blocks):
        B = np.sort(rng.choice(n, size=block_size, replace=False))
        KBB = gram(X[B], sigma)
        F = _jittered_features(factor.k_cross[B], Kcc, factor.jitter)
        errs[b] = np.linalg.norm(KBB - F @ F.T)
    return float(np.mean(errs) * n / block_size)


@dataclass(frozen=True)
class Diagnostics:
    logdet: float
    lambda_min: float
    lambda_max: float
    condition_number: float
    frobenius_rel_error: float

    FIELDS = ("logdet", "lambda_min", "lambda_max", "kappa", "frob_rel_error")

    def as_row(self) -> dict:
        return dict(zip(self.FIELDS, (self.logdet, self.lambda_min, self.lambda_max,
                                      self.condition_number, self.frobenius_rel_error)))

    def to_csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in self.as_row().values())


def subset_spectrum(Kcc: np.ndarray) -> tuple[float, float, float, float]:
    """``(logdet, lambda_min, lambda_max, kappa)`` of a landmark block.

    The log-determinant comes from a Cholesky factor when one exists, since
    eigenvalue sums lose the small end of the spectrum.
    """
    w = np.linalg.eigvalsh(Kcc)
    lmin, lmax = float(w[0]), float(w[-1])
    try:
        ld = logdet(cholesky(Kcc))
    except NotPositiveDefinite:
        ld = float(np.sum(np.log(np.abs(w))))
    kappa = lmax / lmin if lmin > 0 else math.inf
    return ld, lmin, lmax, kappa


def diagnostics(K: np.ndarray, landmarks) -> Diagnostics:
    idx = as_landmarks(landmarks, K.shape[0], allow_empty=False)
    ld, lmin, lmax, kappa = subset_spectrum(K[np.ix_(idx, idx)])
    return Diagnostics(ld, lmin, lmax, kappa, _rel_error(K, idx, ERROR_JITTER))
