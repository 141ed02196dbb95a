"""Ridge leverage scores, the marginal kernel and effective dimension."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import dpotrf, dpotri

from .kernel import _values, gaussian, gram


@dataclass(frozen=True)
class LeverageScores:
    scores: np.ndarray
    alpha: float
    exact: bool = True

    def __len__(self):
        return self.scores.size

    def __getitem__(self, idx):
        return self.scores[idx]

    @property
    def effective_dimension(self) -> float:
        return effective_dimension(self)


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def marginal_kernel(K: np.ndarray, alpha: float) -> np.ndarray:
    """``P = K (K + alpha I)^{-1}``, symmetrised."""
    _check_alpha(alpha)
    n = K.shape[0]
    c = cho_factor(K + alpha * np.eye(n), lower=False)
    P = cho_solve(c, K)
    return 0.5 * (P + P.T)


def rls_exact(K: np.ndarray, alpha: float) -> LeverageScores:
    """Diagonal of the marginal kernel.

    Uses ``l_i = 1 - alpha * [(K + alpha I)^{-1}]_ii`` with the inverse diagonal
    read off the Cholesky factor, which avoids forming ``P``.
    """
    _check_alpha(alpha)
    n = K.shape[0]
    A = K + alpha * np.eye(n)
    R, info = dpotrf(A, lower=0, clean=1, overwrite_a=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"K + alpha I is not positive definite (dpotrf info={info})")
    inv, info = dpotri(R, lower=0, overwrite_c=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"dpotri failed (info={info})")
    scores = 1.0 - alpha * np.diag(inv)
    return LeverageScores(scores, float(alpha), True)


def effective_dimension(scores) -> float:
    s = getattr(scores, "scores", scores)
    return float(np.sum(s))


def subset_size(scores) -> int:
    """Integer landmark count ``max(1, round(d_eff))``."""
    return max(1, int(round(effective_dimension(scores))))


def rls_recursive(data, sigma: float, alpha: float, n_rrls: int, seed=None,
                  oversample: float = 2.0) -> LeverageScores:
    """Approximate ridge leverage scores without forming the ``n x n`` Gram matrix.

    The points are randomly permuted and nested prefixes of halving size are
    formed until one has at most ``n_rrls`` points; its scores are computed
    exactly.  Climbing back up, each level keeps every point of the previous
    level independently with probability ``min(1, oversample * l_i)`` and
    scores its own points against that weighted landmark sketch::

        l_i = (K_ii - k_iS (K_SS + alpha W)^{-1} k_iS^T) / alpha,   W = diag(p_S)

    The ridge ``alpha`` stays fixed across levels, so scores on a subsample
    overestimate those on the full set and the sketch errs on the large side.
    """
    if n_rrls < 1:
        raise ValueError("n_rrls must be at least 1")
    _check_alpha(alpha)
    X = _values(data)
    n = X.shape[0]
    if n <= n_rrls:
        res = rls_exact(gram(X, sigma), alpha)
        return LeverageScores(res.scores, res.alpha, True)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    sizes = [n]
    while sizes[-1] > n_rrls:
        sizes.append(math.ceil(sizes[-1] / 2))

    base = perm[: sizes[-1]]
    scores = rls_exact(gram(X[base], sigma), alpha).scores
    tiny = np.finfo(float).tiny
    for m in reversed(sizes[:-1]):
        prev = scores
        p = np.minimum(1.0, oversample * prev)
        keep = rng.random(prev.size) < p
        if not keep.any():
            keep[np.argmax(prev)] = True
        S = perm[: prev.size][keep]
        pS = p[keep]
        active = X[perm[:m]]
        KS = gaussian(active, X[S], sigma)
        KSS = gaussian(X[S], X[S], sigma)
        np.fill_diagonal(KSS, 1.0)
        c = cho_factor(KSS + alpha * np.diag(pS), lower=False)
        q = np.einsum("ij,ij->i", KS, cho_solve(c, KS.T).T)
        scores = np.clip((1.0 - q) / alpha, tiny, 1.0 - 1e-12)

    out = np.empty(n)
    out[perm] = scores
    return LeverageScores(out, float(alpha), False)

