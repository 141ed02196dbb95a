"""Landmark samplers.

Every sampler takes ``seed`` which may be an int, ``None`` or an existing
``numpy.random.Generator`` (reused as-is, handy for repeated draws).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import NotPositiveDefinite, chol_append, chol_remove, cholesky, logdet


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _scores(scores) -> np.ndarray:
    return np.asarray(getattr(scores, "scores", scores), dtype=np.float64)


def sample_uniform(n: int, k: int, seed=None) -> np.ndarray:
    if not 0 <= k <= n:
        raise ValueError(f"cannot draw {k} distinct indices out of {n}")
    return np.sort(_rng(seed).choice(n, size=k, replace=False)).astype(np.int64)


def weighted_without_replacement(weights, k: int, rng) -> np.ndarray:
    """Sequential draws proportional to ``weights`` among the not yet chosen.

    Implemented with Gumbel top-k, which has exactly the law of successive
    renormalised draws.
    """
    w = np.asarray(weights, dtype=np.float64)
    if k > np.count_nonzero(w > 0):
        raise ValueError("fewer positive weights than requested draws")
    with np.errstate(divide="ignore"):
        keys = np.log(w) + rng.gumbel(size=w.size)
    if k == w.size:
        return np.arange(w.size)
    return np.argpartition(-keys, k - 1)[:k] if k else np.empty(0, dtype=np.int64)


def sample_rls(scores, k: int, seed=None) -> np.ndarray:
    """``k`` distinct indices drawn sequentially with probability proportional to the scores."""
    s = _scores(scores)
    if not 0 <= k <= s.size:
        raise ValueError(f"cannot draw {k} distinct indices out of {s.size}")
    idx = weighted_without_replacement(s, k, _rng(seed))
    return np.sort(idx).astype(np.int64)


def ensemble_eigh(K: np.ndarray, alpha: float):
    """Eigenpairs of ``L = K / alpha`` with eigenvalues clipped at zero."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    vals, vecs = np.linalg.eigh(K / alpha)
    return np.maximum(vals, 0.0), vecs


def sample_projection(V: np.ndarray, rng) -> np.ndarray:
    """Sample from the projection DPP spanned by the orthonormal columns of ``V``.

    Chain rule with Gram-Schmidt on the rows of ``V``: after each pick the
    remaining rows are orthogonalised against the chosen one.
    """
    n, r = V.shape
    norms = np.einsum("ij,ij->i", V, V)
    basis = np.zeros((n, r))
    avail = np.ones(n, dtype=bool)
    picked = np.empty(r, dtype=np.int64)
    for it in range(r):
        cum = np.cumsum(np.where(avail, np.maximum(norms, 0.0), 0.0))
        j = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), n - 1)
        picked[it] = j
        basis[:, it] = (V @ V[j] - basis[:, :it] @ basis[j, :it]) / np.sqrt(norms[j])
        norms -= basis[:, it] ** 2
        avail[j] = False
    return np.sort(picked)


def sample_dpp(K: np.ndarray, alpha: float, seed=None, eig=None) -> np.ndarray:
    """Exact draw from the DPP with L-ensemble ``K / alpha`` (spectral algorithm).

    ``eig`` may carry a precomputed ``ensemble_eigh(K, alpha)``.
    """
    rng = _rng(seed)
    vals, vecs = eig if eig is not None else ensemble_eigh(K, alpha)
    keep = rng.random(vals.size) < vals / (1.0 + vals)
    if not keep.any():
        return np.empty(0, dtype=np.int64)
    return sample_projection(vecs[:, keep], rng)


def log_elementary_symmetric(vals: np.ndarray, k: int) -> np.ndarray:
    """``E[l, m] = log e_l(vals[:m])`` for ``0 <= l <= k``, ``0 <= m <= N``."""
    N = vals.size
    with np.errstate(divide="ignore"):
        logv = np.log(vals)
    E = np.full((k + 1, N + 1), -np.inf)
    E[0, :] = 0.0
    for m in range(1, N + 1):
        E[1:, m] = np.logaddexp(E[1:, m - 1], logv[m - 1] + E[:-1, m - 1])
    return E


def sample_kdpp(K: np.ndarray, alpha: float, k: int, seed=None, eig=None, log_esp=None) -> np.ndarray:
    """Exact draw from the k-DPP with L-ensemble ``K / alpha``.

    Eigenvectors are selected by the elementary-symmetric-polynomial recursion
    (kept in log space so large ``n`` and spread-out spectra cannot overflow),
    then the projection DPP they span is sampled.
    """
    n = K.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = _rng(seed)
    vals, vecs = eig if eig is not None else ensemble_eigh(K, alpha)
    E = log_esp if log_esp is not None else log_elementary_symmetric(vals, k)
    if not np.isfinite(E[k, n]):
        raise ValueError(f"k={k} exceeds the numerical rank of the kernel")
    with np.errstate(divide="ignore"):
        logv = np.log(vals)
    chosen = []
    rem = k
    for m in range(n, 0, -1):
        if rem == 0:
            break
        if m == rem:
            chosen.extend(range(m - 1, -1, -1))
            break
        logp = logv[m - 1] + E[rem - 1, m - 1] - E[rem, m]
        if np.log(rng.random()) < logp:
            chosen.append(m - 1)
            rem -= 1
    return sample_projection(vecs[:, np.sort(chosen)], rng)


def kdpp_subset_logprob(vals: np.ndarray, k: int) -> float:
    """``log sum_{|C|=k} det(L_CC)`` from the eigenvalues of ``L``."""
    return float(log_elementary_symmetric(vals, k)[k, -1])


@dataclass(frozen=True)
class SwapConfig:
    k: int
    d_p: float
    epsilon: float
    max_iter: int = 2000
    seed: object = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class SwapResult:
    landmarks: np.ndarray
    achieved_logdet: float
    iterations: int
    converged: bool
    accepted: int = 0


def greedy_swap(K: np.ndarray, scores, config: SwapConfig, max_init_attempts: int = 10) -> SwapResult:
    """Search for ``k`` landmarks whose ``log det K_CC`` is within ``epsilon`` of ``d_p``.

    Starts from a uniform subset.  Each iteration draws an outside candidate
    with probability proportional to ``l_i`` when the log-determinant is too
    small and to ``1 - l_i`` when it is too large, swaps it for a uniformly
    chosen member, and keeps the swap when the distance to the target does not
    grow.  The Cholesky factor of ``K_CC`` is updated in place of a refactorisation.
    Swaps that break positive definiteness are rejected.
    """
    n = K.shape[0]
    k = config.k
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    ell = _scores(scores)
    if ell.size != n:
        raise ValueError("scores must have one entry per kernel row")
    rng = _rng(config.seed)
    target, eps = config.d_p, config.epsilon

    for attempt in range(max_init_attempts):
        members = rng.choice(n, size=k, replace=False)
        try:
            factor = cholesky(K[np.ix_(members, members)])
            break
        except NotPositiveDefinite:
            if attempt == max_init_attempts - 1:
                raise
    d = logdet(factor)
    inside = np.zeros(n, dtype=bool)
    inside[members] = True

    it = accepted = 0
    while abs(d - target) > eps and it < config.max_iter and k < n:
        it += 1
        w = ell if d < target else 1.0 - ell
        w = np.where(inside, 0.0, np.maximum(w, 0.0))
        total = w.sum()
        if total <= 0:
            w = (~inside).astype(float)
            total = w.sum()
        cand = int(rng.choice(n, p=w / total))
        pos = int(rng.integers(k))
        try:
            reduced = chol_remove(factor, pos)
            rest = np.delete(members, pos)
            trial = chol_append(reduced, K[rest, cand], K[cand, cand])
        except NotPositiveDefinite:
            continue
        d_new = logdet(trial)
        if abs(d_new - target) <= abs(d - target):
            inside[members[pos]] = False
            inside[cand] = True
            members = np.append(rest, cand)
            factor, d = trial, d_new
            accepted += 1

    return SwapResult(np.sort(members).astype(np.int64), d, it, abs(d - target) <= eps, accepted)
