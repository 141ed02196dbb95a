"""Nystrom kernel ridge regression.

The coefficients solve ``(K_C^T K_C + n gamma K_CC) a = K_C^T y``.  The system
can be solved directly by Cholesky or iteratively by conjugate gradients on
the preconditioned form ``B^T H B (B^{-1} a) = B^T K_C^T y``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .kernel import CholeskyFactor, NotPositiveDefinite, _values, cholesky, cross_gram, gaussian

#: Relative residual tolerance and iteration cap for :func:`fit_pcg`.
CG_TOL = 1e-10
CG_MAX_ITER = 10_000

#: Default cross-validation grid for the ridge weight.
DEFAULT_GAMMA_GRID = tuple(np.logspace(-8, 0, 8))


@dataclass
class KrrModel:
    landmarks: np.ndarray
    coefficients: np.ndarray
    sigma: float | None = None
    gamma: float | None = None
    converged: bool = True
    centers: np.ndarray | None = field(default=None, repr=False)

    def predict(self, X_new, centers=None) -> np.ndarray:
        return predict(self, X_new, self.centers if centers is None else centers)


@dataclass(frozen=True)
class Preconditioner:
    """Triangular ``B`` with ``B B^T = (K_CC D K_CC + n gamma K_CC)^{-1}``.

    ``B`` is upper triangular: it is the inverse of the Cholesky factor ``R``
    of the inner matrix, ``inner = R^T R``.
    """

    B: np.ndarray
    d_choice: str


def normal_matrix(K_C: np.ndarray, chol_cc: CholeskyFactor, gamma: float) -> np.ndarray:
    """``H = K_C^T K_C + n gamma K_CC``."""
    n = K_C.shape[0]
    H = K_C.T @ K_C + n * gamma * chol_cc.matrix()
    return 0.5 * (H + H.T)


def fit_direct(K_C: np.ndarray, chol_cc: CholeskyFactor, y, gamma: float,
               landmarks=None) -> KrrModel:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    y = np.asarray(y, dtype=np.float64).ravel()
    H = normal_matrix(K_C, chol_cc, gamma)
    R = cholesky(H).R
    rhs = K_C.T @ y
    a = solve_triangular(R, solve_triangular(R, rhs, trans="T"), trans="N")
    lm = np.asarray(chol_cc.order if landmarks is None else landmarks, dtype=np.int64)
    return KrrModel(lm, a, gamma=gamma)


def predict(model: KrrModel, X_new, train_landmark_points) -> np.ndarray:
    """``f(x) = sum_j a_j k(x_j, x)`` over the landmark points."""
    if model.sigma is None:
        raise ValueError("model has no kernel bandwidth")
    X = _values(X_new)
    C = _values(train_landmark_points)
    return gaussian(X, C, model.sigma) @ model.coefficients


def build_preconditioner(chol_cc: CholeskyFactor, scores_at_landmarks, n: int, gamma: float,
                         d_choice: str = "uniform") -> Preconditioner:
    """``D = (n/k) I`` for ``uniform``, ``D = diag(l_C)^{-1}`` for ``inverse-leverage``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    Kcc = chol_cc.matrix()
    k = Kcc.shape[0]
    if d_choice == "uniform":
        D = np.full(k, n / k)
    elif d_choice == "inverse-leverage":
        if scores_at_landmarks is None:
            raise ValueError("inverse-leverage preconditioning needs the landmark scores")
        s = np.asarray(getattr(scores_at_landmarks, "scores", scores_at_landmarks), dtype=np.float64)
        if s.size != k:
            raise ValueError(f"expected {k} landmark scores, got {s.size}")
        D = 1.0 / s
    else:
        raise ValueError(f"unknown d_choice {d_choice!r}")
    inner = (Kcc * D) @ Kcc + n * gamma * Kcc
    inner = 0.5 * (inner + inner.T)
    R = cholesky(inner).R
    B = solve_triangular(R, np.eye(k), lower=False)
    return Preconditioner(B, d_choice)


def preconditioned_matrix(H: np.ndarray, precond: Preconditioner) -> np.ndarray:
    A = precond.B.T @ H @ precond.B
    return 0.5 * (A + A.T)


def condition_number(A: np.ndarray) -> float:
    """Spectral condition number of a symmetric matrix via its eigenvalues."""
    w = np.abs(np.linalg.eigvalsh(A))
    return float(w.max() / w.min()) if w.min() > 0 else float("inf")


def conjugate_gradient(A: np.ndarray, b: np.ndarray, tol: float = CG_TOL,
                       max_iter: int = CG_MAX_ITER):
    """Plain CG on a symmetric positive definite ``A``.

    Returns ``(x, iterations, converged, relative_residual)``; on failure the
    iterate with the smallest residual is returned.
    """
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x, 0, True, 0.0
    p = r.copy()
    rr = r @ r
    best_x, best_res = x.copy(), 1.0
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            return best_x, it, False, best_res
        step = rr / pAp
        x = x + step * p
        r = r - step * Ap
        rr_new = r @ r
        res = np.sqrt(rr_new) / bnorm
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            return x, it, True, res
        p = r + (rr_new / rr) * p
        rr = rr_new
    return best_x, max_iter, False, best_res


def fit_pcg(K_C: np.ndarray, chol_cc: CholeskyFactor, y, gamma: float,
            precond: Preconditioner | None = None, tol: float = CG_TOL,
            max_iter: int = CG_MAX_ITER, landmarks=None) -> tuple[KrrModel, int]:
    """Iterative solve of the normal equations; ``precond=None`` runs unpreconditioned CG.

    The returned model has ``converged=False`` if the tolerance was not met.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    y = np.asarray(y, dtype=np.float64).ravel()
    H = normal_matrix(K_C, chol_cc, gamma)
    rhs = K_C.T @ y
    if precond is None:
        a, it, ok, _ = conjugate_gradient(H, rhs, tol, max_iter)
    else:
        B = precond.B
        beta, it, ok, _ = conjugate_gradient(preconditioned_matrix(H, precond), B.T @ rhs, tol, max_iter)
        a = B @ beta
    lm = np.asarray(chol_cc.order if landmarks is None else landmarks, dtype=np.int64)
    return KrrModel(lm, a, gamma=gamma, converged=ok), it


def risk_components(K_hat: np.ndarray, z, gamma: float, noise_var: float) -> tuple[float, float]:
    """Bias and variance of the ridge smoother ``K_hat (K_hat + n gamma I)^{-1}``.

    ``risk = bias**2 + variance`` equals ``E ||z_hat - z||^2 / n`` under
    i.i.d. noise of variance ``noise_var``.
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    n = z.size
    ng = n * gamma
    w, U = np.linalg.eigh(0.5 * (K_hat + K_hat.T))
    w = np.maximum(w, 0.0)
    zt = U.T @ z
    bias = np.sqrt(n * gamma**2 * np.sum((zt / (w + ng)) ** 2))
    variance = noise_var / n * np.sum((w / (w + ng)) ** 2)
    return float(bias), float(variance)


def fold_indices(n: int, folds: int, seed=None) -> list[np.ndarray]:
    if not 2 <= folds <= n:
        raise ValueError(f"folds must be in [2, {n}]")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, folds)]


def cross_validate_gamma(data, landmarks, sigma: float, grid=DEFAULT_GAMMA_GRID,
                         folds: int = 5, seed=None) -> float:
    """Ridge weight from ``grid`` with the smallest k-fold validation MSE.

    The landmark points stay the basis in every fold; ties go to the smallest
    ridge weight.  A ridge weight whose system is not positive definite in some
    fold is skipped.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("empty gamma grid")
    if data.target is None:
        raise ValueError("cross-validation needs a target")
    if len(grid) == 1:
        return grid[0]
    X, y = data.values, data.target
    idx = np.sort(np.asarray(landmarks, dtype=np.int64))
    K_C = cross_gram(X, idx, sigma)
    Kcc = K_C[idx]
    splits = fold_indices(X.shape[0], folds, seed)
    scores = []
    for g in grid:
        err = 0.0
        for val in splits:
            tr = np.setdiff1d(np.arange(X.shape[0]), val, assume_unique=True)
            H = K_C[tr].T @ K_C[tr] + tr.size * g * Kcc
            try:
                R = cholesky(0.5 * (H + H.T)).R
            except NotPositiveDefinite:
                err = np.inf
                break
            a = solve_triangular(R, solve_triangular(R, K_C[tr].T @ y[tr], trans="T"))
            err += np.sum((K_C[val] @ a - y[val]) ** 2)
        scores.append(err / X.shape[0])
    scores = np.asarray(scores)
    if not np.isfinite(scores).any():
        raise NotPositiveDefinite(0)
    return grid[int(np.argmin(scores))]


def fit(data, landmarks, sigma: float, gamma: float) -> KrrModel:
    """Convenience wrapper: direct fit on a :class:`DataMatrix` with a target."""
    X = data.values
    idx = np.sort(np.asarray(landmarks, dtype=np.int64))
    K_C = cross_gram(X, idx, sigma)
    model = fit_direct(K_C, cholesky(K_C[idx]), data.target, gamma, landmarks=idx)
    model.sigma = sigma
    model.centers = X[idx]
    return model


def export_model(path, model: KrrModel) -> None:
    """CSV with a ``# sigma=..., gamma=...`` header and ``landmark_index,coefficient`` rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# sigma={model.sigma!r},gamma={model.gamma!r}\n")
        w = csv.writer(fh)
        w.writerow(["landmark_index", "coefficient"])
        for i, a in zip(model.landmarks, model.coefficients):
            w.writerow([int(i), repr(float(a))])
