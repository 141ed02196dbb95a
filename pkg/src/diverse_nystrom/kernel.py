"""Gaussian Gram matrices and incrementally updatable Cholesky factors.

A kernel matrix is a plain ``(n, n)`` float64 array, a landmark set a sorted
``int64`` index array.  :class:`CholeskyFactor` holds an upper-triangular ``R``
with ``R.T @ R == A``; appending and removing a landmark each cost O(k^2).
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import qr_delete, solve_triangular
from scipy.linalg.lapack import dpotrf

#: Squared pivots below this value are treated as a loss of positive definiteness.
PIVOT_FLOOR = 1e-14


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot falls below :data:`PIVOT_FLOOR`."""

    def __init__(self, pivot: int, value: float | None = None):
        self.pivot = pivot
        self.value = value
        msg = f"matrix is not numerically positive definite at pivot {pivot}"
        if value is not None:
            msg += f" (pivot^2 = {value:.3e})"
        super().__init__(msg)


def _values(data) -> np.ndarray:
    X = getattr(data, "values", data)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X


def as_landmarks(indices: Sequence[int] | np.ndarray, n: int, allow_empty: bool = True) -> np.ndarray:
    """Validate and normalise a landmark set: sorted, distinct, within ``[0, n)``."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        if not allow_empty:
            raise ValueError("landmark set must not be empty")
        return idx
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"landmark index out of range [0, {n})")
    out = np.unique(idx)
    if out.size != idx.size:
        raise ValueError("landmark indices must be distinct")
    return out


def sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    D = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    return D


def gaussian(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    """``exp(-||a - b||^2 / sigma^2)`` between the rows of ``A`` and ``B``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return np.exp(-sqdist(A, B) / (sigma * sigma))


def gram(data, sigma: float) -> np.ndarray:
    """Gaussian Gram matrix of the rows of ``data`` with an exact unit diagonal."""
    X = _values(data)
    K = gaussian(X, X, sigma)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K


def cross_gram(data, landmarks, sigma: float) -> np.ndarray:
    """The ``n x k`` block ``K_C``; column ``j`` is the Gram column of landmark ``j``."""
    X = _values(data)
    idx = as_landmarks(landmarks, X.shape[0])
    if idx.size == 0:
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        return np.zeros((X.shape[0], 0))
    Kc = gaussian(X, X[idx], sigma)
    Kc[idx, np.arange(idx.size)] = 1.0
    return Kc


def submatrix(K: np.ndarray, landmarks) -> np.ndarray:
    idx = as_landmarks(landmarks, K.shape[0])
    return K[np.ix_(idx, idx)]


@dataclass(frozen=True)
class CholeskyFactor:
    """Upper-triangular ``R`` with ``R.T @ R`` equal to the factorised matrix.

    ``order`` records which landmark occupies each row/column of the factor;
    it is informational and may be empty when the factor was built from a bare
    matrix.
    """

    R: np.ndarray
    order: tuple = ()

    @property
    def size(self) -> int:
        return self.R.shape[0]

    def matrix(self) -> np.ndarray:
        return self.R.T @ self.R

    def logdet(self) -> float:
        return logdet(self)


def empty_factor() -> CholeskyFactor:
    return CholeskyFactor(np.zeros((0, 0)), ())


def cholesky(A: np.ndarray, order: Sequence[int] = ()) -> CholeskyFactor:
    """Cholesky factor of a symmetric matrix.

    Raises
    ------
    NotPositiveDefinite
        If LAPACK fails or a squared pivot is below :data:`PIVOT_FLOOR`; the
        exception carries the zero-based index of the first offending pivot.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("cholesky expects a square matrix")
    if A.shape[0] == 0:
        return CholeskyFactor(np.zeros((0, 0)), tuple(order))
    R, info = dpotrf(A, lower=0, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    d2 = np.diag(R) ** 2
    bad = np.flatnonzero(d2 < PIVOT_FLOOR)
    if bad.size:
        raise NotPositiveDefinite(int(bad[0]), float(d2[bad[0]]))
    return CholeskyFactor(R, tuple(order))


def chol_append(factor: CholeskyFactor, new_column, new_diagonal: float,
                index: int | None = None) -> CholeskyFactor:
    """Factor of the matrix extended by one trailing row/column.

    ``new_column`` holds the coupling between the new element and the existing
    ones, in factor order.
    """
    R = factor.R
    k = R.shape[0]
    c = np.asarray(new_column, dtype=np.float64).ravel()
    if c.size != k:
        raise ValueError(f"new_column has length {c.size}, expected {k}")
    r = solve_triangular(R, c, trans="T", lower=False) if k else c
    p2 = float(new_diagonal) - float(r @ r)
    if p2 < PIVOT_FLOOR:
        raise NotPositiveDefinite(k, p2)
    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = R
    out[:k, k] = r
    out[k, k] = math.sqrt(p2)
    order = factor.order + (index,) if index is not None or factor.order else factor.order
    return CholeskyFactor(out, order)


def chol_remove(factor: CholeskyFactor, position: int) -> CholeskyFactor:
    """Factor of the principal submatrix with row/column ``position`` deleted.

    Dropping column ``position`` of ``R`` leaves an upper-Hessenberg trailing
    block; LAPACK-backed Givens rotations (``scipy.linalg.qr_delete``) restore
    the triangle in O(k^2).
    """
    R = factor.R
    k = R.shape[0]
    if not 0 <= position < k:
        raise IndexError(f"position {position} out of range for factor of size {k}")
    if k == 1:
        return CholeskyFactor(np.zeros((0, 0)), ())
    _, S = qr_delete(np.eye(k), R, position, which="col", check_finite=False)
    S = np.ascontiguousarray(S[: k - 1])
    neg = np.diag(S) < 0
    if neg.any():
        S[neg] *= -1.0
    order = factor.order[:position] + factor.order[position + 1:] if factor.order else ()
    return CholeskyFactor(S, order)


def logdet(factor: CholeskyFactor) -> float:
    """``2 * sum(log R_ii)``; zero for the empty factor."""
    d = np.diag(factor.R)
    return float(2.0 * np.sum(np.log(d))) if d.size else 0.0


def save_gram(path, K: np.ndarray) -> None:
    """Binary dump: 8-byte little-endian ``n`` followed by row-major float64 entries."""
    K = np.ascontiguousarray(K, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", K.shape[0]))
        fh.write(K.tobytes(order="C"))


def load_gram(path) -> np.ndarray:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        buf = fh.read()
    if len(buf) != 8 * n * n:
        raise ValueError(f"{path}: expected {8 * n * n} bytes of entries, found {len(buf)}")
    return np.frombuffer(buf, dtype="<f8").reshape(n, n).astype(np.float64)
