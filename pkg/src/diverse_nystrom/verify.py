"""Exhaustive-enumeration checks of the DPP landmark identities and bounds.

For ``n <= 14`` every subset ``C`` of ``[n]`` is listed together with its
probability ``det(L_CC) / det(I + L)`` under the L-ensemble ``L = K / alpha``.
Expectations over the DPP are then finite weighted sums and can be compared
with their closed forms to rounding accuracy.  The empty subset is included;
it contributes a zero matrix wherever ``K_CC^{-1}`` or the Nystrom
approximation appears.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .kernel import gram
from .krr import risk_components
from .leverage import marginal_kernel
from .sampling import ensemble_eigh, sample_dpp

MAX_N = 14


@dataclass(frozen=True)
class DppEnumeration:
    """All ``2^n`` subsets, grouped by size.

    ``members`` is a boolean ``(2^n, n)`` incidence matrix and ``probs`` the
    matching probabilities; ``groups[m]`` holds ``(rows, index_array, inv)``
    for the subsets of size ``m`` where ``inv`` stacks the ``K_CC^{-1}``.
    ``masks[b]`` is the row of the subset whose bitmask is ``b``.
    """

    K: np.ndarray
    alpha: float
    members: np.ndarray
    probs: np.ndarray
    groups: tuple
    masks: np.ndarray

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def expect_padded_inverse(self) -> np.ndarray:
        """``E[C K_CC^{-1} C^T]`` as an ``n x n`` matrix."""
        n = self.n
        out = np.zeros((n, n))
        for rows, idx, inv in self.groups:
            if idx.shape[1] == 0:
                continue
            padded = np.zeros((rows.size, n, n))
            padded[np.arange(rows.size)[:, None, None], idx[:, :, None], idx[:, None, :]] = inv
            out += np.tensordot(self.probs[rows], padded, axes=1)
        return 0.5 * (out + out.T)

    def pair_inclusion(self) -> np.ndarray:
        """``Pr(i in C and j in C)``; the diagonal holds the singleton marginals."""
        M = self.members.astype(float)
        return (M * self.probs[:, None]).T @ M

    def subset_index(self, subset) -> int:
        mask = int(np.sum(1 << np.asarray(subset, dtype=np.int64))) if len(subset) else 0
        return int(self.masks[mask])


def enumerate_dpp(K: np.ndarray, alpha: float) -> DppEnumeration:
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    if n > MAX_N:
        raise ValueError(f"enumeration is limited to n <= {MAX_N}, got {n}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _, lognorm = np.linalg.slogdet(np.eye(n) + K / alpha)
    members = np.zeros((1 << n, n), dtype=bool)
    probs = np.zeros(1 << n)
    masks = np.zeros(1 << n, dtype=np.int64)
    groups = []
    start = 0
    for m in range(n + 1):
        N = math.comb(n, m)
        idx = np.array(list(itertools.combinations(range(n), m)), dtype=np.int64).reshape(N, m)
        rows = np.arange(start, start + N)
        if m == 0:
            logdet = np.zeros(1)
            inv = np.zeros((1, 0, 0))
        else:
            sub = K[idx[:, :, None], idx[:, None, :]]
            sign, logdet = np.linalg.slogdet(sub)
            if np.any(sign <= 0):
                raise np.linalg.LinAlgError("kernel has a singular principal submatrix")
            inv = np.linalg.inv(sub)
        probs[rows] = np.exp(logdet - m * math.log(alpha) - lognorm)
        members[rows[:, None], idx] = True
        masks[np.sum(1 << idx, axis=1)] = rows
        groups.append((rows, idx, inv))
        start += N
    return DppEnumeration(K, float(alpha), members, probs, tuple(groups), masks)


def _leverage(P):
    return np.diag(P).copy()


def check_theorem1(K: np.ndarray, alpha: float, enum: DppEnumeration | None = None) -> float:
    """Max entrywise deviation of ``E[C K_CC^{-1} C^T]`` from ``(K + alpha I)^{-1}``
    and of ``E[C K_CC C^T]`` from ``(Diag(l) + l l^T - P o P) o K``."""
    enum = enum or enumerate_dpp(K, alpha)
    n = K.shape[0]
    dev_inv = np.abs(enum.expect_padded_inverse() - np.linalg.inv(K + alpha * np.eye(n))).max()
    P = marginal_kernel(K, alpha)
    ell = _leverage(P)
    P2 = np.diag(ell) + np.outer(ell, ell) - P * P
    dev_sub = np.abs(enum.pair_inclusion() * K - P2 * K).max()
    return float(max(dev_inv, dev_sub))


def check_eq5_bound(K: np.ndarray, alpha: float, enum: DppEnumeration | None = None):
    """``(lambda_max(E[C K_CC C^T]), ||l||_inf + ||l||_2^2)``."""
    enum = enum or enumerate_dpp(K, alpha)
    E = enum.pair_inclusion() * K
    ell = _leverage(marginal_kernel(K, alpha))
    return float(np.linalg.eigvalsh(0.5 * (E + E.T))[-1]), float(ell.max() + ell @ ell)


def check_pair_inclusion(K: np.ndarray, alpha: float, enum: DppEnumeration | None = None) -> float:
    """Enumerated ``Pr(i, j in C)`` against ``1_{i=j} P_ii + (P_ii P_jj - P_ij^2) 1_{i!=j}``."""
    enum = enum or enumerate_dpp(K, alpha)
    P = marginal_kernel(K, alpha)
    ell = _leverage(P)
    closed = np.outer(ell, ell) - P * P
    np.fill_diagonal(closed, ell)
    return float(np.abs(enum.pair_inclusion() - closed).max())


def _sqrtm_psd(K):
    w, U = np.linalg.eigh(K)
    return (U * np.sqrt(np.maximum(w, 0.0))) @ U.T


def check_corollary3(K: np.ndarray, alpha: float, enum: DppEnumeration | None = None) -> float:
    """Deviations of ``E[K - L(K, C)]`` from ``alpha P``, of the expected projector onto
    ``range(K^{1/2} C)`` from ``P``, and of ``E[Tr(K - L)]`` from ``alpha d_eff``."""
    enum = enum or enumerate_dpp(K, alpha)
    Einv = enum.expect_padded_inverse()
    P = marginal_kernel(K, alpha)
    gap = K - K @ Einv @ K
    S = _sqrtm_psd(K)
    proj = S @ Einv @ S
    devs = (np.abs(gap - alpha * P).max(),
            np.abs(proj - P).max(),
            abs(np.trace(gap) - alpha * np.trace(P)))
    return float(max(devs))


def check_lemma5_corollary6(K: np.ndarray, alpha: float, v, w,
                            enum: DppEnumeration | None = None) -> tuple[float, float, float]:
    """Deviations ``(mean, variance, reweighted square)`` for the subset inner product
    ``v_C^T w_C`` and for ``E[K_C Diag(l_C)^{-1} K_C^T] = K^2``."""
    enum = enum or enumerate_dpp(K, alpha)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    P = marginal_kernel(K, alpha)
    ell = _leverage(P)
    u = v * w
    x = enum.members.astype(float) @ u
    mean = float(np.sum(enum.probs * x))
    var = float(np.sum(enum.probs * (x - mean) ** 2))
    dev_mean = abs(mean - v @ (ell * w))
    dev_var = abs(var - u @ ((np.diag(ell) - P * P) @ u))
    incl = enum.probs @ enum.members.astype(float)
    E = (K * (incl / ell)) @ K
    dev_sq = float(np.abs(E - K @ K).max())
    return float(dev_mean), float(dev_var), dev_sq


def expected_nystrom(enum: DppEnumeration) -> np.ndarray:
    K = enum.K
    return K @ enum.expect_padded_inverse() @ K


def check_theorem3(K: np.ndarray, alpha: float, X: np.ndarray,
                   enum: DppEnumeration | None = None) -> tuple[float, float]:
    """Slacks of the two projection-cost inequalities for the projector ``X``."""
    enum = enum or enumerate_dpp(K, alpha)
    k = int(round(np.trace(X)))
    if k < 1:
        raise ValueError("projector must have rank at least 1")
    c = alpha * float(np.trace(marginal_kernel(K, alpha)))
    EL = expected_nystrom(enum)
    cost_K = float(np.trace(K - X @ K @ X))
    cost_L = float(np.trace(EL - X @ EL @ X))
    lower = cost_L + c - cost_K
    upper = cost_K + min(alpha * k, c) - (cost_L + c)
    return lower, upper


def nystrom_of_subset(K: np.ndarray, idx: np.ndarray, inv: np.ndarray) -> np.ndarray:
    if idx.size == 0:
        return np.zeros_like(K)
    KC = K[:, idx]
    return KC @ inv @ KC.T


def check_theorem4(K: np.ndarray, alpha: float, z, gamma: float, noise_var: float,
                   enum: DppEnumeration | None = None) -> tuple[float, float]:
    """``(E_C[sqrt(R(L)/R(K))], 1 + alpha d_eff / (n gamma))``."""
    enum = enum or enumerate_dpp(K, alpha)
    n = K.shape[0]
    b, var = risk_components(K, z, gamma, noise_var)
    base = b * b + var
    ratios = np.empty(enum.probs.size)
    for rows, idx, inv in enum.groups:
        for r, sub, Ci in zip(rows, idx, inv):
            bl, vl = risk_components(nystrom_of_subset(K, sub, Ci), z, gamma, noise_var)
            ratios[r] = math.sqrt((bl * bl + vl) / base)
    lhs = float(np.sum(enum.probs * ratios))
    rhs = 1.0 + alpha * float(np.trace(marginal_kernel(K, alpha))) / (n * gamma)
    return lhs, rhs


def corollary2_bound(K: np.ndarray, delta: float) -> float:
    n = K.shape[0]
    return math.sqrt(48 * n * math.log(5 / delta)) / float(np.linalg.eigvalsh(K)[0])


def check_corollary2(K: np.ndarray, alpha: float, w, n_samples: int = 10_000,
                     delta: float = 0.1, seed=None, enum: DppEnumeration | None = None) -> float:
    """Fraction of ``n_samples`` DPP draws whose quadratic-form deviation exceeds the bound.

    Draws come from the spectral sampler; each drawn subset is looked up in the
    enumeration, where the deviation ``|w_C^T K_CC^{-1} w_C - w^T (K + alpha I)^{-1} w|``
    is tabulated.
    """
    enum = enum or enumerate_dpp(K, alpha)
    w = np.asarray(w, dtype=np.float64)
    n = K.shape[0]
    target = float(w @ np.linalg.solve(K + alpha * np.eye(n), w))
    dev = np.empty(enum.probs.size)
    for rows, idx, inv in enum.groups:
        if idx.shape[1] == 0:
            dev[rows] = abs(target)
            continue
        wc = w[idx]
        dev[rows] = np.abs(np.einsum("si,sij,sj->s", wc, inv, wc) - target)
    bound = corollary2_bound(K, delta)
    rng = np.random.default_rng(seed)
    eig = ensemble_eigh(K, alpha)
    hits = 0
    for _ in range(n_samples):
        C = sample_dpp(K, alpha, rng, eig=eig)
        hits += dev[enum.subset_index(C)] > bound
    return hits / n_samples


def random_instances(count: int = 20, seed=0, sizes=range(4, 9), alphas=(0.1, 1.0, 10.0)):
    """Gaussian Gram matrices (``sigma = 1``) of uniform points in the unit cube of R^3.

    Sizes and ridge values are cycled so that every combination appears.
    """
    rng = np.random.default_rng(seed)
    sizes, alphas = list(sizes), list(alphas)
    out = []
    for i in range(count):
        n = sizes[i % len(sizes)]
        alpha = alphas[i % len(alphas)]
        X = rng.random((n, 3))
        out.append((gram(X, 1.0), alpha))
    return out


def random_projector(n: int, k: int, rng) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return Q @ Q.T


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<22} {self.value: .3e}  (limit {self.threshold:.1e})  {status}"


EXACT_TOL = 1e-9


def run_identity_checks(instances) -> list[CheckResult]:
    worst = {"theorem1": 0.0, "pair_inclusion": 0.0, "corollary3": 0.0,
             "lemma5_mean": 0.0, "lemma5_variance": 0.0, "corollary6": 0.0}
    rng = np.random.default_rng(12345)
    for K, alpha in instances:
        enum = enumerate_dpp(K, alpha)
        n = K.shape[0]
        worst["theorem1"] = max(worst["theorem1"], check_theorem1(K, alpha, enum))
        worst["pair_inclusion"] = max(worst["pair_inclusion"], check_pair_inclusion(K, alpha, enum))
        worst["corollary3"] = max(worst["corollary3"], check_corollary3(K, alpha, enum))
        dm, dv, d6 = check_lemma5_corollary6(K, alpha, rng.standard_normal(n), rng.standard_normal(n), enum)
        worst["lemma5_mean"] = max(worst["lemma5_mean"], dm)
        worst["lemma5_variance"] = max(worst["lemma5_variance"], dv)
        worst["corollary6"] = max(worst["corollary6"], d6)
    return [CheckResult(k, v, EXACT_TOL, v <= EXACT_TOL) for k, v in worst.items()]


def run_inequality_checks(instances, n_samples: int = 10_000, delta: float = 0.1,
                          gamma: float = 0.1, noise_var: float = 0.01, seed=0) -> list[CheckResult]:
    """Reported values are worst violations; each passes when it is at most the tolerance.

    For the Monte-Carlo bound the value is the worst exceedance rate and the
    threshold is ``delta``.
    """
    rng = np.random.default_rng(seed)
    viol = {"eq5_bound": -np.inf, "theorem3_lower": -np.inf, "theorem3_upper": -np.inf,
            "theorem4": -np.inf}
    rate = 0.0
    for K, alpha in instances:
        enum = enumerate_dpp(K, alpha)
        n = K.shape[0]
        lam, bound = check_eq5_bound(K, alpha, enum)
        viol["eq5_bound"] = max(viol["eq5_bound"], lam - bound)
        X = random_projector(n, int(rng.integers(1, n)), rng)
        lo, up = check_theorem3(K, alpha, X, enum)
        viol["theorem3_lower"] = max(viol["theorem3_lower"], -lo)
        viol["theorem3_upper"] = max(viol["theorem3_upper"], -up)
        lhs, rhs = check_theorem4(K, alpha, rng.standard_normal(n), gamma, noise_var, enum)
        viol["theorem4"] = max(viol["theorem4"], lhs - rhs)
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        rate = max(rate, check_corollary2(K, alpha, w, n_samples, delta, rng, enum))
    out = [CheckResult(k, float(v), EXACT_TOL, v <= EXACT_TOL) for k, v in viol.items()]
    out.append(CheckResult("corollary2_rate", rate, delta, rate <= delta))
    return out


def run_all_checks(count: int = 20, seed=0, n_samples: int = 10_000,
                   delta: float = 0.1) -> list[CheckResult]:
    instances = random_instances(count, seed)
    return run_identity_checks(instances) + run_inequality_checks(instances, n_samples, delta, seed=seed)
