"""Nystrom kernel approximation with diverse landmark sampling.

Gaussian Gram matrices, ridge leverage scores, DPP/k-DPP and leverage-score
samplers, a greedy log-determinant swap search, and the downstream tasks
(kernel PCA, kernel ridge regression, kernel k-means) used to compare them.
"""
from .datasets import DataError, DataMatrix, load_csv, load_named, standardize
from .kernel import CholeskyFactor, NotPositiveDefinite, cholesky, gram
from .leverage import LeverageScores, effective_dimension, rls_exact, rls_recursive, subset_size
from .nystrom import NystromFactor, build, diagnostics
from .sampling import SwapConfig, SwapResult, greedy_swap, sample_dpp, sample_kdpp, sample_rls, sample_uniform

__version__ = "0.1.0"
