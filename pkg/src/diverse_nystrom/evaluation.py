"""Percentage errors and splitting test error by ridge leverage score."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

#: Targets (or denominators) at or below this magnitude are skipped.
ZERO_GUARD = 1e-12


def _pair(y_true, y_pred):
    y = np.asarray(y_true, dtype=np.float64).ravel()
    f = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.shape != f.shape:
        raise ValueError("y_true and y_pred have different lengths")
    return y, f


def mape(y_true, y_pred) -> float:
    y, f = _pair(y_true, y_pred)
    keep = np.abs(y) > ZERO_GUARD
    if not keep.any():
        raise ValueError("MAPE undefined: every target is zero")
    return float(100.0 * np.mean(np.abs(y[keep] - f[keep]) / np.abs(y[keep])))


def smape(y_true, y_pred) -> float:
    y, f = _pair(y_true, y_pred)
    den = np.abs(y) + np.abs(f)
    keep = den > ZERO_GUARD
    if not keep.any():
        raise ValueError("SMAPE undefined: every denominator is zero")
    return float(100.0 * np.mean(2.0 * np.abs(y[keep] - f[keep]) / den[keep]))


def _scores(scores) -> np.ndarray:
    return np.asarray(getattr(scores, "scores", scores), dtype=np.float64).ravel()


def stratify(test_scores, quantile: float = 0.7) -> tuple[np.ndarray, np.ndarray]:
    """``(bulk, tail)`` index arrays; a score equal to the cut-off goes to the bulk.

    The cut-off is the linearly interpolated (type-7) quantile.
    """
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    s = _scores(test_scores)
    cut = np.quantile(s, quantile)
    bulk = s <= cut
    return np.flatnonzero(bulk), np.flatnonzero(~bulk)


def _mape_or_none(y, f):
    try:
        return mape(y, f)
    except ValueError:
        return None


def binned_error(test_scores, y_true, y_pred, n_bins: int = 10):
    """Per-bin MAPE over equal-width score bins.

    Returns ``(edges, counts, per_bin)``; ``per_bin[j]`` is ``None`` for a bin
    with no usable point.  Constant scores give a single bin.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    s = _scores(test_scores)
    y, f = _pair(y_true, y_pred)
    lo, hi = float(s.min()), float(s.max())
    if hi == lo:
        n_bins = 1
    edges = np.linspace(lo, hi, n_bins + 1)
    which = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    per_bin = [_mape_or_none(y[which == j], f[which == j]) if counts[j] else None
               for j in range(n_bins)]
    return edges, counts, per_bin


@dataclass
class StratifiedReport:
    bulk_metric: float | None
    tail_metric: float | None
    overall_metric: float
    quantile: float = 0.7
    bin_edges: list = field(default_factory=list)
    bin_counts: list = field(default_factory=list)
    bin_metric: list = field(default_factory=list)

    CSV_FIELDS = ("bulk_metric", "tail_metric", "overall_metric", "quantile")

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v
        d = {k: clean(v) for k, v in asdict(self).items()}
        return json.dumps(d, sort_keys=True)

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(
            ["" if getattr(self, k) is None else repr(float(getattr(self, k))) for k in self.CSV_FIELDS])
        return buf.getvalue()


def stratified_report(test_scores, y_true, y_pred, quantile: float = 0.7,
                      n_bins: int = 10, metric=mape) -> StratifiedReport:
    y, f = _pair(y_true, y_pred)
    bulk, tail = stratify(test_scores, quantile)

    def safe(idx):
        if idx.size == 0:
            return None
        try:
            return metric(y[idx], f[idx])
        except ValueError:
            return None

    edges, counts, per_bin = binned_error(test_scores, y, f, n_bins)
    return StratifiedReport(safe(bulk), safe(tail), metric(y, f), quantile,
                            [float(e) for e in edges], [int(c) for c in counts], per_bin)
