"""Data ingestion, standardization, splitting and synthetic generators."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Malformed input data; the message carries the row/column location."""


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    target: np.ndarray | None = None
    labels: np.ndarray | None = None
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", v)
        if self.target is not None:
            t = np.asarray(self.target, dtype=np.float64).ravel()
            if t.size != v.shape[0]:
                raise ValueError(f"target has length {t.size}, expected {v.shape[0]}")
            object.__setattr__(self, "target", t)
        if self.labels is not None:
            lab = np.asarray(self.labels).ravel()
            if lab.size != v.shape[0]:
                raise ValueError(f"labels have length {lab.size}, expected {v.shape[0]}")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "DataMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return DataMatrix(
            self.values[idx],
            None if self.target is None else self.target[idx],
            None if self.labels is None else self.labels[idx],
            self.columns,
        )


@dataclass(frozen=True)
class Stats:
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class SplitResult:
    train: DataMatrix
    test: DataMatrix
    train_indices: np.ndarray
    test_indices: np.ndarray


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _select(selector, header, ncols, what):
    if selector is None:
        return None
    if isinstance(selector, str):
        if selector == "last":
            return ncols - 1
        if selector == "first":
            return 0
        if header is not None and selector in header:
            return header.index(selector)
        if selector.lstrip("-").isdigit():
            selector = int(selector)
        else:
            raise DataError(f"{what} column {selector!r} not found")
    col = int(selector)
    if col < 0:
        col += ncols
    if not 0 <= col < ncols:
        raise DataError(f"{what} column {selector} out of range for {ncols} columns")
    return col


def load_csv(path, target_column=None, label_column=None) -> DataMatrix:
    """Parse a comma-separated numeric file into an un-standardized :class:`DataMatrix`.

    A single header row is detected when the first row has a non-numeric cell.
    ``target_column``/``label_column`` accept an index, a header name, or
    ``"first"``/``"last"``; the selected columns are removed from the features.
    Labels are kept as strings unless every label parses as a number.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no rows")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no rows")
    ncols = len(header) if header is not None else len(rows[0])
    first_line = 2 if header is not None else 1
    for i, r in enumerate(rows):
        if len(r) != ncols:
            raise DataError(f"{path}: row {i + first_line} has {len(r)} fields, expected {ncols}")

    tcol = _select(target_column, header, ncols, "target")
    lcol = _select(label_column, header, ncols, "label")
    if tcol is not None and tcol == lcol:
        raise DataError("target and label columns must differ")
    feat = [j for j in range(ncols) if j not in (tcol, lcol)]

    values = np.empty((len(rows), len(feat)))
    target = np.empty(len(rows)) if tcol is not None else None
    for i, r in enumerate(rows):
        for jj, j in enumerate(feat):
            cell = r[j].strip()
            try:
                values[i, jj] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {i + first_line}, column {j + 1}: non-numeric value {cell!r}"
                ) from None
            if math.isnan(values[i, jj]):
                raise DataError(f"{path}: row {i + first_line}, column {j + 1}: missing value")
        if tcol is not None:
            try:
                target[i] = float(r[tcol])
            except ValueError:
                raise DataError(
                    f"{path}: row {i + first_line}, column {tcol + 1}: non-numeric target {r[tcol]!r}"
                ) from None
    labels = None
    if lcol is not None:
        raw = [r[lcol].strip() for r in rows]
        labels = np.array([float(c) for c in raw]) if all(_is_number(c) for c in raw) else np.array(raw)
    columns = tuple(header[j] for j in feat) if header is not None else None
    return DataMatrix(values, target, labels, columns)


def standardize(data: DataMatrix, stats: Stats | None = None) -> tuple[DataMatrix, Stats]:
    """Z-score each column using the population standard deviation (divide by n).

    Zero-variance columns map to zero.  Pass ``stats`` from a training set to
    transform a test set with the training statistics.
    """
    X = data.values
    if stats is None:
        if X.shape[0] < 1:
            raise ValueError("standardize needs at least one row")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        stats = Stats(mean, std)
    scale = np.where(stats.std > 0, stats.std, 1.0)
    Z = (X - stats.mean) / scale
    Z[:, stats.std <= 0] = 0.0
    return replace(data, values=Z), stats


def split_half(data: DataMatrix, seed=None, scores=None) -> SplitResult:
    """Random 50/50 split with ``ceil(n/2)`` training rows.

    When ``scores`` (leverage scores over all rows) are given, rows are binned
    into score deciles and each decile is split at random, so train and test
    share the same score distribution.  Leftover odd rows from the deciles are
    assigned so that the overall sizes stay ``ceil(n/2)`` / ``floor(n/2)``.
    """
    n = data.n
    if n < 2:
        raise ValueError("split_half needs at least two rows")
    rng = np.random.default_rng(seed)
    n_train = (n + 1) // 2
    if scores is None:
        perm = rng.permutation(n)
        train = np.sort(perm[:n_train])
        test = np.sort(perm[n_train:])
    else:
        s = np.asarray(getattr(scores, "scores", scores), dtype=np.float64)
        if s.size != n:
            raise ValueError("scores must have one entry per row")
        order = np.argsort(s, kind="stable")
        bins = np.array_split(order, 10)
        train_parts, test_parts, spare = [], [], []
        for b in bins:
            b = rng.permutation(b)
            half = b.size // 2
            train_parts.append(b[:half])
            test_parts.append(b[half:2 * half])
            spare.extend(b[2 * half:].tolist())
        spare = rng.permutation(np.asarray(spare, dtype=np.int64))
        need = n_train - sum(p.size for p in train_parts)
        train = np.sort(np.concatenate(train_parts + [spare[:need]]))
        test = np.sort(np.concatenate(test_parts + [spare[need:]]))
    return SplitResult(data.take(train), data.take(test), train, test)


def generate_toy_regression(n: int = 1000, d: int = 2, b: float = 20.0,
                            noise_sigma: float = 0.1, seed=None) -> DataMatrix:
    """Gaussian inputs with target ``x_1 + b + noise``."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = X[:, 0] + b + noise_sigma * rng.standard_normal(n)
    return DataMatrix(X, y)


def generate_gaussian_clusters(specs: Sequence[tuple], seed=None) -> DataMatrix:
    """Isotropic Gaussian blobs; ``specs`` is a sequence of ``(center, std, count)``."""
    if not specs:
        raise ValueError("at least one cluster spec is required")
    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for label, (center, std, count) in enumerate(specs):
        if count < 1:
            raise ValueError("cluster counts must be positive")
        c = np.atleast_1d(np.asarray(center, dtype=np.float64))
        blocks.append(c + std * rng.standard_normal((count, c.size)))
        labels.append(np.full(count, label))
    return DataMatrix(np.vstack(blocks), labels=np.concatenate(labels))


#: Datasets shipped with the package: file name, target column, label column.
BUNDLED = {
    "housing": ("housing.csv", "MEDV", None),
    "breast_cancer": ("breast_cancer.csv", None, "malignant"),
    "australian": ("australian.csv", None, "class"),
    "abalone": ("abalone.csv", None, "rings_ge_19"),
}

#: Datasets named in the experiments that must be supplied by the user as
#: ``<name>.csv`` in a data directory; the last column is the regression
#: target or, for clustering sets, the class label.
EXTERNAL = {"wine_quality": "target", "parkinson": "target", "pumadyn8fm": "target",
            "glass": "label"}


def bundled_path(name: str) -> Path:
    fname = BUNDLED[name][0]
    return Path(str(resources.files("diverse_nystrom") / "data" / fname))


def load_named(name: str, data_dir=None) -> DataMatrix:
    """Load a dataset by name from ``data_dir`` (``<name>.csv``) or the bundled copies."""
    if data_dir is not None:
        path = Path(data_dir) / f"{name}.csv"
        if path.exists():
            if name in BUNDLED:
                _, t, lab = BUNDLED[name]
                return load_csv(path, target_column=t, label_column=lab)
            if EXTERNAL.get(name) == "label":
                return load_csv(path, label_column="last")
            return load_csv(path, target_column="last")
    if name in BUNDLED:
        _, t, lab = BUNDLED[name]
        return load_csv(bundled_path(name), target_column=t, label_column=lab)
    where = f" in {data_dir}" if data_dir is not None else ""
    raise DataError(f"dataset {name!r} is not bundled and no {name}.csv was found{where}")
