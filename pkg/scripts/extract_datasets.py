"""Rebuild the bundled CSV datasets from wheels available on PyPI.

Sources (all offline-installable):

* Housing (Boston):      mlxtend wheel, ``mlxtend/data/data/boston_housing.csv``
* Breast Cancer (WDBC):  scikit-learn, ``sklearn/datasets/data/breast_cancer.csv``
* Australian Credit:     keel-ds wheel, ``balanced/raw/australian.dat``
* Abalone (features):    keel-ds wheel, ``imbalanced/raw/abalone19.dat``
  (4174 rows; the ring count is binarised in this copy, so no regression target)

Usage::

    pip download --no-deps -d /tmp/wheels mlxtend keel-ds
    python scripts/extract_datasets.py /tmp/wheels src/diverse_nystrom/data
"""
import csv
import glob
import io
import os
import sys
import zipfile

import numpy as np

HOUSING_COLUMNS = ["CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS",
                   "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV"]
ABALONE_SEX = {"I": 0.0, "F": 1.0, "M": 2.0}


def _keel_rows(text):
    return [line.split(",") for line in text.splitlines()
            if line.strip() and not line.startswith("@")]


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if not isinstance(v, str) else v for v in row])


def main(wheel_dir, out_dir):
    os.makedirs(out_dir, exist_ok=True)

    mlx = zipfile.ZipFile(glob.glob(os.path.join(wheel_dir, "mlxtend-*.whl"))[0])
    housing = np.loadtxt(io.StringIO(mlx.read("mlxtend/data/data/boston_housing.csv").decode()),
                         delimiter=",")
    _write(os.path.join(out_dir, "housing.csv"), HOUSING_COLUMNS, housing)

    from sklearn.datasets import load_breast_cancer
    bc = load_breast_cancer()
    header = [name.replace(" ", "_") for name in bc.feature_names] + ["malignant"]
    rows = np.column_stack([bc.data, 1 - bc.target])
    _write(os.path.join(out_dir, "breast_cancer.csv"), header, rows)

    keel = zipfile.ZipFile(glob.glob(os.path.join(wheel_dir, "keel_ds-*.whl"))[0])
    aus = _keel_rows(keel.read("keel_ds/data/balanced/raw/australian.dat").decode())
    header = [f"A{i + 1}" for i in range(14)] + ["class"]
    _write(os.path.join(out_dir, "australian.csv"), header, [[float(v) for v in r] for r in aus])

    aba = _keel_rows(keel.read("keel_ds/data/imbalanced/raw/abalone19.dat").decode())
    header = ["sex", "length", "diameter", "height", "whole_weight", "shucked_weight",
              "viscera_weight", "shell_weight", "rings_ge_19"]
    rows = [[ABALONE_SEX[r[0].strip()]] + [float(v) for v in r[1:8]]
            + [1.0 if r[8].strip() == "positive" else 0.0] for r in aba]
    _write(os.path.join(out_dir, "abalone.csv"), header, rows)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
