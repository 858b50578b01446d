#!/usr/bin/env python3
"""Prepare the benchmark datasets bundled under data/.

Raw inputs are the classic UCI files (upstream sources listed below); this
script normalizes them into the CSV layout the loader expects (one header
row, numeric cells, class labels as 0-based indices) and writes a schema
JSON next to each CSV. The cleaned outputs are committed, so running this
is only needed to regenerate them.

Upstream files (UCI Machine Learning Repository):
  breast-cancer-wisconsin.data  https://archive.ics.uci.edu/dataset/15   (699 rows, id + 9 features + class 2/4)
  pima-indians-diabetes.csv     https://www.kaggle.com/datasets/uciml/pima-indians-diabetes-database (768 rows)
  sonar.csv                     https://archive.ics.uci.edu/dataset/151  (208 rows, 60 bands + R/M)
  housing.csv                   https://archive.ics.uci.edu/ml/machine-learning-databases/housing/ (506 rows)

Cleaning notes:
  - breast cancer: 16 rows have '?' in bare_nuclei; imputed with the
    column mode (1) to keep all 699 instances. The sample id column is
    kept as a non-actionable feature (the upstream attribute count of 10
    includes it).
  - sonar: class R -> 0, M -> 1. breast cancer: 2 -> 0 (benign), 4 -> 1.

Usage: prepare_datasets.py RAW_DIR [OUT_DIR]
"""

import csv
import json
import sys
from pathlib import Path

WBC_FEATURES = [
    "sample_id", "clump_thickness", "cell_size_uniformity", "cell_shape_uniformity",
    "marginal_adhesion", "single_epithelial_cell_size", "bare_nuclei",
    "bland_chromatin", "normal_nucleoli", "mitoses",
]
PIMA_FEATURES = [
    "pregnancies", "plasma_glucose", "blood_pressure", "triceps_skinfold",
    "serum_insulin", "bmi", "pedigree", "age",
]
BOSTON_FEATURES = [
    "crim", "zn", "indus", "chas", "nox", "rm", "age", "dis",
    "rad", "tax", "ptratio", "b", "lstat",
]


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_schema(path, feature_names, target_name, task, n_classes=None,
                 binary=(), non_actionable=()):
    doc = {
        "features": [
            {
                "name": name,
                "kind": "binary" if name in binary else "numeric",
                "actionable": name not in non_actionable,
                "direction": "any",
                "raw_min": 0.0,
                "raw_max": 1.0,
            }
            for name in feature_names
        ],
        "target": {"name": target_name, "task": task},
    }
    if n_classes:
        doc["target"]["n_classes"] = n_classes
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def fix_bounds(csv_path, schema_path):
    """Widen schema raw bounds to the observed data range (binary stay 0/1)."""
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = list(zip(*[[float(c) for c in row] for row in reader]))
    with open(schema_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    by_name = dict(zip(header, cols))
    for feat in doc["features"]:
        vals = by_name[feat["name"]]
        if feat["kind"] == "binary":
            continue
        lo, hi = min(vals), max(vals)
        if lo == hi:
            hi = lo + 1.0
        feat["raw_min"], feat["raw_max"] = lo, hi
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def prepare_breast_cancer(raw_dir, out_dir):
    rows = []
    with open(raw_dir / "breast-cancer-wisconsin.data", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            cells = ["1" if c == "?" else c for c in cells]  # bare_nuclei mode
            label = "0" if cells[-1] == "2" else "1"
            rows.append(cells[:-1] + [label])
    write_csv(out_dir / "breast_cancer.csv", WBC_FEATURES + ["malignant"], rows)
    write_schema(out_dir / "breast_cancer.schema.json", WBC_FEATURES, "malignant",
                 "classification", 2, non_actionable=("sample_id",))
    fix_bounds(out_dir / "breast_cancer.csv", out_dir / "breast_cancer.schema.json")
    return len(rows)


def prepare_diabetes(raw_dir, out_dir):
    rows = []
    with open(raw_dir / "pima-indians-diabetes.csv", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(line.split(","))
    write_csv(out_dir / "diabetes.csv", PIMA_FEATURES + ["diabetic"], rows)
    write_schema(out_dir / "diabetes.schema.json", PIMA_FEATURES, "diabetic",
                 "classification", 2)
    fix_bounds(out_dir / "diabetes.csv", out_dir / "diabetes.schema.json")
    return len(rows)


def prepare_sonar(raw_dir, out_dir):
    rows = []
    with open(raw_dir / "sonar.csv", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            label = "1" if cells[-1] == "M" else "0"
            rows.append(cells[:-1] + [label])
    names = [f"band_{i + 1}" for i in range(60)]
    write_csv(out_dir / "sonar.csv", names + ["metal"], rows)
    write_schema(out_dir / "sonar.schema.json", names, "metal", "classification", 2)
    fix_bounds(out_dir / "sonar.csv", out_dir / "sonar.schema.json")
    return len(rows)


def prepare_boston(raw_dir, out_dir):
    rows = []
    with open(raw_dir / "housing.csv", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(line.split(","))
    write_csv(out_dir / "boston.csv", BOSTON_FEATURES + ["medv"], rows)
    write_schema(out_dir / "boston.schema.json", BOSTON_FEATURES, "medv",
                 "regression", binary=("chas",))
    fix_bounds(out_dir / "boston.csv", out_dir / "boston.schema.json")
    return len(rows)


def main():
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    raw_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(__file__).parent.parent / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, fn in (("breast_cancer", prepare_breast_cancer), ("diabetes", prepare_diabetes),
                     ("sonar", prepare_sonar), ("boston", prepare_boston)):
        n = fn(raw_dir, out_dir)
        print(f"{name}: {n} rows -> {out_dir / (name + '.csv')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
