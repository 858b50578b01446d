"""Tabular dataset handling: CSV loading, min-max normalization, splits,
and uniform ball sampling around a target instance.

Everything downstream of this module works in normalized [0, 1] feature
space; normalization statistics are always fitted on the training split
only and carried alongside any saved policy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CsvParseError
from .schema import FeatureSchema


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    rows: np.ndarray          # (n_rows, n_features) float64
    labels: np.ndarray        # int64 class indices or float64 targets
    normalized: bool = False

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2 or rows.shape[1] != self.schema.n_features:
            raise ConfigError(
                f"rows have shape {rows.shape}, schema declares {self.schema.n_features} features"
            )
        if not np.isfinite(rows).all():
            raise ConfigError("dataset contains non-finite feature values")
        if self.normalized and ((rows < 0).any() or (rows > 1).any()):
            raise ConfigError("normalized dataset has entries outside [0, 1]")
        task = self.schema.target.task
        if task == "classification":
            labels = np.asarray(self.labels, dtype=np.int64)
            k = self.schema.target.n_classes
            if labels.size and (labels.min() < 0 or labels.max() >= k):
                raise ConfigError(f"class labels must lie in [0, {k - 1}]")
        else:
            labels = np.asarray(self.labels, dtype=np.float64)
            if labels.size and not np.isfinite(labels).all():
                raise ConfigError("regression labels must be finite")
        object.__setattr__(self, "labels", labels)
        if len(labels) != len(rows):
            raise ConfigError("label count does not match row count")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_features(self) -> int:
        return self.schema.n_features


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature min/max fitted on the training split."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ConfigError("normalization stats must be matching 1-D vectors")
        if (maxs < mins).any():
            raise ConfigError("normalization stats need max >= min per feature")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def constant_mask(self) -> np.ndarray:
        return self.maxs == self.mins

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationStats":
        return cls(np.asarray(doc["mins"]), np.asarray(doc["maxs"]))


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a comma-separated file (one header row, '.' decimals) into a raw
    Dataset. Columns may appear in any order but must cover every schema
    feature plus the target."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read CSV {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        wanted = schema.feature_names + [schema.target.name]
        positions = {}
        for name in wanted:
            try:
                positions[name] = header.index(name)
            except ValueError:
                raise CsvParseError(f"{path}: missing column {name!r}") from None

        rows, labels = [], []
        for row_idx, record in enumerate(reader, start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue  # ignore blank lines
            values = np.empty(schema.n_features)
            for j, feat in enumerate(schema.features):
                cell = record[positions[feat.name]]
                try:
                    v = float(cell)
                except ValueError:
                    raise CsvParseError(
                        f"{path}: non-numeric cell at row {row_idx}, column {feat.name!r}: {cell!r}"
                    ) from None
                if feat.kind == "binary" and v not in (0.0, 1.0):
                    raise CsvParseError(
                        f"{path}: binary feature {feat.name!r} has value {cell!r} at row {row_idx}"
                    )
                values[j] = v
            cell = record[positions[schema.target.name]]
            try:
                y = float(cell)
            except ValueError:
                raise CsvParseError(
                    f"{path}: non-numeric label at row {row_idx}: {cell!r}"
                ) from None
            if schema.target.task == "classification":
                k = schema.target.n_classes
                if y != int(y) or not 0 <= y < k:
                    raise CsvParseError(
                        f"{path}: label out of range at row {row_idx}: {cell!r} (expected 0..{k - 1})"
                    )
                y = int(y)
            rows.append(values)
            labels.append(y)

    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    return Dataset(schema=schema, rows=np.array(rows), labels=np.array(labels))


def fit_normalizer(train: Dataset) -> NormalizationStats:
    if train.n_rows == 0:
        raise ConfigError("cannot fit normalizer on an empty dataset")
    if train.normalized:
        raise ConfigError("normalizer expects raw-unit data")
    return NormalizationStats(train.rows.min(axis=0), train.rows.max(axis=0))


def normalize(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Map a raw-unit vector (or matrix) into the unit box. Constant
    features map to 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != len(stats.mins):
        raise ConfigError(f"vector length {x.shape[-1]} != {len(stats.mins)} features")
    span = np.where(stats.constant_mask, 1.0, stats.maxs - stats.mins)
    out = (x - stats.mins) / span
    out = np.where(stats.constant_mask, 0.0, out)
    return np.clip(out, 0.0, 1.0)


def denormalize(z: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Inverse of ``normalize`` for in-range inputs; constant features
    return their fitted value."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != len(stats.mins):
        raise ConfigError(f"vector length {z.shape[-1]} != {len(stats.mins)} features")
    return stats.mins + z * (stats.maxs - stats.mins)


def normalize_dataset(ds: Dataset, stats: NormalizationStats) -> Dataset:
    return Dataset(
        schema=ds.schema, rows=normalize(ds.rows, stats), labels=ds.labels, normalized=True
    )


def actionable_indices(schema: FeatureSchema, stats: NormalizationStats | None = None) -> list[int]:
    """Schema-actionable features minus constant ones (zero-range actions
    are meaningless)."""
    idx = schema.actionable_indices()
    if stats is not None:
        idx = [i for i in idx if not stats.constant_mask[i]]
    if not idx:
        raise ConfigError("no actionable non-constant features remain")
    return idx


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seed-deterministic partition; train gets floor(fraction * n) rows."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n_rows)
    n_train = int(math.floor(train_fraction * dataset.n_rows))
    tr, te = order[:n_train], order[n_train:]
    make = lambda idx: Dataset(
        schema=dataset.schema,
        rows=dataset.rows[idx],
        labels=dataset.labels[idx],
        normalized=dataset.normalized,
    )
    return make(tr), make(te)


def sample_neighborhood(
    x: np.ndarray,
    radius: float,
    count: int,
    rng: np.random.Generator | int,
    clip: bool = True,
) -> np.ndarray:
    """Uniform samples from the L2 ball of given radius around a normalized
    instance. Direction uniform on the sphere, radius scaled by U^(1/n) for
    an exact uniform-in-ball law; components clamped to [0, 1] afterwards
    unless ``clip`` is off."""
    if count <= 0:
        raise ConfigError("sample count must be positive")
    if radius <= 0:
        raise ConfigError("radius must be positive")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    g = rng.normal(size=(count, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    directions = g / norms
    radii = radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    pts = x + directions * radii
    if clip:
        pts = np.clip(pts, 0.0, 1.0)
    return pts
