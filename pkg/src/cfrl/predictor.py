"""Black-box prediction targets.

A predictor handle is anything with ``task``, ``n_features``, optional
``n_classes``, and ``predict``/``predict_batch``. In-process handles wrap a
DenseNet trained here; remote handles (see ``protocol``) speak a JSON-lines
wire protocol; ``CallablePredictor`` adapts any Python function or fitted
estimator. Classification predictions are class indices with ties broken
toward the lowest index.
"""

from __future__ import annotations

import json
import time
import zipfile

import numpy as np

from . import nets
from .data import Dataset
from .errors import ConfigError, NoCounterfactualError
from .metrics import CfResult


class MlpPredictor:
    """In-process MLP target: softmax head for classification, identity
    head plus label standardization for regression."""

    def __init__(self, net: nets.DenseNet, task: str, n_classes: int | None = None,
                 y_mean: float = 0.0, y_std: float = 1.0):
        self.net = net
        self.task = task
        self.n_classes = n_classes
        self.y_mean = y_mean
        self.y_std = y_std

    @property
    def n_features(self) -> int:
        return self.net.n_in

    def predict(self, x):
        return self.predict_batch(np.asarray(x)[None, :])[0]

    def predict_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        out, _ = nets.forward(self.net, X)
        if self.task == "classification":
            return np.argmax(out, axis=1).astype(np.int64)
        return out[:, 0] * self.y_std + self.y_mean

    def save(self, path) -> None:
        meta = {
            "task": self.task,
            "n_classes": self.n_classes,
            "y_mean": self.y_mean,
            "y_std": self.y_std,
        }
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("meta.json", json.dumps(meta))
            zf.writestr("net.bin", nets.params_to_bytes(self.net))

    @classmethod
    def load(cls, path) -> "MlpPredictor":
        try:
            with zipfile.ZipFile(path) as zf:
                meta = json.loads(zf.read("meta.json"))
                net = nets.params_from_bytes(zf.read("net.bin"), source=str(path))
        except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: not a valid predictor file: {exc}") from exc
        return cls(net, meta["task"], meta["n_classes"], meta["y_mean"], meta["y_std"])


class CallablePredictor:
    """Adapt a plain function or fitted estimator with .predict to the
    handle interface."""

    def __init__(self, fn, task: str, n_features: int, n_classes: int | None = None):
        if task == "classification" and (n_classes is None or n_classes < 2):
            raise ConfigError("classification predictor needs n_classes >= 2")
        self._fn = fn if callable(fn) else fn.predict
        self.task = task
        self.n_features = n_features
        self.n_classes = n_classes

    def predict(self, x):
        return self.predict_batch(np.asarray(x)[None, :])[0]

    def predict_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.asarray(self._fn(X))
        if out.ndim == 0:
            out = out[None]
        if self.task == "classification":
            return out.astype(np.int64)
        return out.astype(np.float64)


def _iterate_minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_mlp_classifier(train: Dataset, hidden, epochs=200, seed=0,
                         learning_rate=1e-3, batch_size=32) -> MlpPredictor:
    """Cross-entropy training of a softmax-head MLP on a normalized
    classification dataset."""
    if train.schema.target.task != "classification":
        raise ConfigError("train_mlp_classifier needs a classification dataset")
    if not train.normalized:
        raise ConfigError("train the predictor on normalized data")
    k = train.schema.target.n_classes
    if len(np.unique(train.labels)) < 2:
        raise ConfigError("training data contains a single class")
    net = nets.init_net([train.n_features, *hidden, k], "softmax", seed=seed)
    opt = nets.Optimizer("adam", learning_rate)
    rng = np.random.default_rng(seed + 1)
    onehot = np.eye(k)[train.labels]
    for _ in range(epochs):
        for idx in _iterate_minibatches(train.n_rows, batch_size, rng):
            X, Y = train.rows[idx], onehot[idx]
            probs, tape = nets.forward(net, X)
            gout = -Y / np.maximum(probs, 1e-12) / len(idx)
            grads = nets.backward(net, tape, gout)
            nets.apply_update(net, grads, opt)
    return MlpPredictor(net, "classification", n_classes=k)


def train_mlp_regressor(train: Dataset, hidden, epochs=200, seed=0,
                        learning_rate=1e-3, batch_size=32) -> MlpPredictor:
    """Squared-error training of an identity-head MLP; labels are
    standardized internally but predictions come back in raw units."""
    if train.schema.target.task != "regression":
        raise ConfigError("train_mlp_regressor needs a regression dataset")
    if not train.normalized:
        raise ConfigError("train the predictor on normalized data")
    y = train.labels.astype(np.float64)
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    yz = (y - y_mean) / y_std
    net = nets.init_net([train.n_features, *hidden, 1], "identity", seed=seed)
    opt = nets.Optimizer("adam", learning_rate)
    rng = np.random.default_rng(seed + 1)
    for _ in range(epochs):
        for idx in _iterate_minibatches(train.n_rows, batch_size, rng):
            X, Y = train.rows[idx], yz[idx]
            out, tape = nets.forward(net, X)
            gout = 2.0 * (out[:, 0] - Y)[:, None] / len(idx)
            grads = nets.backward(net, tape, gout)
            nets.apply_update(net, grads, opt)
    return MlpPredictor(net, "regression", y_mean=y_mean, y_std=y_std)


def evaluate(handle, test: Dataset) -> float:
    """Accuracy for classification, RMSE (raw label units) for regression."""
    preds = handle.predict_batch(test.rows)
    if handle.task == "classification":
        return float(np.mean(preds == test.labels))
    return float(np.sqrt(np.mean((preds - test.labels) ** 2)))


class NearestCTIndex:
    """Training rows with their predicted labels cached under one handle;
    supports the nearest counterfactual-from-corpus baseline."""

    def __init__(self, rows: np.ndarray, predicted: np.ndarray):
        self.rows = np.asarray(rows, dtype=np.float64)
        self.predicted = np.asarray(predicted, dtype=np.int64)

    @classmethod
    def build(cls, train: Dataset, handle) -> "NearestCTIndex":
        if handle.task != "classification":
            raise ConfigError("nearest-CT baseline applies to classification only")
        return cls(train.rows, handle.predict_batch(train.rows))


def nearest_ct(index: NearestCTIndex, x: np.ndarray, handle) -> CfResult:
    """Closest (L1) training row whose predicted class differs from the
    query's predicted class; ties broken by row order."""
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    own = handle.predict(x)
    candidates = np.flatnonzero(index.predicted != own)
    if candidates.size == 0:
        raise NoCounterfactualError("no counterfactual in corpus: all rows share the query's predicted class")
    dists = np.abs(index.rows[candidates] - x).sum(axis=1)
    best = candidates[int(np.argmin(dists))]
    cf = index.rows[best].copy()
    return CfResult(
        original=x,
        counterfactual=cf,
        valid=True,
        proximity=float(np.abs(cf - x).sum()),
        sparsity=int(np.sum(cf != x)),
        gen_time_s=time.perf_counter() - t0,
    )


def check_schema(handle, schema) -> None:
    if handle.n_features != schema.n_features:
        raise ConfigError(
            f"predictor expects {handle.n_features} features, schema declares {schema.n_features}"
        )
    task = schema.target.task
    if handle.task != task:
        raise ConfigError(f"predictor task {handle.task!r} != schema task {task!r}")
    if task == "classification" and handle.n_classes != schema.target.n_classes:
        raise ConfigError(
            f"predictor has {handle.n_classes} classes, schema declares {schema.target.n_classes}"
        )
