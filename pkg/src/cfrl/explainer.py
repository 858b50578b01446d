"""scikit-learn style facade over the full pipeline.

``CounterfactualExplainer.fit(X)`` normalizes the data, wraps the supplied
predictor, and trains the generation agent; ``transform(X)`` returns raw-
unit counterfactual rows (NaN rows where no counterfactual was found) and
``explain(X)`` the full per-instance results. The estimator follows the
usual conventions: constructor only stores parameters, fitted state lives
in trailing-underscore attributes, ``get_params``/``set_params`` work for
grid search and cloning.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .agent import TrainConfig, fine_tune_local, generate_cf, train_global
from .data import Dataset, denormalize, fit_normalizer, normalize
from .env import EnvConfig, GoalSpec
from .errors import ConfigError
from .predictor import CallablePredictor
from .schema import Feature, FeatureSchema, Target


class _RawUnitAdapter:
    """Present a raw-unit predictor as one that accepts normalized inputs."""

    def __init__(self, handle, stats):
        self._handle = handle
        self._stats = stats
        self.task = handle.task
        self.n_features = handle.n_features
        self.n_classes = getattr(handle, "n_classes", None)

    def predict(self, z):
        return self._handle.predict(denormalize(np.asarray(z), self._stats))

    def predict_batch(self, Z):
        return self._handle.predict_batch(denormalize(np.asarray(Z), self._stats))


class CounterfactualExplainer(TransformerMixin, BaseEstimator):
    """Generate counterfactual examples for a black-box predictor.

    Parameters mirror the pipeline: ``predictor`` is any fitted estimator
    or callable mapping raw-unit rows to labels/values; ``goal`` selects
    untargeted / targeted classification or a regression shift of at
    least ``delta``; ``lam`` trades goal attainment against L1 distance;
    ``max_changes`` caps how many features an episode may touch.
    """

    def __init__(self, predictor=None, task="classification", n_classes=None,
                 goal="untargeted", target_class=None, delta=None,
                 lam=1.0, max_changes=None,
                 actionable=None, directions=None, feature_names=None,
                 budget=2000, epochs=10, hidden=(64, 64), batch_size=64,
                 n_step=3, gamma=0.99, curiosity_scale=1.0, learn_predictor_units="raw",
                 seed=0):
        self.predictor = predictor
        self.task = task
        self.n_classes = n_classes
        self.goal = goal
        self.target_class = target_class
        self.delta = delta
        self.lam = lam
        self.max_changes = max_changes
        self.actionable = actionable
        self.directions = directions
        self.feature_names = feature_names
        self.budget = budget
        self.epochs = epochs
        self.hidden = hidden
        self.batch_size = batch_size
        self.n_step = n_step
        self.gamma = gamma
        self.curiosity_scale = curiosity_scale
        self.learn_predictor_units = learn_predictor_units
        self.seed = seed

    # ---- fitting ----------------------------------------------------

    def _build_schema(self, X) -> FeatureSchema:
        n = X.shape[1]
        names = list(self.feature_names) if self.feature_names is not None else [f"x{i}" for i in range(n)]
        if len(names) != n:
            raise ConfigError(f"{len(names)} feature names for {n} columns")
        actionable = self.actionable if self.actionable is not None else [True] * n
        directions = self.directions if self.directions is not None else ["any"] * n
        mins, maxs = X.min(axis=0), X.max(axis=0)
        features = []
        for i in range(n):
            lo, hi = float(mins[i]), float(maxs[i])
            if lo == hi:
                hi = lo + 1.0  # constant column; excluded from actions by the normalizer
            features.append(Feature(
                name=names[i], kind="numeric", actionable=bool(actionable[i]),
                direction=directions[i], raw_min=lo, raw_max=hi,
            ))
        if self.task == "classification":
            k = self.n_classes
            if k is None:
                raise ConfigError("classification needs n_classes")
            target = Target(name="target", task="classification", n_classes=int(k))
        else:
            target = Target(name="target", task="regression")
        return FeatureSchema(features=tuple(features), target=target)

    def _wrap_predictor(self, schema) -> object:
        if self.predictor is None:
            raise ConfigError("CounterfactualExplainer needs a predictor to explain")
        handle = self.predictor
        if not hasattr(handle, "predict_batch"):
            handle = CallablePredictor(
                handle, task=self.task, n_features=schema.n_features,
                n_classes=self.n_classes,
            )
        if self.learn_predictor_units == "raw":
            handle = _RawUnitAdapter(handle, self.stats_)
        return handle

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        schema = self._build_schema(X)
        raw = Dataset(schema=schema, rows=X,
                      labels=np.zeros(len(X)) if schema.target.task == "regression"
                      else np.zeros(len(X), dtype=np.int64))
        self.stats_ = fit_normalizer(raw)
        handle = self._wrap_predictor(schema)
        train = Dataset(schema=schema, rows=normalize(X, self.stats_),
                        labels=raw.labels, normalized=True)
        goal = GoalSpec(self.goal, self.target_class, self.delta)
        n_act = len([f for f in schema.features if f.actionable])
        m = self.max_changes if self.max_changes is not None else n_act
        env_cfg = EnvConfig(lam=self.lam, max_features=int(m))
        cfg = TrainConfig(
            per_sample_budget=self.budget, epochs=self.epochs,
            gamma=self.gamma, n_step=self.n_step, hidden=tuple(self.hidden),
            batch_size=self.batch_size, curiosity_scale=self.curiosity_scale,
            seed=self.seed,
        )
        self.handle_ = handle
        self.snapshot_, self.log_ = train_global(train, self.stats_, handle, goal, env_cfg, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "snapshot_"):
            raise NotFittedError("this CounterfactualExplainer is not fitted yet")

    # ---- generation -------------------------------------------------

    def explain(self, X, local: bool = False):
        """Per-row counterfactual results (normalized-space metrics)."""
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        out = []
        for i, row in enumerate(X):
            z = normalize(row, self.stats_)
            snap = self.snapshot_
            if local:
                snap, _ = fine_tune_local(snap, z, self.handle_)
            out.append(generate_cf(snap, z, self.handle_, instance_id=str(i)))
        return out

    def transform(self, X):
        """Raw-unit counterfactual matrix aligned with X; rows of NaN mark
        instances with no counterfactual found."""
        results = self.explain(X)
        out = np.full(np.asarray(X, dtype=float).shape, np.nan)
        for i, r in enumerate(results):
            if r.valid:
                out[i] = denormalize(r.counterfactual, self.stats_)
        return out
