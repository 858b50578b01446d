import numpy as np
import pytest

from cfrl import data, env, predictor, schema

DATA_DIR = "data"


@pytest.fixture
def toy_schema():
    return schema.FeatureSchema(
        features=(schema.Feature("a"), schema.Feature("b")),
        target=schema.Target("y", "classification", 2),
    )


@pytest.fixture
def toy_separable(toy_schema):
    """2-feature task where crossing x0=0.5 flips the prediction; a
    single-feature change of at most 0.5 always suffices."""
    rng = np.random.default_rng(7)
    X = rng.uniform(size=(300, 2))
    y = (X[:, 0] > 0.5).astype(int)
    ds = data.Dataset(toy_schema, X, y)
    stats = data.fit_normalizer(ds)
    norm = data.normalize_dataset(ds, stats)
    handle = predictor.CallablePredictor(
        lambda Z: (np.atleast_2d(Z)[:, 0] > 0.5).astype(int),
        "classification", 2, 2,
    )
    return norm, stats, handle


@pytest.fixture
def toy_env(toy_separable):
    norm, stats, handle = toy_separable
    return env.CfEnv(norm.schema, stats, handle, env.GoalSpec(), env.EnvConfig(lam=0.5, max_features=2))
