"""Counterfactual example generation for tabular black-box models via
hybrid-action reinforcement learning."""

from .agent import (
    HybridQAgent,
    PolicySnapshot,
    TrainConfig,
    fine_tune_local,
    generate_cf,
    train_global,
)
from .data import (
    Dataset,
    NormalizationStats,
    denormalize,
    fit_normalizer,
    load_csv,
    normalize,
    normalize_dataset,
    sample_neighborhood,
    split,
)
from .env import CfEnv, EnvConfig, GoalSpec, HybridAction
from .errors import (
    CfrlError,
    ConfigError,
    CsvParseError,
    NoCounterfactualError,
    NumericError,
    TransportError,
)
from .explainer import CounterfactualExplainer
from .metrics import CfResult, MetricsReport, validity, proximity_mean, sparsity_mean, write_report
from .predictor import (
    CallablePredictor,
    MlpPredictor,
    NearestCTIndex,
    evaluate,
    nearest_ct,
    train_mlp_classifier,
    train_mlp_regressor,
)
from .protocol import RemotePredictor, TcpServer, connect_external, serve_stdio
from .schema import Feature, FeatureSchema, Target, load_schema, save_schema

__version__ = "0.1.0"
