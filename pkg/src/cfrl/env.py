"""The counterfactual MDP.

State is the current modified instance plus the set of features already
touched this episode. An action picks one still-available actionable
feature and a signed magnitude; the transition is deterministic, values
are clamped to the unit box and binary features rounded. The reward pays
the distance increment each step and a unit bonus once the prediction
goal is met; with no discounting the episode return telescopes to
``1 - lam * L1(x, x_final)`` on success and ``-lam * L1(x, x_final)``
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import NormalizationStats, actionable_indices
from .errors import ConfigError
from .schema import FeatureSchema

SUCCESS = "success"
BUDGET = "budget"
CONTINUE = "continue"


@dataclass(frozen=True)
class GoalSpec:
    """untargeted-class, targeted-class(target), or regression-threshold(delta)."""

    mode: str = "untargeted"
    target_class: int | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.mode not in ("untargeted", "targeted", "regression"):
            raise ConfigError(f"unknown goal mode {self.mode!r}")
        if self.mode == "targeted" and self.target_class is None:
            raise ConfigError("targeted goal needs target_class")
        if self.mode == "regression":
            if self.delta is None or self.delta <= 0:
                raise ConfigError("regression goal needs delta > 0")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "target_class": self.target_class, "delta": self.delta}

    @classmethod
    def from_dict(cls, doc: dict) -> "GoalSpec":
        return cls(doc.get("mode", "untargeted"), doc.get("target_class"), doc.get("delta"))


@dataclass(frozen=True)
class EnvConfig:
    lam: float = 1.0          # distance weight in the reward
    max_features: int = 5     # episode budget on modified features

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError("lam must be positive")
        if self.max_features < 1:
            raise ConfigError("max_features must be >= 1")

    def to_dict(self) -> dict:
        return {"lam": self.lam, "max_features": self.max_features}

    @classmethod
    def from_dict(cls, doc: dict) -> "EnvConfig":
        return cls(float(doc["lam"]), int(doc["max_features"]))


@dataclass(frozen=True)
class HybridAction:
    k: int       # feature index (into the full feature vector)
    v: float     # signed magnitude in normalized units, |v| <= 1


@dataclass(frozen=True)
class EnvState:
    x0: np.ndarray            # episode's original instance (normalized)
    x: np.ndarray             # current modified instance
    used: frozenset           # feature indices modified this episode
    steps_taken: int
    last_ldist: float
    orig_pred: float | int    # cached h(x0)


def ldist(x, x_tilde) -> float:
    """L1 distance in normalized feature space."""
    return float(np.abs(np.asarray(x_tilde, dtype=float) - np.asarray(x, dtype=float)).sum())


def lpred(x, x_tilde, handle, goal: GoalSpec) -> int:
    """0-1 goal indicator: 1 while the prediction goal is NOT met."""
    orig = handle.predict(np.asarray(x, dtype=float))
    return goal_not_met(orig, handle.predict(np.asarray(x_tilde, dtype=float)), goal)


def goal_not_met(orig_pred, new_pred, goal: GoalSpec) -> int:
    if goal.mode == "untargeted":
        return int(new_pred == orig_pred)
    if goal.mode == "targeted":
        return int(new_pred != goal.target_class)
    return int(abs(float(new_pred) - float(orig_pred)) < goal.delta)


class CfEnv:
    """Episode machinery bound to one predictor handle, goal and schema.

    States are immutable; ``apply`` returns the successor, reward and a
    done kind (success / budget / continue). One predictor call is made
    per reset and per step.
    """

    def __init__(self, schema: FeatureSchema, stats: NormalizationStats, handle,
                 goal: GoalSpec, config: EnvConfig):
        self.schema = schema
        self.stats = stats
        self.handle = handle
        self.goal = goal
        self.config = config
        self.action_set = tuple(actionable_indices(schema, stats))
        if config.max_features > len(self.action_set):
            # clamp rather than reject: m <= |F| by construction
            self.config = EnvConfig(config.lam, len(self.action_set))
        self._binary = np.array([schema.features[i].kind == "binary" for i in range(schema.n_features)])
        self._intervals = {}
        for i in self.action_set:
            d = schema.features[i].direction
            self._intervals[i] = (0.0, 1.0) if d == "increase" else (-1.0, 0.0) if d == "decrease" else (-1.0, 1.0)

    @property
    def n_actions(self) -> int:
        return len(self.action_set)

    def interval(self, k: int) -> tuple[float, float]:
        return self._intervals[k]

    def reset(self, x: np.ndarray) -> EnvState:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.schema.n_features,):
            raise ConfigError(f"instance has shape {x.shape}, expected ({self.schema.n_features},)")
        if (x < 0).any() or (x > 1).any():
            raise ConfigError("reset expects a normalized instance in the unit box")
        orig_pred = self.handle.predict(x)
        if self.goal.mode == "targeted" and orig_pred == self.goal.target_class:
            raise ConfigError(
                f"instance already predicted as target class {self.goal.target_class}; goal is vacuous"
            )
        return EnvState(
            x0=x.copy(), x=x.copy(), used=frozenset(), steps_taken=0,
            last_ldist=0.0, orig_pred=orig_pred,
        )

    def action_mask(self, state: EnvState) -> dict[int, tuple[float, float]]:
        """Still-available features with their allowed magnitude intervals."""
        return {k: self._intervals[k] for k in self.action_set if k not in state.used}

    def apply(self, state: EnvState, action: HybridAction):
        k, v = action.k, float(action.v)
        if k not in self.action_set or k in state.used:
            raise ConfigError(f"feature {k} is not available in this state (caller bug)")
        lo, hi = self._intervals[k]
        if not lo <= v <= hi:
            raise ConfigError(f"magnitude {v} outside allowed interval [{lo}, {hi}] for feature {k}")

        x_next = state.x.copy()
        x_next[k] = min(1.0, max(0.0, x_next[k] + v))
        if self._binary[k]:
            x_next[k] = np.floor(x_next[k] + 0.5)  # 0.5 rounds to 1

        new_pred = self.handle.predict(x_next)
        met = goal_not_met(state.orig_pred, new_pred, self.goal) == 0
        new_ldist = ldist(state.x0, x_next)
        reward = (1.0 if met else 0.0) - self.config.lam * (new_ldist - state.last_ldist)

        used = state.used | {k}
        next_state = EnvState(
            x0=state.x0, x=x_next, used=used, steps_taken=state.steps_taken + 1,
            last_ldist=new_ldist, orig_pred=state.orig_pred,
        )
        if met:
            done = SUCCESS
        elif len(used) >= self.config.max_features or len(used) == len(self.action_set):
            done = BUDGET
        else:
            done = CONTINUE
        return next_state, reward, done
