"""Feature schema: names, kinds, actionability and direction constraints.

A schema is declared once per dataset, either in code or as a JSON document
(see ``load_schema``). It is immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError

KINDS = ("numeric", "binary")
DIRECTIONS = ("any", "increase", "decrease")
TASKS = ("classification", "regression")


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = "numeric"
    actionable: bool = True
    direction: str = "any"
    raw_min: float = 0.0
    raw_max: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"feature {self.name!r}: unknown direction {self.direction!r}")
        if self.kind == "binary":
            if (self.raw_min, self.raw_max) != (0.0, 1.0):
                raise ConfigError(f"feature {self.name!r}: binary features use raw bounds [0, 1]")
        elif not self.raw_min < self.raw_max:
            raise ConfigError(f"feature {self.name!r}: raw_min must be < raw_max")


@dataclass(frozen=True)
class Target:
    name: str
    task: str
    n_classes: int | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"target {self.name!r}: unknown task {self.task!r}")
        if self.task == "classification":
            if self.n_classes is None or self.n_classes < 2:
                raise ConfigError("classification target needs n_classes >= 2")
        elif self.n_classes is not None:
            raise ConfigError("regression target must not declare n_classes")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]
    target: Target

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError("feature names must be unique")
        if self.target.name in names:
            raise ConfigError("target name collides with a feature name")
        if not any(f.actionable for f in self.features):
            raise ConfigError("at least one feature must be actionable")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def actionable_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.actionable]

    def fingerprint(self) -> str:
        """Stable hash of the schema content, used to pair snapshots with data."""
        import hashlib

        return hashlib.sha256(schema_to_json(self).encode()).hexdigest()[:16]


def schema_to_json(schema: FeatureSchema) -> str:
    doc = {
        "features": [
            {
                "name": f.name,
                "kind": f.kind,
                "actionable": f.actionable,
                "direction": f.direction,
                "raw_min": f.raw_min,
                "raw_max": f.raw_max,
            }
            for f in schema.features
        ],
        "target": {
            "name": schema.target.name,
            "task": schema.target.task,
            **({"n_classes": schema.target.n_classes} if schema.target.n_classes else {}),
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def schema_from_dict(doc: dict) -> FeatureSchema:
    try:
        features = tuple(
            Feature(
                name=f["name"],
                kind=f.get("kind", "numeric"),
                actionable=bool(f.get("actionable", True)),
                direction=f.get("direction", "any"),
                raw_min=float(f.get("raw_min", 0.0)),
                raw_max=float(f.get("raw_max", 1.0)),
            )
            for f in doc["features"]
        )
        tgt = doc["target"]
        target = Target(
            name=tgt["name"],
            task=tgt["task"],
            n_classes=int(tgt["n_classes"]) if "n_classes" in tgt else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed schema document: {exc}") from exc
    return FeatureSchema(features=features, target=target)


def load_schema(path) -> FeatureSchema:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read schema file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"schema file {path} is not valid JSON: {exc}") from exc
    return schema_from_dict(doc)


def save_schema(schema: FeatureSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(schema_to_json(schema) + "\n")
