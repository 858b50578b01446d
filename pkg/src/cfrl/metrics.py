"""Counterfactual quality metrics and machine-readable reports.

Validity counts every attempted instance in the denominator; proximity
(normalized L1) and sparsity (changed-feature count) are averaged over
valid results only — an empty valid set yields an undefined marker, never
zero. Reports round-trip through CSV and JSON to identical aggregates.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

CSV_COLUMNS = ["instance_id", "valid", "proximity", "sparsity", "gen_time_s"]


@dataclass
class CfResult:
    original: np.ndarray
    counterfactual: np.ndarray | None
    valid: bool
    proximity: float | None
    sparsity: int | None
    gen_time_s: float
    proximity_raw: float | None = None   # denormalized L1, for raw-unit comparisons
    instance_id: str = ""

    def __post_init__(self):
        if self.valid and self.counterfactual is None:
            raise ConfigError("a valid result must carry its counterfactual")

    @property
    def explanation(self) -> np.ndarray | None:
        """Feature-change vector: counterfactual minus original."""
        if self.counterfactual is None:
            return None
        return self.counterfactual - self.original


def validity(results) -> float:
    if not results:
        raise ConfigError("validity of an empty result set is undefined")
    return sum(1 for r in results if r.valid) / len(results)


def proximity_mean(results) -> float | None:
    vals = [r.proximity for r in results if r.valid]
    return float(np.mean(vals)) if vals else None


def sparsity_mean(results) -> float | None:
    vals = [r.sparsity for r in results if r.valid]
    return float(np.mean(vals)) if vals else None


def gen_time_total(results) -> float:
    return float(sum(r.gen_time_s for r in results))


@dataclass
class MetricsReport:
    results: list
    config: dict = field(default_factory=dict)
    train_time_s: float = 0.0

    def aggregates(self) -> dict:
        return {
            "n_instances": len(self.results),
            "validity": validity(self.results),
            "proximity_mean": proximity_mean(self.results),
            "sparsity_mean": sparsity_mean(self.results),
            "gen_time_total_s": gen_time_total(self.results),
            "train_time_s": self.train_time_s,
        }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)   # round-trips exactly
    return str(value)


def write_report(report: MetricsReport, path, format: str) -> None:
    if format == "json":
        doc = {
            "config": report.config,
            "train_time_s": report.train_time_s,
            "aggregates": report.aggregates(),
            "results": [
                {
                    "instance_id": r.instance_id,
                    "valid": r.valid,
                    "proximity": r.proximity,
                    "sparsity": r.sparsity,
                    "gen_time_s": r.gen_time_s,
                    "proximity_raw": r.proximity_raw,
                    "original": np.asarray(r.original, dtype=float).tolist(),
                    "counterfactual": (
                        None if r.counterfactual is None
                        else np.asarray(r.counterfactual, dtype=float).tolist()
                    ),
                }
                for r in report.results
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    elif format == "csv":
        agg = report.aggregates()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in report.results:
                writer.writerow([
                    r.instance_id, _fmt(r.valid), _fmt(r.proximity),
                    _fmt(r.sparsity), _fmt(r.gen_time_s),
                ])
            writer.writerow(["#aggregate:validity", _fmt(agg["validity"]), "", "", ""])
            writer.writerow(["#aggregate:proximity_mean", _fmt(agg["proximity_mean"]), "", "", ""])
            writer.writerow(["#aggregate:sparsity_mean", _fmt(agg["sparsity_mean"]), "", "", ""])
            writer.writerow(["#aggregate:gen_time_total_s", _fmt(agg["gen_time_total_s"]), "", "", ""])
    else:
        raise ConfigError(f"unknown report format {format!r} (expected csv or json)")


def read_report_rows(path) -> list[CfResult]:
    """Reload per-instance rows from a written report (either format);
    used to verify aggregates independently."""
    path = str(path)
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        out = []
        for row in doc["results"]:
            out.append(CfResult(
                original=np.asarray(row["original"], dtype=float),
                counterfactual=(
                    None if row["counterfactual"] is None
                    else np.asarray(row["counterfactual"], dtype=float)
                ),
                valid=bool(row["valid"]),
                proximity=row["proximity"],
                sparsity=row["sparsity"],
                gen_time_s=row["gen_time_s"],
                proximity_raw=row.get("proximity_raw"),
                instance_id=row["instance_id"],
            ))
        return out
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV columns {header}")
        for row in reader:
            if row[0].startswith("#aggregate"):
                continue
            valid = row[1] == "1"
            out.append(CfResult(
                original=np.zeros(0),
                counterfactual=np.zeros(0) if valid else None,
                valid=valid,
                proximity=float(row[2]) if row[2] else None,
                sparsity=int(row[3]) if row[3] else None,
                gen_time_s=float(row[4]),
                instance_id=row[0],
            ))
    return out


def mean_std(values) -> tuple[float, float | None]:
    """Mean and sample standard deviation (ddof=1); std is None for a
    single repetition."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ConfigError("mean over an empty sequence")
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else None
    return mean, std


def aggregate_repetitions(reports: list[MetricsReport]) -> dict:
    """Per-metric mean ± sample std across repeated runs."""
    if not reports:
        raise ConfigError("no repetitions to aggregate")
    out = {}
    for key in ("validity", "proximity_mean", "sparsity_mean", "gen_time_total_s", "train_time_s"):
        vals = [rep.aggregates()[key] for rep in reports]
        if any(v is None for v in vals):
            out[key] = {"mean": None, "std": None}
        else:
            mean, std = mean_std(vals)
            out[key] = {"mean": mean, "std": std}
    out["n_repetitions"] = len(reports)
    return out


def spearman(xs, ys) -> float:
    """Spearman rank correlation; NaN when either sequence is constant."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ConfigError("spearman needs two equal-length 1-D sequences")

    def ranks(a):
        order = np.argsort(a, kind="stable")
        r = np.empty_like(a)
        r[order] = np.arange(1, a.size + 1, dtype=float)
        # average ranks over ties
        for v in np.unique(a):
            mask = a == v
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r

    rx, ry = ranks(xs), ranks(ys)
    sx, sy = rx.std(), ry.std()
    if sx == 0 or sy == 0:
        return math.nan
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


def sweep_sparsity_cap(caps, cycle) -> list[dict]:
    """Run one full train/evaluate cycle per sparsity cap m via the given
    callable ``cycle(m) -> MetricsReport``; rows ordered by m."""
    rows = []
    for m in sorted(caps):
        report = cycle(m)
        agg = report.aggregates()
        rows.append({
            "m": m,
            "validity": agg["validity"],
            "sparsity": agg["sparsity_mean"],
            "report": report,
        })
    return rows


def sweep_lambda(lambdas, cycle) -> list[dict]:
    """One cycle per distance weight, rows in the given grid order."""
    rows = []
    for lam in lambdas:
        report = cycle(lam)
        agg = report.aggregates()
        rows.append({
            "lam": lam,
            "validity": agg["validity"],
            "sparsity": agg["sparsity_mean"],
            "report": report,
        })
    return rows
