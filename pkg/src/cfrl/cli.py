"""Command-line entry point.

Every command takes a JSON run-config file; individual fields can be
overridden with repeated ``--set dotted.key=value`` flags. Logs go to
stderr, machine-readable output to files and stdout. Exit codes: 0 on
success (an explanation with valid=false is still success), 2 for
configuration errors, 3 for transport errors, 4 for numeric failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import agent as agent_mod
from . import data as data_mod
from . import metrics as metrics_mod
from . import predictor as predictor_mod
from . import protocol as protocol_mod
from .env import EnvConfig, GoalSpec
from .errors import CfrlError, ConfigError, NumericError, TransportError
from .schema import load_schema

log = logging.getLogger("cfrl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3
EXIT_NUMERIC = 4


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(config: dict, overrides) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects dotted.key=value, got {item!r}")
        key, value = item.split("=", 1)
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _coerce(value)
    return config


def load_config(path, overrides=None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return _apply_overrides(config, overrides)


def _out_dir(config: dict) -> Path:
    out = config.get("output_dir") or os.environ.get("CFRL_OUT", "runs")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_dataset(config: dict):
    ds_cfg = config.get("dataset") or {}
    for key in ("csv", "schema"):
        if key not in ds_cfg:
            raise ConfigError(f"config is missing dataset.{key}")
    schema = load_schema(ds_cfg["schema"])
    dataset = data_mod.load_csv(ds_cfg["csv"], schema)
    sp = config.get("split") or {}
    train, test = data_mod.split(dataset, float(sp.get("fraction", 0.7)), int(sp.get("seed", 0)))
    stats = data_mod.fit_normalizer(train)
    return (schema, data_mod.normalize_dataset(train, stats),
            data_mod.normalize_dataset(test, stats), stats)


def _predictor_from_config(config: dict, schema, train, stats):
    pred = config.get("predictor") or {}
    kind = pred.get("kind", "mlp")
    if kind == "mlp":
        hidden = pred.get("hidden", [64, 64])
        epochs = int(pred.get("epochs", 200))
        seed = int(pred.get("seed", 0))
        lr = float(pred.get("learning_rate", 1e-3))
        if schema.target.task == "classification":
            handle = predictor_mod.train_mlp_classifier(train, hidden, epochs, seed, lr)
        else:
            handle = predictor_mod.train_mlp_regressor(train, hidden, epochs, seed, lr)
        return handle
    if kind == "file":
        return predictor_mod.MlpPredictor.load(pred["path"])
    if kind == "remote":
        endpoint = pred.get("endpoint") or pred.get("command")
        if not endpoint:
            raise ConfigError("remote predictor needs endpoint or command")
        timeout = float(pred.get("timeout", protocol_mod.DEFAULT_TIMEOUT))
        return protocol_mod.connect_external(endpoint, schema=schema, timeout=timeout)
    raise ConfigError(f"unknown predictor kind {kind!r}")


def _goal_from_config(config: dict) -> GoalSpec:
    doc = config.get("goal") or {"mode": "untargeted"}
    return GoalSpec.from_dict(doc)


def _env_from_config(config: dict, schema) -> EnvConfig:
    doc = config.get("env") or {}
    m = doc.get("max_changes", doc.get("max_features"))
    if m is None:
        m = len(schema.actionable_indices())
    return EnvConfig(lam=float(doc.get("lam", 1.0)), max_features=int(m))


def _train_config(config: dict) -> agent_mod.TrainConfig:
    doc = dict(config.get("train") or {})
    return agent_mod.TrainConfig.from_dict(doc)


# ---- commands -------------------------------------------------------


def cmd_train_model(config: dict) -> int:
    schema, train, test, stats = _load_dataset(config)
    handle = _predictor_from_config(config, schema, train, stats)
    if not isinstance(handle, predictor_mod.MlpPredictor):
        raise ConfigError("train-model expects an in-process mlp predictor config")
    out_dir = _out_dir(config)
    out = out_dir / "predictor.zip"
    handle.save(out)
    with open(out_dir / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats.to_dict(), fh)  # consumed by external model bridges
    train_score = predictor_mod.evaluate(handle, train)
    test_score = predictor_mod.evaluate(handle, test)
    name = "accuracy" if schema.target.task == "classification" else "rmse"
    log.info("saved predictor to %s", out)
    print(json.dumps({"predictor": str(out), f"train_{name}": train_score, f"test_{name}": test_score}))
    return EXIT_OK


def cmd_train_agent(config: dict, resume=None) -> int:
    schema, train, test, stats = _load_dataset(config)
    handle = _predictor_from_config(config, schema, train, stats)
    goal = _goal_from_config(config)
    env_cfg = _env_from_config(config, schema)
    cfg = _train_config(config)
    out_dir = _out_dir(config)
    snap_path = out_dir / "policy.zip"
    checkpoint = out_dir / "policy.checkpoint.zip"
    if resume:
        snapshot = agent_mod.PolicySnapshot.load(resume)
        live = snapshot.build_agent(handle, goal=goal, env_config=env_cfg, train_config=cfg)
        probe = train.rows[: cfg.probe_size]
        train_log: list = []
        eligible = agent_mod._eligible_rows(train.rows, handle, goal)
        agent_mod._run_training(live, lambda rng: eligible[rng.integers(len(eligible))],
                                cfg, probe, train_log)
        snapshot = agent_mod.PolicySnapshot.of(live)
    else:
        snapshot, train_log = agent_mod.train_global(
            train, stats, handle, goal, env_cfg, cfg, checkpoint_path=checkpoint)
    snapshot.save(snap_path)
    log_path = out_dir / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:
        for entry in train_log:
            fh.write(json.dumps(entry) + "\n")
    for entry in train_log:
        if "probe_validity" in entry:
            log.info("epoch %s probe_validity %.3f", entry.get("epoch"), entry["probe_validity"])
    probe_final = [e["probe_validity"] for e in train_log if "probe_validity" in e]
    print(json.dumps({
        "snapshot": str(snap_path), "log": str(log_path),
        "probe_validity": probe_final[-1] if probe_final else None,
    }))
    return EXIT_OK


def _select_instances(test, selector):
    if selector in (None, "all"):
        return np.arange(test.n_rows)
    if isinstance(selector, int):
        return np.array([selector])
    if isinstance(selector, str):
        idx = [int(tok) for tok in selector.split(",") if tok.strip() != ""]
        return np.array(idx)
    raise ConfigError(f"bad instance selector {selector!r}")


def cmd_explain(config: dict, snapshot_path, selector=None, local=False) -> int:
    schema, train, test, stats = _load_dataset(config)
    handle = _predictor_from_config(config, schema, train, stats)
    snapshot = agent_mod.PolicySnapshot.load(snapshot_path)
    if snapshot.schema.fingerprint() != schema.fingerprint():
        raise ConfigError("snapshot was trained against a different schema")
    indices = _select_instances(test, selector)
    results = []
    for i in indices:
        x = test.rows[int(i)]
        snap = snapshot
        if local:
            snap, _ = agent_mod.fine_tune_local(snapshot, x, handle)
        res = agent_mod.generate_cf(snap, x, handle, instance_id=str(int(i)))
        results.append(res)
        _print_explanation(res, schema, stats)
    out_dir = _out_dir(config)
    report = metrics_mod.MetricsReport(results=results, config=_echo_config(config))
    for fmt in ("json", "csv"):
        metrics_mod.write_report(report, out_dir / f"explain_report.{fmt}", fmt)
    return EXIT_OK


def _print_explanation(res, schema, stats) -> None:
    doc = {"instance_id": res.instance_id, "valid": res.valid}
    if res.counterfactual is not None:
        ex_raw = (data_mod.denormalize(res.counterfactual, stats)
                  - data_mod.denormalize(res.original, stats))
        doc["explanation_raw_units"] = {
            f.name: float(ex_raw[i]) for i, f in enumerate(schema.features) if ex_raw[i] != 0.0
        }
        doc["proximity"] = res.proximity
        doc["sparsity"] = res.sparsity
    print(json.dumps(doc))


def _echo_config(config: dict) -> dict:
    return json.loads(json.dumps(config, default=str))


def cmd_evaluate(config: dict) -> int:
    schema, train, test, stats = _load_dataset(config)
    goal = _goal_from_config(config)
    env_cfg = _env_from_config(config, schema)
    cfg = _train_config(config)
    reps = int(config.get("repetitions", 5))
    limit = config.get("eval_instances")
    out_dir = _out_dir(config)
    reports = []
    for rep in range(reps):
        rep_cfg = agent_mod.TrainConfig.from_dict({**cfg.to_dict(), "seed": cfg.seed + rep})
        handle = _predictor_from_config(config, schema, train, stats)
        t0 = time.perf_counter()
        snapshot, _ = agent_mod.train_global(train, stats, handle, goal, env_cfg, rep_cfg)
        train_time = time.perf_counter() - t0
        rows = test.rows if limit is None else test.rows[: int(limit)]
        results = []
        for i, x in enumerate(rows):
            try:
                results.append(agent_mod.generate_cf(snapshot, x, handle, instance_id=f"{rep}/{i}"))
            except ConfigError:
                continue  # targeted goal already satisfied for this row
        report = metrics_mod.MetricsReport(results=results, config=_echo_config(config),
                                           train_time_s=train_time)
        reports.append(report)
        for fmt in ("json", "csv"):
            metrics_mod.write_report(report, out_dir / f"eval_rep{rep}.{fmt}", fmt)
        log.info("repetition %d: %s", rep, report.aggregates())
    summary = metrics_mod.aggregate_repetitions(reports)
    with open(out_dir / "eval_summary.json", "w", encoding="utf-8") as fh:
        json.dump({"config": _echo_config(config), "summary": summary}, fh, indent=2)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_sweep(config: dict) -> int:
    sweep_cfg = config.get("sweep") or {}
    kind = sweep_cfg.get("kind")
    grid = sweep_cfg.get("grid")
    if kind not in ("sparsity_cap", "lambda") or not grid:
        raise ConfigError("sweep needs sweep.kind (sparsity_cap|lambda) and sweep.grid")
    schema, train, test, stats = _load_dataset(config)
    goal = _goal_from_config(config)
    base_env = _env_from_config(config, schema)
    cfg = _train_config(config)
    limit = config.get("eval_instances")
    out_dir = _out_dir(config)

    def cycle(env_cfg, tag):
        handle = _predictor_from_config(config, schema, train, stats)
        t0 = time.perf_counter()
        snapshot, _ = agent_mod.train_global(train, stats, handle, goal, env_cfg, cfg)
        train_time = time.perf_counter() - t0
        rows = test.rows if limit is None else test.rows[: int(limit)]
        results = [agent_mod.generate_cf(snapshot, x, handle, instance_id=str(i))
                   for i, x in enumerate(rows)]
        report = metrics_mod.MetricsReport(results=results, config=_echo_config(config),
                                           train_time_s=train_time)
        for fmt in ("json", "csv"):
            metrics_mod.write_report(report, out_dir / f"sweep_{tag}.{fmt}", fmt)
        return report

    if kind == "sparsity_cap":
        rows = metrics_mod.sweep_sparsity_cap(
            [int(m) for m in grid],
            lambda m: cycle(EnvConfig(base_env.lam, m), f"m{m}"))
        summary = [{"m": r["m"], "validity": r["validity"], "sparsity": r["sparsity"]} for r in rows]
    else:
        rows = metrics_mod.sweep_lambda(
            [float(v) for v in grid],
            lambda lam: cycle(EnvConfig(lam, base_env.max_features), f"lam{lam}"))
        summary = [{"lam": r["lam"], "validity": r["validity"], "sparsity": r["sparsity"]} for r in rows]
    with open(out_dir / "sweep_summary.json", "w", encoding="utf-8") as fh:
        json.dump({"config": _echo_config(config), "rows": summary}, fh, indent=2)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_serve_check(endpoint, timeout) -> int:
    handle = protocol_mod.connect_external(endpoint, timeout=timeout)
    info = {"task": handle.task, "n_features": handle.n_features}
    if handle.task == "classification":
        info["n_classes"] = handle.n_classes
    handle.close()
    print(json.dumps(info))
    return EXIT_OK


# ---- argument wiring ------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfrl",
        description="Counterfactual generation for tabular black-box models via reinforcement learning",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="JSON run-config file")
        p.add_argument("--set", action="append", dest="overrides", metavar="KEY=VALUE",
                       help="override a config field (dotted path, JSON value)")

    with_config(sub.add_parser("train-model", help="train and save an in-process MLP target"))
    p = sub.add_parser("train-agent", help="train the global generation agent")
    with_config(p)
    p.add_argument("--resume", help="continue from a checkpoint snapshot")
    p = sub.add_parser("explain", help="generate counterfactuals for test instances")
    with_config(p)
    p.add_argument("--snapshot", required=True, help="trained policy snapshot")
    p.add_argument("--instances", default="all", help="comma-separated test indices or 'all'")
    p.add_argument("--local", action="store_true", help="fine-tune per instance before rollout")
    with_config(sub.add_parser("evaluate", help="repeated train/evaluate cycles with reports"))
    with_config(sub.add_parser("sweep", help="grid sweep over sparsity cap or lambda"))
    p = sub.add_parser("serve-check", help="probe a remote predictor's protocol handshake")
    p.add_argument("endpoint", help="host:port or a server command line")
    p.add_argument("--timeout", type=float, default=protocol_mod.DEFAULT_TIMEOUT)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "serve-check":
            return cmd_serve_check(args.endpoint, args.timeout)
        config = load_config(args.config, args.overrides)
        if args.command == "train-model":
            return cmd_train_model(config)
        if args.command == "train-agent":
            return cmd_train_agent(config, resume=args.resume)
        if args.command == "explain":
            return cmd_explain(config, args.snapshot, args.instances, args.local)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        if args.command == "sweep":
            return cmd_sweep(config)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except TransportError as exc:
        log.error("transport failure: %s", exc)
        return EXIT_TRANSPORT
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except CfrlError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
