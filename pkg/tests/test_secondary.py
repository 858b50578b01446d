"""Integration of the TypeScript model bridge with the main pipeline.

These tests need the bridge built (frontend/dist); they are skipped when
it is absent so the primary suite stands alone.
"""

import csv
import json
import shutil
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

from cfrl import agent, data, env, metrics, predictor, protocol, schema

ROOT = Path(__file__).parent.parent
BRIDGE = ROOT / "frontend" / "dist" / "cli.js"
NODE = shutil.which("node")

pytestmark = pytest.mark.skipif(
    NODE is None or not BRIDGE.exists(),
    reason="model bridge not built (run `npm run build` in frontend/)",
)


def bridge(*args, timeout=600):
    proc = subprocess.run([NODE, str(BRIDGE), *map(str, args)],
                          capture_output=True, text=True, timeout=timeout)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def diabetes_setup(tmp_path_factory):
    """Primary-side split/stats, a train-only CSV for the bridge, and a
    trained AdaBoost model file."""
    tmp = tmp_path_factory.mktemp("bridge")
    sch = schema.load_schema(ROOT / "data" / "diabetes.schema.json")
    ds = data.load_csv(ROOT / "data" / "diabetes.csv", sch)
    train, test = data.split(ds, 0.7, seed=0)
    stats = data.fit_normalizer(train)
    stats_path = tmp / "stats.json"
    stats_path.write_text(json.dumps(stats.to_dict()))

    train_csv = tmp / "diabetes_train.csv"
    with open(train_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(sch.feature_names + [sch.target.name])
        for row, label in zip(train.rows, train.labels):
            writer.writerow(list(row) + [int(label)])

    model_path = tmp / "adaboost.json"
    out = bridge("train", "--kind", "adaboost", "--csv", train_csv,
                 "--schema", ROOT / "data" / "diabetes.schema.json",
                 "--stats", stats_path, "--out", model_path,
                 "--split", "1", "--seed", "0", "--trees", "100", "--depth", "2")
    assert out["trees"] > 0
    test_norm = data.normalize_dataset(test, stats)
    return sch, test_norm, stats, model_path


def serve_args(model_path):
    return [NODE, str(BRIDGE), "serve", "--model", str(model_path)]


class TestProtocolConformance:
    def test_handshake_and_errors(self, diabetes_setup):
        sch, test_norm, stats, model_path = diabetes_setup
        with protocol.spawn(serve_args(model_path), timeout=20) as handle:
            assert handle.task == "classification"
            assert handle.n_features == 8
            assert handle.n_classes == 2

    def test_batch_consistent_with_singles(self, diabetes_setup):
        sch, test_norm, stats, model_path = diabetes_setup
        X = test_norm.rows[:50]
        with protocol.spawn(serve_args(model_path), timeout=20) as handle:
            batch = handle.predict_batch(X)
            singles = np.array([handle.predict(x) for x in X])
        assert np.array_equal(batch, singles)

    def test_bad_lines_do_not_kill_server(self, diabetes_setup):
        sch, test_norm, stats, model_path = diabetes_setup
        proc = subprocess.Popen(serve_args(model_path),
                                stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        try:
            msgs = [b"garbage\n",
                    b'{"type": "predict", "x": [0.5]}\n',
                    b'{"type": "info"}\n']
            for m in msgs:
                proc.stdin.write(m)
            proc.stdin.flush()
            replies = [json.loads(proc.stdout.readline()) for _ in range(3)]
            assert replies[0]["type"] == "error"
            assert replies[1]["type"] == "error"
            assert replies[2]["type"] == "info"
        finally:
            proc.stdin.close()
            proc.stdout.close()
            proc.wait(timeout=10)

    def test_tcp_mode(self, diabetes_setup):
        sch, test_norm, stats, model_path = diabetes_setup
        proc = subprocess.Popen([*serve_args(model_path), "--tcp", "0"],
                                stdout=subprocess.PIPE)
        try:
            port = json.loads(proc.stdout.readline())["listening"]
            with protocol.connect_tcp("127.0.0.1", port, timeout=10) as handle:
                assert handle.n_features == 8
                assert handle.predict(test_norm.rows[0]) in (0, 1)
        finally:
            proc.kill()
            proc.wait(timeout=10)


@pytest.mark.slow
@pytest.mark.acceptance
def test_secondary_acceptance(diabetes_setup, tmp_path):
    """Golden transcript stability (covered bitwise in the bridge's own
    suite), served AdaBoost accuracy over the wire, generation validity
    against the remote model, and figure rendering from report files."""
    t0 = time.time()
    sch, test_norm, stats, model_path = diabetes_setup

    # served accuracy on the primary's held-out split (no leakage: the
    # bridge trained on the primary's train rows only)
    with protocol.spawn(serve_args(model_path), timeout=20) as handle:
        acc = predictor.evaluate(handle, test_norm)
    assert acc >= 0.74, f"remote AdaBoost accuracy {acc}"

    # generation agent driven entirely through the protocol
    with protocol.spawn(serve_args(model_path), timeout=20) as handle:
        sub_train = data.Dataset(schema=test_norm.schema, rows=test_norm.rows,
                                 labels=test_norm.labels, normalized=True)
        cfg = agent.TrainConfig(per_sample_budget=250, epochs=80, hidden=(64, 64),
                                batch_size=64, target_sync=250, log_every=0,
                                lr_pi=1e-3, gamma=0.9, eps_end=0.1,
                                policy_reg=3e-2, replay_capacity=4096, seed=0)
        snap, _ = agent.train_global(sub_train, stats, handle, env.GoalSpec(),
                                     env.EnvConfig(lam=0.1, max_features=5), cfg)
        probe = test_norm.rows[:30]
        results = [agent.generate_cf(snap, x, handle, instance_id=str(i))
                   for i, x in enumerate(probe)]
    validity = metrics.validity(results)
    assert validity >= 0.6, f"validity over protocol {validity}"

    # plots from genuine report files produced by this run
    report = metrics.MetricsReport(results=results, config={"dataset": "diabetes"})
    json_path = tmp_path / "eval.json"
    csv_path = tmp_path / "eval.csv"
    metrics.write_report(report, json_path, "json")
    metrics.write_report(report, csv_path, "csv")
    sweep_path = tmp_path / "sweep_summary.json"
    sweep_path.write_text(json.dumps({"rows": [
        {"lam": 0.01, "validity": 1.0, "sparsity": 2.4},
        {"lam": 0.1, "validity": validity, "sparsity": metrics.sparsity_mean(results)},
        {"lam": 1.0, "validity": max(0.0, validity - 0.2), "sparsity": 1.1},
    ]}))
    fig1 = tmp_path / "tradeoff.svg"
    fig2 = tmp_path / "lambda.svg"
    out1 = bridge("plot", "--kind", "tradeoff", "--out", fig1, json_path, csv_path)
    out2 = bridge("plot", "--kind", "lambda", "--out", fig2, sweep_path)
    assert fig1.exists() and fig2.exists()
    svg = fig1.read_text()
    assert "<svg" in svg and "validity" in svg and "sparsity" in svg
    elapsed = time.time() - t0
    print(f"\nACCEPT secondary-bridge: PASS (remote acc {acc:.3f}, validity {validity:.2f}, "
          f"figures {out1['series']}+{out2['series']} series, {elapsed:.0f}s)")
