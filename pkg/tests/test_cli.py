"""End-to-end CLI checks: subcommand plumbing, exit codes, output formats,
and byte-level reproducibility of re-runs."""

import json
import os

import numpy as np
import pytest

from hedgelab.cli import main

TINY = ["--paths", "32", "--steps", "4", "--seed", "11"]
TRAIN_TINY = ["--sample-size", "96", "--epochs", "1", "--batch-size", "32",
              "--steps", "3", "--net", "feedforward"]


def run(argv):
    return main(argv)


def read(path):
    with open(path) as f:
        return f.read()


def test_simulate_and_reproducibility(tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert run(["simulate", *TINY, "--out-dir", out1]) == 0
    assert run(["simulate", *TINY, "--out-dir", out2]) == 0
    body1 = read(os.path.join(out1, "scenarios.csv"))
    assert body1 == read(os.path.join(out2, "scenarios.csv"))
    assert body1.startswith("# hedgelab scenarios")
    assert "config_hash=" in body1


def test_hedge_outputs(tmp_path):
    out = str(tmp_path / "h")
    assert run(["hedge", "--strategy", "gamma", *TINY, "--out-dir", out]) == 0
    for name in ("schedule.csv", "pnl.csv", "summary.json"):
        assert os.path.exists(os.path.join(out, name))
    doc = json.loads(read(os.path.join(out, "summary.json")))
    assert doc["paths"] == 32
    assert np.isfinite(doc["loss_mean"])
    pnl = read(os.path.join(out, "pnl.csv")).splitlines()
    assert pnl[3] == "path_id,trading_gain,cost_total,pnl"
    assert len(pnl) == 4 + 32
    # rerun matches byte for byte
    out2 = str(tmp_path / "h2")
    assert run(["hedge", "--strategy", "gamma", *TINY, "--out-dir", out2]) == 0
    assert read(os.path.join(out, "pnl.csv")) == read(os.path.join(out2, "pnl.csv"))
    assert read(os.path.join(out, "schedule.csv")) == \
        read(os.path.join(out2, "schedule.csv"))


def test_hedge_rejects_deep_strategy(tmp_path):
    assert run(["hedge", "--strategy", "deep-2", "--out-dir", str(tmp_path)]) == 2


def test_degenerate_table_smoke(tmp_path):
    # 1 path, 1 step: the whole pipeline still produces finite cells
    out = str(tmp_path / "t")
    code = run(["table", "--paths", "1", "--steps", "1", "--seed", "3",
                "--strategies", "delta,gamma", "--out-dir", out])
    assert code == 0
    lines = read(os.path.join(out, "table.csv")).splitlines()
    assert lines[3] == "objective,strategy,cost_regime,loss,paths,eval_seed,status"
    cells = [l.split(",") for l in lines[4:]]
    assert len(cells) == 12  # 2 objectives x 2 strategies x 3 regimes
    for cell in cells:
        assert cell[-1] == "ok"
        assert np.isfinite(float(cell[3]))
    doc = json.loads(read(os.path.join(out, "table.json")))
    assert len(doc["cells"]) == 12


def test_table_common_random_numbers(tmp_path):
    # same objective cells share the evaluation sample: the delta cell of
    # each regime sees identical paths, so the no-cost loss repeats exactly
    out = str(tmp_path / "t")
    assert run(["table", "--paths", "64", "--steps", "8", "--seed", "5",
                "--strategies", "delta", "--regimes", "none,normal",
                "--objectives", "mean-abs", "--out-dir", out]) == 0
    doc = json.loads(read(os.path.join(out, "table.json")))
    seeds = {c["eval_seed"] for c in doc["cells"]}
    assert len(seeds) == 1


def test_table_deep_requires_policy_or_training(tmp_path):
    out = str(tmp_path / "t")
    code = run(["table", "--paths", "8", "--steps", "2", "--strategies", "deep-1",
                "--objectives", "mean-abs", "--regimes", "none",
                "--out-dir", out])
    assert code == 3  # cell failed, table still emitted
    doc = json.loads(read(os.path.join(out, "table.json")))
    assert doc["cells"][0]["status"] == "failed"


def test_table_trains_missing_deep_cell(tmp_path):
    out = str(tmp_path / "t")
    code = run(["table", "--paths", "16", *TRAIN_TINY, "--seed", "7",
                "--strategies", "deep-1", "--objectives", "mean-abs",
                "--regimes", "none", "--train-missing", "--out-dir", out])
    assert code == 0
    doc = json.loads(read(os.path.join(out, "table.json")))
    assert doc["cells"][0]["status"] == "ok"


def test_train_evaluate_trace_round_trip(tmp_path):
    out = str(tmp_path / "run")
    code = run(["train", "--strategy", "deep-2", *TRAIN_TINY, "--seed", "19",
                "--out-dir", out])
    assert code == 0
    ckpt = os.path.join(out, "checkpoint.json")
    assert os.path.exists(ckpt)
    telemetry = read(os.path.join(out, "telemetry.csv")).splitlines()
    assert telemetry[3] == "epoch,mean_loss,max_loss,wall_time"
    assert len(telemetry) == 4 + 1

    code = run(["evaluate", "--strategy", "deep-2", *TRAIN_TINY, "--seed", "19",
                "--paths", "24", "--checkpoint", ckpt, "--out-dir", out])
    assert code == 0
    doc = json.loads(read(os.path.join(out, "summary.json")))
    assert doc["paths"] == 24

    code = run(["trace", "--strategy", "deep-2", *TRAIN_TINY, "--seed", "19",
                "--checkpoint", ckpt, "--trace-seed", "99", "--out-dir", out])
    assert code == 0
    lines = read(os.path.join(out, "trace.csv")).splitlines()
    header = lines[3].split(",")
    assert header == ["source", "t", "S", "q1", "q2", "portfolio_delta",
                      "portfolio_gamma", "delta0", "gamma0", "cum_cost"]
    sources = {l.split(",")[0] for l in lines[4:]}
    assert sources == {"policy", "gamma-benchmark"}
    # 4 timepoints (steps 3) per source
    assert len(lines) == 4 + 2 * 4


def test_train_recurrent_variant(tmp_path):
    # the GRU path stays runnable end to end from the CLI
    out = str(tmp_path / "gru")
    code = run(["train", "--strategy", "deep-2", "--sample-size", "64",
                "--epochs", "1", "--batch-size", "32", "--steps", "3",
                "--net", "recurrent", "--cost-regime", "high", "--seed", "4",
                "--out-dir", out])
    assert code == 0
    ckpt = json.loads(read(os.path.join(out, "checkpoint.json")))
    assert ckpt["net"]["variant"] == "recurrent"
    assert "wxr" in ckpt["params"]


def test_evaluate_rejects_architecture_mismatch(tmp_path):
    out = str(tmp_path / "run")
    assert run(["train", "--strategy", "deep-1", *TRAIN_TINY, "--out-dir", out]) == 0
    code = run(["evaluate", "--strategy", "deep-2", *TRAIN_TINY,
                "--checkpoint", os.path.join(out, "checkpoint.json"),
                "--out-dir", out])
    assert code == 2


def test_surface_classical(tmp_path):
    out = str(tmp_path / "s")
    assert run(["surface", "--source", "gamma", "--times", "0.1,0.5",
                "--s-range", "0.6:1.4:17", "--steps", "4", "--out-dir", out]) == 0
    lines = read(os.path.join(out, "surface.csv")).splitlines()
    assert lines[3] == "t,S,portfolio_delta,portfolio_gamma,delta0,gamma0"
    rows = [list(map(float, l.split(","))) for l in lines[4:]]
    assert len(rows) == 2 * 17
    for row in rows:
        assert row[3] == pytest.approx(row[5], abs=1e-10)  # gamma neutral
        assert row[2] == pytest.approx(row[4], abs=1e-10)  # delta neutral
    out2 = str(tmp_path / "s2")
    assert run(["surface", "--source", "delta", "--times", "0.5",
                "--s-range", "0.6:1.4:9", "--steps", "4", "--out-dir", out2]) == 0
    rows = [list(map(float, l.split(",")))
            for l in read(os.path.join(out2, "surface.csv")).splitlines()[4:]]
    for row in rows:
        assert row[3] == 0.0  # zero-strike hedger carries no gamma


def test_surface_grid_bounds(tmp_path):
    assert run(["surface", "--source", "delta", "--times", "1.5",
                "--s-range", "0.6:1.4:5", "--out-dir", str(tmp_path)]) == 2
    assert run(["surface", "--source", "delta", "--times", "0.5",
                "--s-range", "0.0:1.4:5", "--out-dir", str(tmp_path)]) == 2


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"strategy": "delta", "steps": 4, "eval_paths": 16,
                               "seed": 2}))
    out = str(tmp_path / "o")
    assert run(["hedge", "--config", str(cfg), "--paths", "8", "--out-dir", out]) == 0
    doc = json.loads(read(os.path.join(out, "summary.json")))
    assert doc["paths"] == 8  # flag overrides the file


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["hedge", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"strateg": "delta"}))
    assert run(["hedge", "--config", str(unknown), "--out-dir", str(tmp_path)]) == 2
    assert run(["evaluate", "--strategy", "deep-1", "--checkpoint",
                str(tmp_path / "missing.json"), "--out-dir", str(tmp_path)]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_3(tmp_path):
    # an absurd learning rate explodes the parameters within the first epoch
    code = run(["train", "--strategy", "deep-1", "--sample-size", "64",
                "--epochs", "2", "--batch-size", "32", "--steps", "2",
                "--net", "feedforward", "--lr", "1e120",
                "--out-dir", str(tmp_path)])
    assert code == 3
