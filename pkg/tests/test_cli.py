import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dgp_pursuit.cli import EXIT_DIAGNOSTIC, EXIT_GENERATION, EXIT_INPUT, EXIT_OK, main

SHORT = {"duration": 0.5, "gp": {"budget": 40}}


def write_cfg(path, **extra):
    doc = {**SHORT, **extra}
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_cfg(root / "cfg.json")
    assert main(["gen-data", "--config", cfg, "--out", str(root / "data")]) == EXIT_OK
    assert main(["train", "--config", cfg, "--out", str(root / "hp"), "--data", str(root / "data")]) == EXIT_OK
    return root, cfg


def gp_args(root):
    return ["--data", str(root / "data"), "--hyperparams", str(root / "hp" / "hyperparams.json")]


def test_gen_data_outputs(pipeline):
    root, cfg = pipeline
    man = json.loads((root / "data" / "manifest.json").read_text())
    assert man["seed"] == 0 and man["noise_var"] == 0.01
    assert man["regions"]["boundaries_deg"] == [90.0, 210.0, 330.0]
    for i in range(3):
        rows = list(csv.reader(open(root / "data" / f"drone_{i}.csv")))
        assert rows[0] == ["px", "py", "pz", "theta", "y1", "y2", "y3", "y4"]
        assert len(rows) == 11


@pytest.mark.parametrize("gp", [{"noise_var": 0.0}, {}])
def test_gen_data_is_reproducible(tmp_path, gp):
    cfg = write_cfg(tmp_path / "c.json", gp=gp)
    for out in ("a", "b"):
        assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / out)]) == EXIT_OK
    for name in ("drone_0.csv", "drone_1.csv", "drone_2.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_data_empty_sector(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", target={"kind": "constant"}, gp={"dataset_duration": 1.0})
    assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "d")]) == EXIT_GENERATION
    assert "drone" in capsys.readouterr().err


def test_invalid_config_exit_2(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", mode="fast")
    assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "d")]) == EXIT_INPUT
    assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["simulate", "--config", cfg]) == EXIT_INPUT
    assert main(["explode"]) == EXIT_INPUT


def test_train_ascends_and_is_reproducible(pipeline, tmp_path):
    root, cfg = pipeline
    doc = json.loads((root / "hp" / "hyperparams.json").read_text())
    assert [d["drone"] for d in doc["drones"]] == [0, 1, 2]
    for d in doc["drones"]:
        for ch in d["channels"]:
            assert ch["lml"] >= ch["lml_initial"]
            assert len(ch["lengthscales"]) == 4 and ch["sigma_f"] > 0
    assert main(["train", "--config", cfg, "--out", str(tmp_path), "--data", str(root / "data")]) == EXIT_OK
    assert (tmp_path / "hyperparams.json").read_bytes() == (root / "hp" / "hyperparams.json").read_bytes()


def test_train_unreadable_dataset(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "drone_0.csv").write_text("garbage\n")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "hp"), "--data", str(tmp_path / "data")]) == EXIT_INPUT


def test_simulate_no_gp_needs_no_files(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", mode="no_gp")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")]) == EXIT_OK
    metrics = json.loads((tmp_path / "run" / "metrics.json").read_text())
    assert metrics["status"] == "ok" and metrics["squared_mean_e"] >= 0
    assert set(json.loads((tmp_path / "run" / "timings.json").read_text())) == {"fit_seconds", "sim_seconds"}


def test_simulate_missing_hyperparams(pipeline, tmp_path, capsys):
    root, cfg = pipeline
    args = ["simulate", "--config", cfg, "--out", str(tmp_path), "--mode", "local_gp", "--data", str(root / "data")]
    assert main(args) == EXIT_INPUT
    assert "hyperparameters" in capsys.readouterr().err
    assert main(args + ["--hyperparams", str(tmp_path / "none.json")]) == EXIT_INPUT


def test_simulate_distributed_is_byte_identical(pipeline, tmp_path):
    root, cfg = pipeline
    for out in ("a", "b"):
        args = ["simulate", "--config", cfg, "--out", str(tmp_path / out), "--dump-messages"] + gp_args(root)
        assert main(args) == EXIT_OK
    for name in ("trace.csv", "metrics.json", "messages.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    first = json.loads((tmp_path / "a" / "messages.jsonl").read_text().splitlines()[0])
    assert first["t"] == 0.0 and len(first["messages"]) == 3


def test_simulate_diagnostic_exit_4(tmp_path):
    cfg = write_cfg(
        tmp_path / "c.json",
        mode="no_gp",
        lost_grace=0.05,
        initial_errors=[{"g_e": {"p": [3, 0, 0]}}] * 3,
    )
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")]) == EXIT_DIAGNOSTIC
    assert json.loads((tmp_path / "run" / "metrics.json").read_text())["status"] == "target_lost"
    assert (tmp_path / "run" / "trace.csv").exists()


def test_compare_schema(pipeline, tmp_path):
    root, cfg = pipeline
    assert main(["compare", "--config", cfg, "--out", str(tmp_path)] + gp_args(root)) == EXIT_OK
    doc = json.loads((tmp_path / "comparison.json").read_text())
    assert sorted(doc) == ["metrics", "modes", "ordered", "ordering", "seed", "squared_mean_e"]
    assert doc["modes"] == ["no_gp", "local_gp", "distributed_gp"]
    assert sorted(doc["ordering"]) == sorted(doc["modes"])
    assert sorted(doc["metrics"]["no_gp"]) == [
        "message", "mode", "peak_e", "squared_mean_e", "status", "steps", "target_in_region", "visibility_losses",
    ]
    head = (tmp_path / "comparison.csv").read_text().splitlines()[0]
    assert head.startswith("mode_index,step,t,drone")


def test_compare_single_drone(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", graph={"n": 1})
    assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / "d")]) == EXIT_OK
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "h"), "--data", str(tmp_path / "d")]) == EXIT_OK
    args = ["--data", str(tmp_path / "d"), "--hyperparams", str(tmp_path / "h" / "hyperparams.json")]
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "c")] + args) == EXIT_OK
    sq = json.loads((tmp_path / "c" / "comparison.json").read_text())["squared_mean_e"]
    assert sq["distributed_gp"] == sq["local_gp"]


def test_bounds(pipeline, tmp_path):
    root, cfg = pipeline
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)] + gp_args(root)) == EXIT_OK
    doc = json.loads((tmp_path / "bounds.json").read_text())
    net = doc["network"]
    assert all(net[k] >= 0 for k in ("l_mu", "delta_bar", "gamma_sq_max"))
    assert doc["delta"] == 0.1
    for d in doc["drones"]:
        assert all(min(d[k]) >= 0 for k in ("gamma_sq", "beta", "delta_bar", "l_mu"))


def test_bounds_zero_outputs(pipeline, tmp_path):
    root, cfg = pipeline
    (tmp_path / "d").mkdir()
    for i in range(3):
        rows = (root / "data" / f"drone_{i}.csv").read_text().splitlines()
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        data[:, 4:] = 0.0
        body = "\n".join(",".join(repr(float(v)) for v in r) for r in data)
        (tmp_path / "d" / f"drone_{i}.csv").write_text(rows[0] + "\n" + body + "\n")
    args = ["--data", str(tmp_path / "d"), "--hyperparams", str(root / "hp" / "hyperparams.json")]
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path / "b")] + args) == EXIT_OK
    assert json.loads((tmp_path / "b" / "bounds.json").read_text())["network"]["l_mu"] == 0.0


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", mode="no_gp", duration=0.05)
    res = subprocess.run(
        [sys.executable, "-m", "dgp_pursuit", "simulate", "--config", cfg, "--out", str(tmp_path / "r")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0, res.stderr
    assert "squared_mean_e" in res.stdout
