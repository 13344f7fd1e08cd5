import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from fnn_forge import cli
from fnn_forge.errors import NumericalError
from fnn_forge.experiments import RUN_CONFIG_SCHEMA, config_hash, prepare_data, resolve_config
from fnn_forge.metrics import REPORT_SCHEMA
from fnn_forge.timeseries import read_csv, write_csv

SMALL = {
    "dataset": {"builtin": "torus", "seed": 0, "n_points": 400},
    "model": {"epochs": 2, "batch_size": 64, "seeds": [0, 1]},
    "metrics": {"homology_points": 60},
}


def _config(tmp_path, cfg=SMALL, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _outputs(run_dir):
    m = json.loads((Path(run_dir) / "manifest.json").read_text())
    return m, {k: (Path(run_dir) / v).read_bytes() for k, v in m["outputs"].items()}


def test_simulate_is_byte_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["simulate", "torus", "--points", "300", "--seed", "4", "--out", str(out)]) == 0
    assert (a / "torus.csv").read_bytes() == (b / "torus.csv").read_bytes()
    traj = read_csv(a / "torus.csv")
    assert traj.values.shape == (300, 3)
    side = json.loads((a / "torus.json").read_text())
    assert side["seed"] == 4 and side["columns"] == 3
    m, _ = _outputs(a)
    assert m["status"] == 0 and m["command"] == "simulate"


def test_simulate_rejects_bad_param(tmp_path, capsys):
    code = cli.main(["simulate", "torus", "--param", "oops", "--out", str(tmp_path)])
    assert code == 2
    assert "key=value" in capsys.readouterr().err


def test_unknown_system_and_missing_command(capsys):
    assert cli.main(["simulate", "pendulum"]) == 2
    assert cli.main([]) == 2


def test_embed_writes_every_artifact_and_replays(tmp_path, capsys):
    run = tmp_path / "run"
    assert cli.main(["embed", "--config", _config(tmp_path), "--out", str(run)]) == 0
    for seed in (0, 1):
        sub = run / f"seed_{seed}"
        for name in ("embedding.csv", "truth.csv", "model.json", "history.json", "summary.json",
                     "latent_1_2.svg", "latent_1_3.svg"):
            assert (sub / name).exists(), name
        emb, truth = read_csv(sub / "embedding.csv"), read_csv(sub / "truth.csv")
        assert emb.values.shape[1] == 10 and len(emb) == len(truth)
        assert (sub / "latent_1_2.svg").read_text().startswith("<svg")
        assert len(json.loads((sub / "history.json").read_text())["history"]) == 2
    m, first = _outputs(run)
    assert m["config_hash"] == config_hash(m["config"])
    assert m["config"]["model"]["seeds"] == [0, 1]
    again = tmp_path / "again"
    assert cli.main(["replay", str(run / "manifest.json"), "--out", str(again)]) == 0
    m2, second = _outputs(again)
    assert first.keys() == second.keys()
    for key in first:
        assert first[key] == second[key], key


def test_cli_overrides_land_in_config(tmp_path, capsys):
    run = tmp_path / "run"
    code = cli.main(["embed", "--config", _config(tmp_path), "--seed", "3", "--lambda", "0.1",
                     "--epochs", "1", "--out", str(run)])
    assert code == 0
    m, _ = _outputs(run)
    assert m["config"]["model"]["seeds"] == [3]
    assert m["config"]["model"]["lambda"] == 0.1
    assert m["config"]["model"]["epochs"] == 1
    assert cli.main(["embed", "--config", _config(tmp_path), "--lambda", "0.1,0.2",
                     "--out", str(run)]) == 2


def test_unknown_config_key_is_usage_error(tmp_path, capsys):
    cfg = dict(SMALL, model=dict(SMALL["model"], dropout=0.1))
    assert cli.main(["embed", "--config", _config(tmp_path, cfg), "--out", str(tmp_path / "x")]) == 2
    assert "dropout" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["embed", "--config", str(tmp_path / "broken.json")]) == 2


def test_numerical_failure_exits_3_with_partial_history(tmp_path, monkeypatch, capsys):
    class _Stub:
        history = [{"epoch": 0, "recon": 1.0}]

    def boom(data, tcfg):
        if tcfg.seed == 1:
            err = NumericalError("loss is not finite", 1, 4)
            err.model = _Stub()
            raise err
        return real(data, tcfg)

    real = cli.fit_replicate
    monkeypatch.setattr(cli, "fit_replicate", boom)
    run = tmp_path / "run"
    assert cli.main(["embed", "--config", _config(tmp_path), "--out", str(run)]) == 3
    hist = json.loads((run / "seed_1" / "history.json").read_text())
    assert hist["epoch"] == 1 and hist["batch"] == 4 and hist["history"][0]["recon"] == 1.0
    assert (run / "seed_0" / "embedding.csv").exists()
    assert json.loads((run / "manifest.json").read_text())["status"] == 3


@pytest.mark.parametrize("method", ["etd", "tica", "lagged"])
def test_baselines_and_compare(tmp_path, method, capsys):
    base = tmp_path / method
    extra = ["--d", "4", "--tau", "3"] if method == "lagged" else []
    assert cli.main(["baseline", method, "--config", _config(tmp_path), "--out", str(base), *extra]) == 0
    emb = read_csv(base / "embedding.csv")
    truth = read_csv(base / "truth.csv")
    assert len(emb) == len(truth)
    assert emb.values.shape[1] == (4 if method == "lagged" else 10)
    cmp_dir = tmp_path / f"cmp_{method}"
    code = cli.main(["compare", str(base / "embedding.csv"), "--truth", str(base / "truth.csv"),
                     "--tau", "0,5", "--out", str(cmp_dir)])
    assert code == 0
    report = json.loads((cmp_dir / "report.json").read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert all(np.isfinite(v) for v in report["scores"].values() if not isinstance(v, dict))


def test_compare_truth_with_itself_and_replicates(tmp_path, capsys):
    pts = np.random.default_rng(0).normal(size=(300, 3))
    truth = tmp_path / "truth.csv"
    write_csv(truth, pts, ["a", "b", "c"])
    out = tmp_path / "self"
    assert cli.main(["compare", str(truth), "--truth", str(truth), "--out", str(out)]) == 0
    scores = json.loads((out / "report.json").read_text())["scores"]
    assert scores["s_proc"] == pytest.approx(1.0) and scores["s_nn"] == pytest.approx(1.0)
    noisy = tmp_path / "noisy.csv"
    write_csv(noisy, pts + 0.1 * np.random.default_rng(1).normal(size=pts.shape), ["a", "b", "c"])
    rep = tmp_path / "rep"
    assert cli.main(["compare", str(truth), str(noisy), "--truth", str(truth), "--out", str(rep)]) == 0
    doc = json.loads((rep / "report.json").read_text())
    assert len(doc["replicates"]) == 2 and "stderr" in doc["summary"]["s_proc"]
    header = (rep / "table.csv").read_text().splitlines()[0]
    assert header == "score,mean,stderr"


def test_compare_row_mismatch_is_usage_error(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(a, np.zeros((10, 2)), ["x", "y"])
    write_csv(b, np.ones((11, 2)), ["x", "y"])
    assert cli.main(["compare", str(a), "--truth", str(b), "--out", str(tmp_path / "o")]) == 2
    assert "rows" in capsys.readouterr().err


def test_sweep_lambda_small_grid_replays(tmp_path, capsys):
    cfg = dict(SMALL, model=dict(SMALL["model"], epochs=1, seeds=[0]))
    run = tmp_path / "sweep"
    assert cli.main(["sweep-lambda", "--config", _config(tmp_path, cfg), "--lambda", "0,0.1,1",
                     "--out", str(run)]) == 0
    rows = (run / "summary.csv").read_text().splitlines()
    assert len(rows) == 4
    _, first = _outputs(run)
    assert cli.main(["replay", str(run / "manifest.json"), "--out", str(tmp_path / "r")]) == 0
    _, second = _outputs(tmp_path / "r")
    assert first == second


def test_replay_rejects_bad_manifest(tmp_path, capsys):
    bad = tmp_path / "m.json"
    bad.write_text(json.dumps({"command": "format-disk"}))
    assert cli.main(["replay", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["replay", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_schema_command(capsys):
    assert cli.main(["schema", "config"]) == 0
    assert json.loads(capsys.readouterr().out) == json.loads(json.dumps(RUN_CONFIG_SCHEMA))
    assert cli.main(["schema", "report"]) == 0
    assert json.loads(capsys.readouterr().out)["required"] == ["scores", "diagnostics", "params"]


def test_csv_dataset_config(tmp_path, capsys):
    t = np.arange(3000) * 0.05
    write_csv(tmp_path / "series.csv", np.c_[np.sin(t), np.cos(1.3 * t)], ["a", "b"])
    cfg = {"dataset": {"csv": str(tmp_path / "series.csv"), "column": 1, "segment_len": 800, "gap": 100},
           "model": {"epochs": 1, "batch_size": 64}}
    run = tmp_path / "csvrun"
    assert cli.main(["embed", "--config", _config(tmp_path, cfg), "--out", str(run)]) == 0
    truth = read_csv(run / "seed_0" / "truth.csv")
    assert truth.values.shape == (791, 2)


def test_simulate_ecosystem_with_shortened_protocol(tmp_path, capsys):
    out = tmp_path / "eco"
    code = cli.main(["simulate", "ecosystem", "--points", "300", "--param", "duration=2000",
                     "--param", "transient_time=1000", "--out", str(out)])
    assert code == 0
    vals = read_csv(out / "ecosystem.csv").values
    assert vals.shape == (300, 10) and np.all(vals > 0)
    side = json.loads((out / "ecosystem.json").read_text())
    assert side["columns"] == 10


def test_truth_rows_pair_with_the_last_sample_they_see(tmp_path, capsys):
    data = prepare_data(resolve_config(SMALL))
    T = data.test.rows.shape[1]
    # the last Hankel column and the truth row refer to the same sample
    np.testing.assert_allclose(data.test.rows[:, -1], data.test_series[T - 1:])
    np.testing.assert_array_equal(data.truth.points, data.states[T - 1:])
    out = tmp_path / "lag"
    assert cli.main(["baseline", "lagged", "--config", _config(tmp_path), "--d", "3", "--tau", "4",
                     "--out", str(out)]) == 0
    emb, truth = read_csv(out / "embedding.csv").values, read_csv(out / "truth.csv").values
    np.testing.assert_array_equal(truth, data.states[8:8 + len(emb)])
