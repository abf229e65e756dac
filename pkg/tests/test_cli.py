import csv
import json

import numpy as np
import pytest

from pauc_dro import cli
from pauc_dro import losses as L
from pauc_dro.data import SynthSpec, generate, write_csv

FAST = ["--set", "n=200", "--set", "batch_pos=8", "--set", "batch_neg=16"]


def run(*args):
    return cli.main([str(a) for a in args])


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_train_one_epoch_writes_one_row(tmp_path):
    assert run("train", "--out", tmp_path, "--set", "epochs=1", *FAST) == 0
    assert len(rows(tmp_path / "trace.csv")) == 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["schema_version"] == cli.SCHEMA_VERSION
    for key in ("train_opauc_0.3", "train_opauc_0.5", "train_tpauc_0.6_0.4", "train_tpauc_0.5_0.5"):
        assert 0.0 <= summary["final"][key] <= 1.0


def test_train_is_idempotent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("train", "--out", out, "--seed", 3, "--set", "epochs=2", "--set", "val_frac=0.25", *FAST) == 0
    for name in ("trace.csv", "summary.json", "model.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "val_opauc_0.3" in rows(a / "trace.csv")[0]


def test_config_file_and_override_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\noptimizer = sota_s\nepochs=3\nlam=0.5\n")
    out = tmp_path / "o"
    assert run("train", "--config", cfg, "--out", out, "--set", "epochs=1", *FAST) == 0
    s = json.loads((out / "summary.json").read_text())
    assert (s["optimizer"], s["epochs"], s["config"]["lam"]) == ("sota_s", 1, 0.5)


@pytest.mark.parametrize("bad", [["--set", "eta1=-1"], ["--set", "bogus=1"], ["--set", "optimizer=adam"],
                                 ["--set", "epochs=x"], ["--set", "data=/nonexistent.csv"], ["--set", "gamma0=2"],
                                 ["--set", "noequals"], ["--config", "/nonexistent.cfg"]])
def test_validation_errors_exit_1_before_compute(tmp_path, bad, monkeypatch, capsys):
    def boom(*a, **k):
        raise AssertionError("data generated before validation")

    monkeypatch.setattr(cli, "generate", boom)
    assert run("train", "--out", tmp_path / "o", *bad) == 1
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_numerical_failure_exit_2(tmp_path, capsys):
    with np.errstate(all="ignore"):
        code = run("train", "--out", tmp_path, "--set", "optimizer=sopa_s", "--set", "lam=1e-9",
                   "--set", "epochs=1", *FAST)
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


def test_csv_data_and_eval(tmp_path):
    data = generate(SynthSpec(n=120, d=3, seed=2))
    write_csv(data, tmp_path / "d.csv")
    out = tmp_path / "t"
    assert run("train", "--out", out, "--set", f"data={tmp_path / 'd.csv'}", "--set", "epochs=2",
               "--set", "batch_pos=4", "--set", "batch_neg=8") == 0
    ev = tmp_path / "e"
    assert run("eval", "--out", ev, "--set", f"data={tmp_path / 'd.csv'}",
               "--set", f"model_path={out / 'model.json'}") == 0
    trained = json.loads((out / "summary.json").read_text())["final"]
    metrics = json.loads((ev / "summary.json").read_text())["metrics"]
    assert metrics["train_opauc_0.3"] == trained["train_opauc_0.3"]
    assert run("eval", "--out", ev, "--set", "model_path=missing.json") == 1


def test_re_curve_outputs(tmp_path):
    out = tmp_path / "re"
    assert run("re-curve", "--out", out, "--set", "preset=overlap", "--set", "n=300", "--set", "draws=5",
               "--set", "arch=mlp_sigmoid", "--set", "hidden=4", "--set", "lambdas=0.1,1") == 0
    table = rows(out / "re_curve.csv")
    assert [(r["beta"], r["lambda"]) for r in table] == [("0.3", "0.1"), ("0.3", "1.0"), ("0.5", "0.1"),
                                                         ("0.5", "1.0")]
    assert all(float(r["mean_re"]) >= 0 for r in table)


def test_re_curve_empty_grid(tmp_path):
    assert run("re-curve", "--out", tmp_path, "--set", "lambdas=") == 1


def test_re_curve_constant_model_is_exact():
    from pauc_dro.acceptance import re_curve
    from pauc_dro.model import ScoreModel

    data = generate(SynthSpec(n=100, d=3, preset="overlap", seed=0))
    model = ScoreModel("linear_sigmoid", 3, np.zeros(3))
    for beta in (0.3, 0.5):
        cv = L.opauc_cvar_min(model, data, L.PairwiseLossSpec(), beta)[0]
        for lam in (0.05, 1.0, 10.0):
            kl = L.opauc_kl_objective_and_grad(model, data, L.PairwiseLossSpec(), lam)[0]
            assert abs(kl - cv) / cv == pytest.approx(0.0, abs=1e-12)
    rows_, skipped = re_curve(data, draws=3, hidden=2)
    assert skipped == 0 and len(rows_) == 12


def test_sweep_single_point_matches_train(tmp_path):
    args = ["--set", "epochs=2", "--set", "val_frac=0.25", *FAST]
    assert run("train", "--out", tmp_path / "t", *args) == 0
    assert run("sweep", "--out", tmp_path / "s", "--set", "grid.lam=1.0", *args) == 0
    for name in ("trace.csv", "model.json"):
        assert (tmp_path / "t" / name).read_bytes() == (tmp_path / "s" / "run_000" / name).read_bytes()


def test_sweep_ranking_deterministic(tmp_path):
    args = ["--set", "optimizer=sota_s", "--set", "epochs=2", "--set", "val_frac=0.25",
            "--set", "grid.lam=0.1,1,10", "--set", "target=val_tpauc_0.5_0.5", *FAST]
    assert run("sweep", "--out", tmp_path / "a", *args) == 0
    assert run("sweep", "--out", tmp_path / "b", "--set", "workers=3", *args) == 0
    ra, rb = rows(tmp_path / "a" / "sweep.csv"), rows(tmp_path / "b" / "sweep.csv")
    assert len(ra) == 3 and ra == rb
    scores = [float(r["val_tpauc_0.5_0.5"]) for r in ra]
    assert scores == sorted(scores, reverse=True)
    default = next(r for r in ra if float(r["lam"]) == 1.0)
    assert scores[0] >= float(default["val_tpauc_0.5_0.5"])


def test_sweep_errors(tmp_path):
    assert run("sweep", "--out", tmp_path / "a", *FAST) == 1
    assert run("sweep", "--out", tmp_path / "b", "--set", "grid.gamma0=0.5,3", *FAST) == 1
    assert run("sweep", "--out", tmp_path / "c", "--set", "grid.lam=1", *FAST) == 1  # val target, no val split


def test_selftest_subset_and_seed(capsys):
    assert run("selftest", "--set", "items=1,2,8") == 0
    out_a = capsys.readouterr().out
    assert run("selftest", "--seed", 5, "--set", "items=1,2,8") == 0
    out_b = capsys.readouterr().out
    assert out_a.count("[PASS]") == out_b.count("[PASS]") == 3
    assert run("selftest", "--set", "items=12") == 1


def test_selftest_catches_gradient_sign_flip(monkeypatch, capsys):
    real = L.opauc_kl_objective_and_grad

    def flipped(*a, **k):
        v, g = real(*a, **k)
        return v, -g

    monkeypatch.setattr(L, "opauc_kl_objective_and_grad", flipped)
    assert run("selftest", "--set", "items=3") == 1
    assert "[FAIL] 3." in capsys.readouterr().out


def test_selftest_all_items_pass(capsys):
    assert run("selftest") == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 9
