import json
import os

import numpy as np
import pytest

from conftest import simulate_regression
from ironq.cli import main


@pytest.fixture
def data_csv(tmp_path):
    y, X = simulate_regression(60, "normal", tau=0.5, lam=0.5, seed=41)
    path = tmp_path / "data.csv"
    rows = ["y,x1,x2"] + [f"{a!r},{b!r},{c!r}" for a, b, c in zip(y.tolist(), X[:, 1].tolist(), X[:, 2].tolist())]
    path.write_text("\n".join(rows) + "\n")
    return path


def run(*argv):
    return main([str(a) for a in argv])


def data_args(path):
    return ["--data", path, "--response", "y", "--covariates", "x1,x2"]


def outputs(d):
    return {f: (d / f).read_bytes() for f in sorted(os.listdir(d)) if f != "manifest.json"}


def test_fit_converges(tmp_path, data_csv):
    out = tmp_path / "fit"
    assert run("fit", *data_args(data_csv), "--tau", 0.5, "--out-dir", out) == 0
    d = json.loads((out / "fit.json").read_text())
    assert d["converged"] and d["schema_version"] == 1
    m = json.loads((out / "manifest.json").read_text())
    assert m["command"] == "fit" and m["exit_code"] == 0
    assert list(m["inputs"].values())[0] and m["version"]


def test_nonconvergence_exit_code(tmp_path, data_csv):
    assert run("fit", *data_args(data_csv), "--max-iter", 1, "--out-dir", tmp_path) == 2


@pytest.mark.parametrize("bad", [["--kernel", "gumbel"], ["--link", "logit"], ["--tau", "1.2"], ["--tau", "0"]])
def test_usage_errors(tmp_path, data_csv, bad):
    with pytest.raises(SystemExit) as exc:
        run("fit", *data_args(data_csv), *bad, "--out-dir", tmp_path)
    assert exc.value.code == 1


def test_data_errors_exit_1(tmp_path, data_csv):
    assert run("fit", "--data", data_csv, "--response", "nope", "--out-dir", tmp_path) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("y,x1\n1,2\n0,3\n2,2\n")
    assert run("fit", "--data", bad, "--response", "y", "--out-dir", tmp_path) == 1


def test_compare_flags_one_minimum_per_tau(tmp_path, data_csv):
    out = tmp_path / "cmp"
    assert run("compare", *data_args(data_csv), "--out-dir", out) == 0
    rows = json.loads((out / "compare.json").read_text())["rows"]
    assert len(rows) == 8
    for tau in (0.4, 0.5):
        block = [r for r in rows if r["tau"] == tau]
        assert sum(r["min_aic"] for r in block) == 1
        assert sum(r["min_bic"] for r in block) == 1
        best = min((r for r in block if r["converged"]), key=lambda r: r["aic"])
        assert best["min_aic"]


def test_sample_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("sample", "--n", 5, "--beta", 2, "--lam", 0.5, "--seed", 7, "--out-dir", d) == 0
    assert (a / "sample.csv").read_bytes() == (b / "sample.csv").read_bytes()
    assert len((a / "sample.csv").read_text().splitlines()) == 6


def test_describe(tmp_path, data_csv):
    out = tmp_path / "desc"
    assert run("describe", *data_args(data_csv), "--out-dir", out) == 0
    cols = json.loads((out / "describe.json").read_text())["columns"]
    assert set(cols) == {"y", "x1", "x2"} and cols["y"]["n"] == 60


def test_dropped_rows_recorded(tmp_path, data_csv):
    text = data_csv.read_text().splitlines()
    text[3] = text[3].rsplit(",", 1)[0] + ","
    holey = tmp_path / "holey.csv"
    holey.write_text("\n".join(text) + "\n")
    out = tmp_path / "h"
    assert run("describe", *data_args(holey), "--out-dir", out) == 0
    assert json.loads((out / "manifest.json").read_text())["rows_dropped"] == 1


def test_config_defaults(tmp_path, data_csv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": str(data_csv), "response": "y", "covariates": "x1,x2",
                               "tau": 0.3, "kernel": "logistic"}))
    out = tmp_path / "c"
    assert run("fit", "--config", cfg, "--out-dir", out) == 0
    d = json.loads((out / "fit.json").read_text())
    assert d["tau"] == 0.3 and d["kernel"] == "logistic"
    # command-line flags win over the file
    assert run("fit", "--config", cfg, "--tau", 0.6, "--out-dir", out) == 0
    assert json.loads((out / "fit.json").read_text())["tau"] == 0.6
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run("fit", *data_args(data_csv), "--config", cfg, "--out-dir", out) == 1


def test_diagnose_round_trip_matches_in_process(tmp_path, data_csv):
    fit_dir, a, b = tmp_path / "f", tmp_path / "a", tmp_path / "b"
    assert run("fit", *data_args(data_csv), "--out-dir", fit_dir) == 0
    common = [*data_args(data_csv), "--envelope", 20, "--seed", 3]
    assert run("diagnose", *common, "--out-dir", a) == 0
    assert run("diagnose", *common, "--fit-json", fit_dir / "fit.json", "--out-dir", b) == 0
    assert outputs(a) == outputs(b)
    assert {"diagnostics.json", "diagnostics.csv", "envelope.csv"} <= set(outputs(a))


def test_simulate(tmp_path):
    scen = tmp_path / "s.json"
    scen.write_text(json.dumps({"mode": "bias_rmse", "sample_sizes": [30], "replicates": 3}))
    out = tmp_path / "sim"
    assert run("simulate", "--config", scen, "--seed", 4, "--out-dir", out) == 0
    assert json.loads((out / "study.json").read_text())["config"]["seed"] == 4
    assert (out / "study.csv").read_text().startswith("scenario,n,tau,kernel,parameter")
    assert run("simulate", "--out-dir", out) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["fit", "--tau", "0.4", "--kernel", "t"],
        ["compare", "--kernels", "normal,logistic", "--taus", "0.5"],
        ["describe"],
        ["diagnose", "--envelope", "20", "--no-exact"],
        ["sample", "--n", "20", "--beta", "1", "--lam", "1", "--kernel", "ep:0.8"],
        ["simulate"],
    ],
    ids=lambda a: a[0],
)
def test_rerun_from_manifest_is_byte_identical(tmp_path, data_csv, argv):
    first = tmp_path / "first"
    extra = []
    if argv[0] == "simulate":
        scen = tmp_path / "s.json"
        scen.write_text(json.dumps({"mode": "model_selection", "kernels": ["normal", "logistic"],
                                    "sample_sizes": [40], "replicates": 2, "lam": 0.5,
                                    "gamma": [2.0, 1.5, -0.5], "tau_grid": [0.5]}))
        extra = ["--config", scen]
    elif argv[0] != "sample":
        extra = data_args(data_csv)
    assert run(*argv, *extra, "--out-dir", first) == 0
    second = tmp_path / "second"
    assert run("rerun", first / "manifest.json", "--out-dir", second) == 0
    assert outputs(first) == outputs(second) and outputs(first)


def test_rerun_detects_changed_input(tmp_path, data_csv):
    out = tmp_path / "o"
    assert run("describe", *data_args(data_csv), "--out-dir", out) == 0
    data_csv.write_text(data_csv.read_text() + "1.0,0.5,0.5\n")
    assert run("rerun", out / "manifest.json", "--out-dir", tmp_path / "r") == 1
