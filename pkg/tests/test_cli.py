import json
import subprocess
import sys

import numpy as np
import pytest

from pseudonet.cli import main
from pseudonet.portfolio import prices_from_returns, write_price_csv


def write_data(path, X):
    with open(path, "w") as fh:
        fh.write(",".join(f"x{j}" for j in range(X.shape[1])) + "\n")
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return str(path)


@pytest.fixture
def data(tmp_path, rng):
    return write_data(tmp_path / "data.csv", rng.standard_normal((30, 5)))


def read_matrix(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def test_estimate_diagonal_at_large_lambda(tmp_path, rng):
    X = rng.standard_normal((40, 2)) * [1.0, 2.0]
    src = write_data(tmp_path / "toy.csv", X)
    out = tmp_path / "out"
    assert main(["estimate", src, "--lambda1", "1e6", "--lambda2", "0.5", "--out-dir", str(out)]) == 0
    om = read_matrix(out / "omega.csv")
    assert om[0, 1] == 0.0 and om[1, 0] == 0.0
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / 40
    np.testing.assert_allclose(np.diag(om), 1 / np.sqrt(40 * np.diag(S) + 0.5), rtol=1e-6)
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["nnz"] == 0 and diag["converged"]


def test_estimate_rerun_byte_identical(tmp_path, data):
    for tag in "ab":
        assert main(["estimate", data, "--lambda1", "2", "--trace", "--out-dir", str(tmp_path / tag)]) == 0
    for name in ("omega.csv", "diagnostics.json", "trace.csv", "omega_support.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_malformed_csv_names_location(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,x\n")
    assert main(["estimate", str(bad), "--lambda1", "1", "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "row 3" in err and "column 2" in err


def test_usage_errors_listed_together(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("lambda2: -1\nbogus: 3\nepsilon: zero\n")
    code = main(["estimate", "--config", str(cfg), "--out-dir", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    for needle in ("bogus", "lambda2", "epsilon", "data", "lambda1"):
        assert needle in err


def test_bad_flag_exits_one():
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--no-such-flag"])
    assert exc.value.code == 1


def test_numerical_failure_exit_three(tmp_path, rng):
    X = rng.standard_normal((20, 3))
    X[:, 1] = 4.0
    assert main(["diag", write_data(tmp_path / "z.csv", X), "--out-dir", str(tmp_path)]) == 3


def test_path_one_cell(tmp_path, data):
    grid = tmp_path / "grid.yaml"
    grid.write_text("lambda1_seq: [1.5]\nlambda2_seq: [0.5]\n")
    assert main(["path", data, "--grid", str(grid), "--out-dir", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "path.csv").read_text().splitlines()
    assert len(lines) == 2
    assert float(lines[1].split(",")[3]) == 0.0
    assert len(list((tmp_path / "o" / "estimates").iterdir())) == 1


@pytest.mark.parametrize("folds", ["0", "3"])
def test_select(tmp_path, data, folds):
    out = tmp_path / "sel"
    assert main(["select", data, "--folds", folds, "--out-dir", str(out)]) == 0
    sel = json.loads((out / "selection.json").read_text())
    assert sel["folds"] == int(folds)
    assert read_matrix(out / "omega.csv").shape == (5, 5)


def test_simulate_rerun_identical(tmp_path):
    cfg = tmp_path / "sim.yaml"
    cfg.write_text("p: 10\nn_list: [8]\ntrials: 2\nsparsity: 0.2\nn_lambda1: 3\nlambda2_seq: [1.0]\nseed: 3\n")
    for tag in "ab":
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / tag)]) == 0
    for name in ("study.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len((tmp_path / "a" / "study.csv").read_text().splitlines()) == 5


def test_diag_identity_data(tmp_path, rng):
    X = rng.standard_normal((50, 3))
    out = tmp_path / "d"
    assert main(["diag", write_data(tmp_path / "i.csv", X), "--lambda1", "100", "--out-dir", str(out)]) == 0
    rows = [l.split(",") for l in (out / "diag.csv").read_text().splitlines()[1:]]
    Xc = X - X.mean(axis=0)
    want = 1 / (Xc ** 2).mean(axis=0)
    np.testing.assert_allclose([float(r[1]) for r in rows], want, rtol=1e-12)
    assert all(r[2] == "0" for r in rows)


def test_backtest(tmp_path, rng):
    prices = prices_from_returns(rng.normal(0, 0.01, (80, 3)))
    write_price_csv(tmp_path / "p.csv", prices)
    out = tmp_path / "bt"
    args = ["backtest", str(tmp_path / "p.csv"), "--horizon", "40", "--folds", "4", "--strategy", "sample", "--cost-model", "default", "--out-dir", str(out)]
    assert main(args) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["periods"] == 2
    assert main(args[:2] + ["--horizon", "100", "--out-dir", str(out)]) == 2


def test_console_entry_point(tmp_path, data):
    res = subprocess.run([sys.executable, "-m", "pseudonet.cli", "estimate", data, "--lambda1", "1", "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
