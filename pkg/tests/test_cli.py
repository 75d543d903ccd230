import csv
import io
import os

import pytest

from gprice.cli import run

BASE = """
[uncertainty]
lower_variance = 0.04
upper_variance = 0.09
[times]
monitoring = 1.0
"""


@pytest.fixture
def cfg_file(tmp_path):
    def make(body):
        path = tmp_path / "run.ini"
        path.write_text(BASE + body, encoding="utf-8")
        return str(path)
    return make


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def call(args, capsys):
    code = run(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_expect_square(cfg_file, capsys):
    code, out, _ = call(["expect", "--config", cfg_file("[payoff]\nexpression = B1*B1\n")], capsys)
    assert code == 0
    (row,) = rows(out)
    assert float(row["value"]) == pytest.approx(0.09, abs=1e-3)
    assert row["mode"] == "upper" and row["grid"] == "[-1.8,1.8]x401"
    assert "n_points=401" in row["defaults"]
    assert out.endswith("\n") and "\r" not in out


def test_seventeen_digits(cfg_file, capsys):
    _, out, _ = call(["expect", "--config", cfg_file("[payoff]\nexpression = B1*B1\n")], capsys)
    value = rows(out)[0]["value"]
    assert float(value) == float(format(float(value), ".17g"))
    assert len(value.replace("0.", "").lstrip("0")) >= 15


@pytest.mark.parametrize("method", ["lattice", "mc"])
def test_expect_methods(cfg_file, capsys, method):
    code, out, _ = call(["expect", "--config", cfg_file("[payoff]\nexpression = B1*B1\n"),
                         "--method", method, "--seed", "3"], capsys)
    assert code == 0
    first = rows(out)[0]
    assert float(first["value"]) == pytest.approx(0.09, abs=5e-3)
    assert first["seed"] == "3"


def test_bid_exponential(cfg_file, capsys):
    body = "[payoff]\nexpression = B1\n[utility]\nkind = exponential\nalpha = 1\n"
    code, out, _ = call(["bid", "--config", cfg_file(body)], capsys)
    assert code == 0
    assert float(rows(out)[0]["value"]) == pytest.approx(0.045, abs=1e-3)


def test_cond_expect_grid_rows(tmp_path, capsys):
    path = tmp_path / "cond.ini"
    path.write_text(BASE.replace("monitoring = 1.0", "monitoring = 0.5, 1.0\nconditioning = 0.5")
                    + "[payoff]\nexpression = B2*B2\n[grid]\nn_points = 41\n")
    path = str(path)
    code, out, _ = call(["cond-expect", "--config", path], capsys)
    assert code == 0
    table = rows(out)
    assert len(table) == 41 and set(table[0]) >= {"x1", "value"}
    mid = table[20]
    assert float(mid["x1"]) == pytest.approx(0.0, abs=1e-12)
    assert float(mid["value"]) == pytest.approx(0.045, abs=1e-3)


def test_premium_and_compare(cfg_file, capsys):
    body = ("[payoff]\nexpression = B1\nsuite = B1; pos(B1 - 0.1); -B1*B1\n"
            "[utility]\nkind = exponential\n"
            "[compare]\nlower_variance = 0.06\nupper_variance = 0.07\n"
            "bid_order = ge\nask_order = le\n")
    code, out, _ = call(["premium", "--config", cfg_file(body)], capsys)
    assert code == 0
    vals = {r["name"]: float(r["value"]) for r in rows(out)}
    assert vals["premium_exact"] == pytest.approx(0.045, abs=1e-3)
    assert vals["premium_pratt"] == pytest.approx(0.045)
    code, out, _ = call(["compare", "--config", cfg_file(body)], capsys)
    vals = {r["name"]: float(r["value"]) for r in rows(out)}
    assert vals["bid_ge_violation"] == 0.0 and vals["ask_le_violation"] == 0.0
    assert len(vals) == 3 * 4 + 2


def test_sweep(cfg_file, capsys):
    body = ("[payoff]\nexpression = B1*B1\n"
            "[sweep]\nparameter = uncertainty.upper_variance\nvalues = 0.05, 0.16\n")
    code, out, _ = call(["sweep", "--config", cfg_file(body)], capsys)
    assert code == 0
    table = rows(out)
    assert [float(r["value"]) for r in table] == pytest.approx([0.05, 0.16], abs=1e-3)


def test_config_error_exit_code(cfg_file, capsys):
    code, out, err = call(["expect", "--config", cfg_file("[payoff]\nexpression = B3\n")], capsys)
    assert code == 2 and out == ""
    assert err.count("\n") == 1 and "B3" in err


def test_numerical_error_exit_code(cfg_file, capsys):
    body = "[payoff]\nexpression = B1\n[utility]\nkind = log\n"
    code, out, err = call(["ce", "--config", cfg_file(body)], capsys)
    assert code == 3 and out == ""
    assert "undefined at x=" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = call(["expect", "--config", str(tmp_path / "nope.ini")], capsys)
    assert code == 2 and "cannot read config" in err


def test_failed_run_leaves_no_output_file(cfg_file, capsys, tmp_path):
    out_path = tmp_path / "out.csv"
    body = "[payoff]\nexpression = log(B1)\n"
    code, _, _ = call(["expect", "--config", cfg_file(body), "--out", str(out_path)], capsys)
    assert code == 3
    assert not out_path.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["run.ini"]


def test_out_file_written_atomically(cfg_file, capsys, tmp_path):
    out_path = tmp_path / "out.csv"
    out_path.write_text("old")
    code, out, _ = call(["expect", "--config", cfg_file("[payoff]\nexpression = B1\n"),
                         "--out", str(out_path)], capsys)
    assert code == 0 and out == ""
    assert out_path.read_text().startswith("name,value,")
    assert sorted(os.listdir(tmp_path)) == ["out.csv", "run.ini"]
