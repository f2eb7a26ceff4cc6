"""Tests for the command-line front end and its exit codes."""
import csv
import json

import pytest

from src.cli import EXIT_CONFIG, EXIT_NO_INPUT, EXIT_USAGE, main
from src.config import Config


@pytest.fixture(autouse=True)
def fresh_config():
    Config.reset()
    yield
    Config.reset()


def _value_after(text: str, marker: str) -> float:
    return float(text.split(marker, 1)[1].split()[0].rstrip(","))


def test_kconst(capsys, tmp_path):
    out = tmp_path / "k.csv"
    assert main(["kconst", "--q", "2", "--dim", "2", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "K(2,2)" in printed
    assert _value_after(printed, "closed form:") == pytest.approx(3.141592653589793)
    with open(out, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert float(rows[0]["quadrature"]) == pytest.approx(3.141592653589793, abs=1e-8)
    assert float(rows[0]["trapezoid"]) == pytest.approx(3.141592653589793, abs=1e-12)


def test_kconst_needs_q(capsys):
    assert main(["kconst"]) == EXIT_USAGE
    assert "--q is required" in capsys.readouterr().err


def test_norm_of_hat(capsys):
    code = main(["norm", "--function", "hat", "--points", "401",
                 "--space", '{"space": "lebesgue", "p": 1}'])
    assert code == 0
    assert _value_after(capsys.readouterr().out, "norm:") == pytest.approx(1.0, rel=1e-4)


def test_norm_json_output(tmp_path):
    out = tmp_path / "norm.json"
    assert main(["norm", "--points", "201", "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text(encoding="utf-8"))
    assert rows[0]["space"] == "lebesgue(p=1.0)"
    assert rows[0]["norm"] > 0


@pytest.mark.parametrize("argv", [
    ["norm", "--function", "wavelet"],
    ["norm", "--space", '{"space": "besov"}'],
    ["norm", "--space", "{broken"],
    ["norm", "--lo", "1", "--hi", "0"],
    ["norm", "--threads", "0"],
    ["norm", "--bogus"],
    ["strong", "--points", "65", "--s", "0"],
    ["bsvy-scan", "--points", "65", "--lambda-min", "1"],
    [],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_missing_inputs(tmp_path):
    assert main(["verify", "--config", str(tmp_path / "none.json")]) == EXIT_NO_INPUT
    assert main(["report", "--config", str(tmp_path / "none.json")]) == EXIT_NO_INPUT
    assert main(["norm", "--settings", str(tmp_path / "none.json")]) == EXIT_NO_INPUT
    assert main(["norm", "--space", str(tmp_path / "space.json")]) == EXIT_NO_INPUT


def test_verify_rejects_hypothesis_violation(tmp_path, capsys):
    path = tmp_path / "riesz.json"
    path.write_text(json.dumps({"kind": "riesz-bound", "dim": 1}), encoding="utf-8")
    assert main(["verify", "--config", str(path)]) == EXIT_CONFIG
    assert "n >= 2" in capsys.readouterr().err


def test_verify_rejects_malformed_experiment(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"kind": "dyadic-cover", "grid": 5}), encoding="utf-8")
    assert main(["verify", "--config", str(path)]) == EXIT_CONFIG


def test_verify_and_report(tmp_path, capsys):
    path = tmp_path / "dyadic.json"
    path.write_text(json.dumps({"kind": "dyadic-cover", "samples": 20}), encoding="utf-8")
    out = tmp_path / "run"
    assert main(["verify", "--config", str(path), "--out", str(out), "--seed", "4"]) == 0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["status"] == "pass"
    assert report["seed"] == 4
    assert (out / "convergence.csv").exists()
    capsys.readouterr()
    table = tmp_path / "summary.csv"
    assert main(["report", "--config", str(out / "report.json"), "--out", str(table)]) == 0
    assert "dyadic-cover: pass" in capsys.readouterr().out
    assert table.read_text(encoding="utf-8").startswith("name,verdict,measured,threshold")


def test_bsvy_scan_writes_csv_to_stdout(capsys):
    code = main(["bsvy-scan", "--points", "201", "--lambda-min", "1", "--lambda-max", "100",
                 "--lambda-points", "16"])
    assert code == 0
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert lines[0] == "lambda,value,r_max_cells,pair_count"
    assert len(lines) == 17
    assert "sup over 16 lambdas" in captured.err


def test_maximal_table(tmp_path):
    out = tmp_path / "maximal.csv"
    assert main(["maximal", "--points", "65", "--mode", "centered", "--out", str(out)]) == 0
    with open(out, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 65
    assert all(float(r["Mf"]) >= 0 for r in rows)


def test_apconst_constant_weight(capsys):
    code = main(["apconst", "--points", "129", "--p", "2",
                 "--weight", '{"family": "constant", "value": 2.0}'])
    assert code == 0
    assert _value_after(capsys.readouterr().out, ">=") == pytest.approx(1.0)


def test_settings_file_is_used(tmp_path):
    settings = tmp_path / "config.json"
    settings.write_text(json.dumps({"harness": {"ladder_1d": [33, 65]}}), encoding="utf-8")
    assert main(["norm", "--settings", str(settings)]) == 0
    assert Config().ladder_1d == [33, 65]
