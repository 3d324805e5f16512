"""
Tests for the command-line entry point.
"""

import json
from pathlib import Path

import pytest

from sppm_benchmark.cli import (
    EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_VERIFICATION, build_arg_parser, main
)
from sppm_benchmark.config import load_config
from sppm_benchmark.verification import SCALES
from sppm_benchmark.verification.suite import SuiteScale

TINY_CONFIG = {
    "name": "cli-tiny",
    "problem": {"n": 4, "d": 2, "data_seed": 1},
    "methods": [{"name": "sppm", "gamma": 1.0}, {"name": "sppm-gc", "gamma": 0.5}],
    "iterations": 10,
    "runs": 2,
    "output": {"csv": "cli-tiny.csv"},
}


def _printed_value(output: str, key: str) -> str:
    for line in output.splitlines():
        if line.startswith(f"{key}:"):
            return line.split()[1]
    raise AssertionError(f"{key} not printed")


def test_certify_toy(capsys):
    code = main(["certify", "--method", "sppm", "--problem", "toy1",
                 "--gamma", "1", "--alpha", "1", "--quiet"])
    assert code == EXIT_OK
    output = capsys.readouterr().out
    assert float(_printed_value(output, "theta")) == pytest.approx(1 / 9, rel=1e-12)
    assert float(_printed_value(output, "neighborhood")) == pytest.approx(0.5, rel=1e-12)


def test_certify_random_instance(capsys):
    code = main(["certify", "--method", "point-saga", "--n", "6", "--d", "2", "--quiet"])
    assert code == EXIT_OK
    assert float(_printed_value(capsys.readouterr().out, "theta")) < 1.0


def test_certify_theory_stepsize_without_finite_value():
    assert main(["certify", "--method", "sppm-star", "--problem", "toy1", "--quiet"]) == EXIT_CONFIG


def test_certify_invalid_certificate():
    code = main(["certify", "--method", "lsvrp", "--problem", "similarity", "--p", "0.5",
                 "--gamma", "10", "--alpha", "1e-6", "--quiet"])
    assert code == EXIT_CERTIFICATE


def test_gamma_argument_rejects_text():
    with pytest.raises(SystemExit):
        build_arg_parser().parse_args(["certify", "--method", "sppm", "--gamma", "large"])


def test_verify_prints_json_lines(monkeypatch, capsys):
    monkeypatch.setitem(SCALES, "tiny", SuiteScale(
        random_instances=1, contraction_pairs=10, states=2, mc_draws=500,
        lyapunov_seeds=10, lyapunov_horizon=5, similarity_probes=5,
        oracle_cases=4, recurrence_cases=10, cross_validation_cases=3,
    ))
    code = main(["verify", "--scale", "tiny", "--seed", "3", "--quiet"])
    reports = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert reports
    assert {"name", "passed", "worst_margin", "samples"} <= reports[0].keys()
    expected = EXIT_OK if all(r["passed"] for r in reports) else EXIT_VERIFICATION
    assert code == expected


def test_run_config(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_CONFIG), encoding="utf-8")
    code = main(["run", str(path), "--out-dir", str(tmp_path / "out"), "--runs", "3", "--quiet"])
    assert code == EXIT_OK
    assert (tmp_path / "out" / "cli-tiny.csv").exists()
    assert (tmp_path / "out" / "cli-tiny.meta.json").exists()
    assert "EXPERIMENT REPORT: cli-tiny" in capsys.readouterr().out


def test_run_bad_config(tmp_path):
    path = tmp_path / "config.json"
    broken = dict(TINY_CONFIG, methods=[{"name": "sppm-nice"}])
    path.write_text(json.dumps(broken), encoding="utf-8")
    assert main(["run", str(path), "--out-dir", str(tmp_path), "--quiet"]) == EXIT_CONFIG


def test_run_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "absent.json"), "--quiet"]) == EXIT_IO


def test_list_presets(capsys):
    assert main(["list-presets"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(":")[0] for line in lines] == ["fig1", "fig2", "fig3", "fig4"]


def test_certify_problem_file(capsys):
    path = Path(__file__).resolve().parent.parent / "data" / "fixtures" / "toy1.json"
    code = main(["certify", "--method", "sppm", "--problem", str(path),
                 "--gamma", "1", "--alpha", "1", "--quiet"])
    assert code == EXIT_OK
    output = capsys.readouterr().out
    assert _printed_value(output, "problem") == "toy1"
    assert float(_printed_value(output, "theta")) == pytest.approx(1 / 9, rel=1e-12)


def test_example_config_parses():
    path = Path(__file__).resolve().parent.parent / "data" / "configs" / "example.json"
    config = load_config(path)
    assert [m.display_name() for m in config.methods] == [
        "sppm-us", "sppm-nice[tau=5]", "sppm-star", "point-saga", "lsvrp[p=0.1]"]
