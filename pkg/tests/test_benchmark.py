"""
Tests for the experiment API, configuration parsing and experiment output.
"""

import csv
import json
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from sppm_benchmark import SPPMBenchmark
from sppm_benchmark.config import (
    ExperimentConfig, MethodConfig, PRESETS, get_preset, load_config
)
from sppm_benchmark.core.engine import MethodSpec, run_ensemble
from sppm_benchmark.core.problem import constants, create_random_problem, toy_problem
from sppm_benchmark.core.sampling import Sampler, importance_probabilities
from sppm_benchmark.core.theory import certify_method, optimal_stepsize
from sppm_benchmark.core.utils import CSV_HEADER, recorded_iterations
from sppm_benchmark.exceptions import CertificateInvalid, ConfigError
from sppm_benchmark.methods import GradientCorrection, NoCorrection, OptimalCorrection
from sppm_benchmark.models import MethodFamily

TINY_EXPERIMENT = {
    "name": "tiny",
    "problem": {"n": 6, "d": 2, "data_seed": 3},
    "methods": [
        {"name": "sppm-us", "gamma": [0.1, 1.0]},
        {"name": "point-saga", "gamma": "theory", "alpha": "theory"},
    ],
    "iterations": 15,
    "runs": 2,
    "output": {"csv": "tiny.csv", "svg": "tiny.svg"},
}


@pytest.fixture
def benchmark():
    bench = SPPMBenchmark()
    bench.load_problem(toy_problem())
    return bench


def _experiment(**changes):
    data = json.loads(json.dumps(TINY_EXPERIMENT))
    data.update(changes)
    return data


class TestBuildMethod:

    def test_importance_sampling_probabilities(self, random_problem, random_consts):
        bench = SPPMBenchmark()
        bench.load_problem(random_problem)
        config = MethodConfig.from_dict({"name": "sppm-is", "gamma": 1.0})
        method, alpha, choice = bench.build_method(random_problem.name, config, 1.0, 10)
        assert np.allclose(method.sampler.probs, importance_probabilities(random_consts.mu_each))
        assert alpha is None and choice is None
        assert method.iterations == 10

    def test_lsvrp_theory_stepsize(self, random_problem, random_consts):
        bench = SPPMBenchmark()
        bench.load_problem(random_problem)
        config = MethodConfig.from_dict({"name": "lsvrp", "p": 0.5, "gamma": "theory",
                                         "alpha": "theory"})
        method, alpha, choice = bench.build_method(random_problem.name, config, "theory", 10)
        expected = optimal_stepsize(MethodFamily.LSVRP, random_consts, p=0.5)
        assert method.gamma == pytest.approx(expected.gamma, rel=1e-12)
        assert alpha == pytest.approx(expected.alpha, rel=1e-12)
        assert method.record_lyapunov_alpha == alpha

    def test_unbounded_theory_stepsize_is_a_config_error(self, benchmark):
        # toy1 has delta = 0, so gradient correction converges at every stepsize
        config = MethodConfig.from_dict({"name": "sppm-gc", "gamma": "theory"})
        with pytest.raises(ConfigError) as info:
            benchmark.build_method("toy1", config, "theory", 10, path="methods[0]")
        assert info.value.field_path == "methods[0].gamma"

    def test_probability_count_mismatch(self, benchmark):
        config = MethodConfig.from_dict({"name": "sppm", "probs": [0.2, 0.3, 0.5]})
        with pytest.raises(ConfigError) as info:
            benchmark.build_method("toy1", config, 1.0, 10, path="methods[0]")
        assert info.value.field_path == "methods[0]"

    def test_unknown_problem(self, benchmark):
        config = MethodConfig.from_dict({"name": "sppm"})
        with pytest.raises(ValueError):
            benchmark.build_method("missing", config, 1.0, 10)


class TestBenchmarkRuns:

    def test_failed_method_is_recorded(self, benchmark):
        good = MethodSpec(NoCorrection(), Sampler.uniform(2), 1.0, 20, label="good")
        bad = MethodSpec(NoCorrection(), Sampler.uniform(3), 1.0, 100, label="bad")
        results = benchmark.benchmark("toy1", [good, bad], runs=2)
        assert results["good"] is not None
        assert results["bad"] is None
        assert "bad" in benchmark.errors
        assert benchmark.get_results_summary()["failed_methods"].keys() == {"bad"}

    def test_compare_results(self, benchmark):
        methods = [
            MethodSpec(NoCorrection(), Sampler.uniform(2), 1.0, 50, label="sppm"),
            MethodSpec(OptimalCorrection(), Sampler.uniform(2), 1.0, 50, label="sppm-star"),
        ]
        comparison = benchmark.compare_results(benchmark.benchmark("toy1", methods, runs=4))
        assert comparison["best_method"] == "sppm-star"
        assert comparison["successful_methods"] == 2
        assert 0.05 < comparison["neighborhood"]["sppm"] < 1.0
        assert comparison["final_sq_dist"]["sppm-star"] < 1e-20

    def test_compare_all_failed(self, benchmark):
        comparison = benchmark.compare_results({"a": None, "b": None})
        assert comparison["all_failed"] is True
        assert benchmark.compare_results({}) == {}

    def test_export_import_round_trip(self, benchmark, tmp_path):
        method = MethodSpec(NoCorrection(), Sampler.uniform(2), 1.0, 10, label="sppm")
        original = benchmark.run_method("toy1", method, runs=3)
        path = benchmark.export_results("results.json", include_problems=True, directory=tmp_path)

        other = SPPMBenchmark()
        assert other.import_results(path) == 1
        assert other.list_problems() == ["toy1"]
        imported = other.results[0]
        assert imported.label == "sppm"
        assert imported.num_runs == 3
        assert np.allclose(imported.mean_sq_dist, original.mean_sq_dist)

    def test_results_summary(self, benchmark):
        assert benchmark.get_results_summary() == {'total_results': 0}
        method = MethodSpec(NoCorrection(), Sampler.uniform(2), 1.0, 10, label="sppm")
        benchmark.run_method("toy1", method, runs=2)
        benchmark.run_method("toy1", method, runs=3)
        summary = benchmark.get_results_summary()
        assert summary["total_results"] == 2
        assert summary["unique_methods"] == 1
        assert summary["method_statistics"]["sppm"]["total_runs"] == 5

        benchmark.clear_all()
        assert benchmark.results == [] and benchmark.list_problems() == []

    def test_certify_toy(self, benchmark):
        config = MethodConfig.from_dict({"name": "sppm", "gamma": 1.0, "alpha": 1.0})
        report = benchmark.certify("toy1", config, 1.0)
        assert report["theta"] == pytest.approx(1 / 9, rel=1e-12)
        assert report["neighborhood"] == pytest.approx(0.5, rel=1e-12)
        assert report["psi0"] == pytest.approx(100.0)
        assert report["iterations"] > 0


class TestExperiment:

    def test_outputs(self, tmp_path):
        config = ExperimentConfig.from_dict(_experiment())
        outcome = SPPMBenchmark().run_experiment(config, out_dir=tmp_path)

        assert [cell.label for cell in outcome.cells] == ["sppm-us", "sppm-us", "point-saga"]
        with open(outcome.csv_path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0].keys()) == CSV_HEADER
        assert len(rows) == 3 * 2 * 16
        assert all(row["lyapunov"] == "" for row in rows if row["method"] == "sppm-us")
        assert all(row["lyapunov"] != "" for row in rows if row["method"] == "point-saga")
        assert rows[0]["iteration"] == "0" and rows[0]["run"] == "0"

        with open(outcome.metadata_path) as f:
            metadata = json.load(f)
        assert {"experiment", "rng_algorithm", "seeds", "lambda_rule", "problem",
                "constants", "cells", "lambda_rule_note"} <= metadata.keys()
        assert metadata["seeds"] == {"base_seed": 0, "data_seed": 3, "runs": 2}
        assert len(metadata["cells"]) == 3

        svg_text = outcome.svg_path.read_text(encoding="utf-8")
        assert "<image" not in svg_text
        assert ET.parse(outcome.svg_path).getroot().tag.endswith("svg")

    def test_csv_is_reproducible(self, tmp_path):
        config = ExperimentConfig.from_dict(_experiment(output={"csv": "tiny.csv"}))
        first = SPPMBenchmark().run_experiment(config, out_dir=tmp_path / "a")
        second = SPPMBenchmark().run_experiment(config, out_dir=tmp_path / "b")
        assert first.svg_path is None
        assert first.csv_path.read_bytes() == second.csv_path.read_bytes()

    @staticmethod
    def _assert_reproducible_outputs(config, tmp_path):
        first = SPPMBenchmark().run_experiment(config, out_dir=tmp_path / "a")
        second = SPPMBenchmark().run_experiment(config, out_dir=tmp_path / "b")

        assert len(first.cells) == sum(len(m.gammas()) for m in config.methods)
        for produced in ("csv_path", "svg_path", "metadata_path"):
            assert getattr(first, produced).read_bytes() == getattr(second, produced).read_bytes()

        with open(first.csv_path, newline="") as f:
            assert next(csv.reader(f)) == CSV_HEADER
        assert ET.parse(first.svg_path).getroot().tag.endswith("svg")
        assert "<image" not in first.svg_path.read_text(encoding="utf-8")

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_are_reproducible(self, name, tmp_path):
        """Shortened presets; the full-length runs are marked slow"""
        config = replace(get_preset(name), iterations=25).with_overrides(runs=2)
        self._assert_reproducible_outputs(config, tmp_path)

    @pytest.mark.slow
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_full_presets_are_reproducible(self, name, tmp_path):
        self._assert_reproducible_outputs(get_preset(name), tmp_path)

    def test_recorded_iterations_thin_after_one_thousand(self):
        k = recorded_iterations(1010)
        assert len(k) == 1002
        assert k[1000] == 1000 and k[-1] == 1010

    def test_gradient_correction_at_large_stepsize_on_fig3_instance(self):
        # with lambda = 1 the gradient-correction map still contracts at gamma = 100,
        # it is only slower than the optimal shift and beyond what the theory certifies
        problem = create_random_problem(1000, 10, seed=42, lambda_rule={"constant": 1.0})
        consts = constants(problem)
        uniform = Sampler.uniform(problem.n)
        gc = MethodSpec(GradientCorrection(), uniform, 100.0, 20)
        star = MethodSpec(OptimalCorrection(), uniform, 100.0, 20)
        gc_mean = run_ensemble(gc, problem, consts, num_runs=2).mean_sq_dist
        star_mean = run_ensemble(star, problem, consts, num_runs=2).mean_sq_dist

        resolved = star_mean > 1e-25 * star_mean[0]
        assert np.all(np.diff(star_mean[resolved]) < 0)
        assert gc_mean[20] >= 10.0 * star_mean[20]
        assert gc_mean[20] < gc_mean[0]
        with pytest.raises(CertificateInvalid):
            certify_method(gc, problem, consts, 1.0)

    def test_gradient_correction_diverges_with_weak_regularization(self):
        problem = create_random_problem(100, 10, seed=42, lambda_rule={"constant": 0.1})
        consts = constants(problem)
        uniform = Sampler.uniform(problem.n)
        gc = MethodSpec(GradientCorrection(), uniform, 100.0, 50)
        star = MethodSpec(OptimalCorrection(), uniform, 100.0, 50)
        gc_mean = run_ensemble(gc, problem, consts, num_runs=2).mean_sq_dist
        star_mean = run_ensemble(star, problem, consts, num_runs=2).mean_sq_dist

        assert np.all(np.isfinite(gc_mean))
        assert gc_mean[50] > 1e6 * gc_mean[0]
        assert gc_mean[50] >= 10.0 * star_mean[50]
        assert star_mean[50] < 1e-20 * star_mean[0]


class TestConfig:

    def test_presets(self):
        assert sorted(PRESETS) == ["fig1", "fig2", "fig3", "fig4"]
        assert len(get_preset("fig1").methods) == 4
        fig4 = get_preset("fig4")
        assert [m.p for m in fig4.methods if m.name == "lsvrp"] == [1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 1.0]
        assert fig4.problem.lambda_rule == {"constant": 1.0}

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            get_preset("fig9")

    @pytest.mark.parametrize("changes, field_path", [
        ({"bogus": 1}, "bogus"),
        ({"methods": [{"name": "sppm-nice"}]}, "methods[0].tau"),
        ({"methods": [{"name": "lsvrp", "p": 1.5}]}, "methods[0].p"),
        ({"methods": [{"name": "sppm-star", "gamma": "theory"}]}, "methods[0].gamma"),
        ({"methods": [{"name": "sppm"}, {"name": "sppm"}]}, "methods[1].label"),
        ({"methods": [{"name": "sppm", "tau": 2}]}, "methods[0].tau"),
        ({"methods": [{"name": "sppm", "gamma": -1.0}]}, "methods[0].gamma"),
        ({"methods": [{"name": "newton"}]}, "methods[0].name"),
        ({"x0": [1.0]}, "x0"),
        ({"runs": 0}, "runs"),
        ({"problem": {"n": 6}}, "problem.d"),
    ])
    def test_error_paths(self, changes, field_path):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(_experiment(**changes))
        assert info.value.field_path == field_path

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"name\": ", encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert info.value.field_path == "<document>"

    def test_load_and_override(self, tmp_path):
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps(TINY_EXPERIMENT), encoding="utf-8")
        config = load_config(path).with_overrides(seed=5, runs=3)
        assert (config.base_seed, config.runs) == (5, 3)
        assert config.methods[0].gammas() == [0.1, 1.0]
        assert ExperimentConfig.from_dict(config.to_dict()) == config
