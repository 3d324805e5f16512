"""
Tests for the independent prox oracle and the empirical checks.
"""

import json
from dataclasses import replace

import numpy as np
import pytest

from sppm_benchmark.core.engine import MethodSpec
from sppm_benchmark.core.numerics import rng_new
from sppm_benchmark.core.problem import constants, prox_single, prox_subset
from sppm_benchmark.core.sampling import Sampler
from sppm_benchmark.core.theory import (
    method_params, optimal_stepsize, sampling_constants, theorem_alpha
)
from sppm_benchmark.exceptions import NoConvergence, NonPositiveGamma
from sppm_benchmark.methods import GradientCorrection, LooplessSVRP, NoCorrection, PointSAGA
from sppm_benchmark.models import MethodFamily
from sppm_benchmark.verification import (
    SCALES, check_assumption5, check_certificate_cross_validation, check_contraction,
    check_lyapunov_recursion, check_one_step_bound, check_prox_identity, check_prox_oracle,
    check_recurrence_unrolling, check_similarity_constants, check_unbiased_correction,
    prox_oracle, verify_all
)
from sppm_benchmark.verification.suite import SuiteScale, single_function_problem, suite_methods


def test_oracle_agrees_with_closed_form_prox(random_problem, rng):
    for _ in range(10):
        gamma = 10.0 ** rng.uniform(-4, 4)
        v = rng.standard_normal(random_problem.d)
        i = int(rng.integers(random_problem.n))
        assert np.allclose(prox_oracle(random_problem, [i], [1.0], gamma, v),
                           prox_single(random_problem, i, gamma, v), atol=1e-8)
        C = [0, 2, 5]
        weights = np.array([1.0, 0.5, 3.0])
        assert np.allclose(prox_oracle(random_problem, C, weights, gamma, v),
                           prox_subset(random_problem, C, weights, gamma, v), atol=1e-8)


def test_oracle_errors(random_problem):
    with pytest.raises(NonPositiveGamma):
        prox_oracle(random_problem, [0], [1.0], 0.0, np.zeros(3))
    with pytest.raises(NoConvergence):
        prox_oracle(random_problem, [0, 1, 2], [1.0, 1.0, 1.0], 1e4, np.ones(3) * 50, max_iter=1)


def test_prox_oracle_check(random_problem):
    report = check_prox_oracle(random_problem, 20, rng=rng_new(1, 0))
    assert report.passed
    assert report.samples == 20


def test_contraction_check(random_problem, random_consts):
    report = check_contraction(random_problem, 3, float(random_consts.mu_each[3]),
                               (0.01, 1.0, 100.0), 200, rng=rng_new(2, 0))
    assert report.passed
    assert report.worst_margin >= -1e-10


def test_contraction_check_catches_overstated_strong_convexity(random_problem, random_consts):
    report = check_contraction(random_problem, 3, 10.0 * float(random_consts.mu_each[3]),
                               (1.0, 100.0), 50, rng=rng_new(2, 0))
    assert not report.passed


def test_similarity_check_passes_with_true_constants(similarity, similarity_consts):
    report = check_similarity_constants(similarity, similarity_consts, 30, rng=rng_new(3, 0))
    assert report.passed


def test_similarity_check_fails_with_halved_delta(similarity, similarity_consts):
    wrong = replace(similarity_consts, delta=similarity_consts.delta / 2)
    report = check_similarity_constants(similarity, wrong, 30, rng=rng_new(3, 0))
    assert not report.passed
    assert report.worst_margin < 0


def test_recurrence_unrolling_check():
    assert check_recurrence_unrolling(50, rng=rng_new(4, 0)).passed


@pytest.mark.parametrize("label", ["sppm", "sppm-nice[tau=2]", "sppm-gc", "lsvrp[p=0.5]", "point-saga"])
def test_assumption_checks_on_similarity_pair(label, similarity, similarity_consts):
    methods = {m.name: m for m in suite_methods(similarity, similarity_consts)}
    method = methods[label]
    sampling = sampling_constants(method, similarity, similarity_consts)
    params = method_params(method, similarity_consts, sampling)
    assert check_assumption5(method, similarity, similarity_consts, params, 5, 2000,
                             rng=rng_new(5, 0)).passed
    assert check_one_step_bound(method, similarity, similarity_consts, params, 5, 2000,
                                rng=rng_new(6, 0), sampling=sampling).passed
    assert check_unbiased_correction(method, similarity, similarity_consts, 5, 2000,
                                     rng=rng_new(7, 0)).passed
    assert check_prox_identity(method, similarity, similarity_consts, 10, rng=rng_new(8, 0)).passed


def test_cross_validation_check(random_problem, random_consts):
    method = MethodSpec(LooplessSVRP(p=0.2), Sampler.uniform(random_problem.n), 0.01)
    report = check_certificate_cross_validation(method, random_problem, random_consts, 20,
                                                rng=rng_new(9, 0))
    assert report.passed


def test_deterministic_lyapunov_recursion():
    problem = single_function_problem()
    consts = constants(problem)
    method = MethodSpec(NoCorrection(), Sampler.uniform(1), 1.0)
    report = check_lyapunov_recursion(method, problem, consts, 1.0, 1.0, 1, 30, x0=np.array([2.0]))
    assert report.passed


def test_lyapunov_recursion_for_point_saga(random_problem, random_consts):
    """100 seeds over 20 steps; all seven methods at full size are marked slow"""
    choice = optimal_stepsize(MethodFamily.POINT_SAGA, random_consts)
    method = MethodSpec(PointSAGA(), Sampler.uniform(random_problem.n), choice.gamma)
    report = check_lyapunov_recursion(method, random_problem, random_consts, choice.gamma,
                                      choice.alpha, 100, 20)
    assert report.passed


def test_gradient_correction_lyapunov_recursion(random_problem, random_consts):
    """100 seeds over 20 steps; all seven methods at full size are marked slow"""
    gamma = optimal_stepsize(MethodFamily.SPPM_GC, random_consts).gamma
    method = MethodSpec(GradientCorrection(), Sampler.uniform(random_problem.n), gamma)
    alpha = theorem_alpha(method, random_consts, gamma)
    report = check_lyapunov_recursion(method, random_problem, random_consts, gamma, alpha, 100, 20)
    assert report.passed


def test_suite_is_deterministic(monkeypatch):
    monkeypatch.setitem(SCALES, "tiny", SuiteScale(
        random_instances=1, contraction_pairs=10, states=2, mc_draws=500,
        lyapunov_seeds=10, lyapunov_horizon=5, similarity_probes=5,
        oracle_cases=4, recurrence_cases=10, cross_validation_cases=3,
    ))
    first = [report.to_json() for report in verify_all("tiny", seed=11)]
    second = [report.to_json() for report in verify_all("tiny", seed=11)]
    assert first == second
    assert len({json.loads(line)["name"] for line in first}) > 10


def test_suite_rejects_unknown_scale():
    with pytest.raises(ValueError):
        verify_all("huge")


@pytest.mark.parametrize("fixture, i", [("toy", 0), ("similarity", 1)])
def test_contraction_check_where_the_bound_is_tight(fixture, i, request):
    problem = request.getfixturevalue(fixture)
    consts = constants(problem)
    report = check_contraction(problem, i, float(consts.mu_each[i]), (0.01, 1.0, 100.0), 300,
                               rng=rng_new(12, 0))
    assert report.passed
    assert report.worst_margin >= -1e-10


@pytest.mark.parametrize("strategy", [LooplessSVRP(p=0.5), GradientCorrection()])
def test_recursions_with_zero_similarity(strategy, toy, toy_consts):
    # delta = 0 on toy1, so the correction inequality has a zero right side
    assert toy_consts.delta == pytest.approx(0.0, abs=1e-12)
    method = MethodSpec(strategy, Sampler.uniform(2), 1.0)
    params = method_params(method, toy_consts)
    report = check_assumption5(method, toy, toy_consts, params, 20, rng=rng_new(13, 0))
    assert report.passed
    assert report.worst_margin >= -1e-12


def test_quick_suite_passes():
    reports = verify_all("quick", seed=0)
    assert [report.name for report in reports if not report.passed] == []


@pytest.mark.slow
@pytest.mark.parametrize("label", [
    "sppm", "sppm-is", "sppm-nice[tau=2]", "sppm-star", "sppm-gc", "lsvrp[p=0.5]", "point-saga",
])
def test_lyapunov_recursion_full_ensemble(label, random_problem, random_consts):
    methods = {m.name: m for m in suite_methods(random_problem, random_consts)}
    method = methods[label]
    alpha = theorem_alpha(method, random_consts, method.gamma)
    report = check_lyapunov_recursion(method, random_problem, random_consts, method.gamma,
                                      alpha, 2000, 100, base_seed=21)
    assert report.passed
