"""
Tests for the iteration loop, seeded runs and ensembles.
"""

from dataclasses import replace

import numpy as np
import pytest

from sppm_benchmark.core.engine import (
    MethodSpec, default_x0, initial_state, run, run_ensemble, step
)
from sppm_benchmark.core.numerics import RNG_ALGORITHM, rng_new
from sppm_benchmark.core.problem import constants, create_random_problem
from sppm_benchmark.core.sampling import Sampler
from sppm_benchmark.core.theory import certify_method, optimal_stepsize
from sppm_benchmark.core.utils import time_average
from sppm_benchmark.exceptions import NonPositiveGamma
from sppm_benchmark.methods import (
    GradientCorrection, LooplessSVRP, NoCorrection, OptimalCorrection, PointSAGA
)
from sppm_benchmark.verification.suite import single_function_problem

EPS = np.finfo(float).eps


def test_single_function_converges_geometrically():
    problem = single_function_problem()
    consts = constants(problem)
    method = MethodSpec(NoCorrection(), Sampler.uniform(1), 1.0, iterations=30)
    trajectory = run(method, problem, consts, x0=[2.0])
    for k in range(31):
        expected = 3.0 ** -k
        # below about 1e-15 the distance to x* = 1 is at the resolution of doubles
        allowance = 1e-9 * expected + 1e-14
        assert abs(np.sqrt(trajectory.sq_dist[k]) - expected) <= allowance


@pytest.mark.parametrize("gamma", [0.1, 1.0, 10.0])
def test_interpolation_contracts_every_run(gamma):
    problem = create_random_problem(10, 3, seed=42, zero_targets=True)
    consts = constants(problem)
    method = MethodSpec(NoCorrection(), Sampler.uniform(10), gamma, iterations=200)
    factor = (1.0 + gamma * consts.mu) ** 2
    for r in range(5):
        sq = run(method, problem, consts, base_seed=0, run_index=r).sq_dist
        k = np.arange(sq.size)
        assert np.all(sq <= sq[0] / factor ** k * (1 + 1e-9))


def test_toy_neighborhood_of_plain_method(toy, toy_consts):
    """100 runs averaged over k in [100, 300]; the 2000-run version is marked slow"""
    method = MethodSpec(NoCorrection(), Sampler.uniform(2), 1.0, iterations=300)
    result = run_ensemble(method, toy, toy_consts, base_seed=1, num_runs=100)
    neighborhood = time_average(result.mean_sq_dist, 100)
    assert 0.05 <= neighborhood <= 0.525


@pytest.mark.slow
def test_toy_neighborhood_full_ensemble(toy, toy_consts):
    method = MethodSpec(NoCorrection(), Sampler.uniform(2), 1.0, iterations=5000)
    result = run_ensemble(method, toy, toy_consts, base_seed=1, num_runs=2000)
    neighborhood = time_average(result.mean_sq_dist, 2000, 5000)
    assert 0.05 <= neighborhood <= 0.5 * 1.05


def test_optimal_shift_contracts_exactly(toy, toy_consts):
    method = MethodSpec(OptimalCorrection(), Sampler.uniform(2), 1.0, iterations=10)
    sq = run(method, toy, toy_consts).sq_dist
    assert np.allclose(sq, sq[0] / 9.0 ** np.arange(11), rtol=1e-12, atol=0)


def test_lsvrp_with_full_refresh_reproduces_gradient_correction(random_problem, random_consts):
    uniform = Sampler.uniform(random_problem.n)
    gc = MethodSpec(GradientCorrection(), uniform, 0.2, iterations=50)
    lsvrp = MethodSpec(LooplessSVRP(p=1.0), uniform, 0.2, iterations=50)
    for r in range(3):
        first = run(gc, random_problem, random_consts, base_seed=4, run_index=r)
        second = run(lsvrp, random_problem, random_consts, base_seed=4, run_index=r)
        assert np.array_equal(first.sq_dist, second.sq_dist)


def test_runs_are_reproducible(random_problem, random_consts):
    method = MethodSpec(PointSAGA(), Sampler.uniform(random_problem.n), 0.05, iterations=40,
                        record_lyapunov_alpha=1.0)
    first = run(method, random_problem, random_consts, base_seed=3, run_index=2)
    second = run(method, random_problem, random_consts, base_seed=3, run_index=2)
    assert np.array_equal(first.sq_dist, second.sq_dist)
    assert np.array_equal(first.lyapunov, second.lyapunov)
    assert all(np.array_equal(a, b) for a, b in zip(first.sampled, second.sampled))
    assert first.rng_algorithm == RNG_ALGORITHM
    other = run(method, random_problem, random_consts, base_seed=3, run_index=3)
    assert not np.array_equal(first.sq_dist, other.sq_dist)


def test_lyapunov_starts_at_distance_plus_weighted_sigma(random_problem, random_consts):
    method = MethodSpec(LooplessSVRP(p=0.5), Sampler.uniform(random_problem.n), 0.1,
                        iterations=5, record_lyapunov_alpha=2.0)
    trajectory = run(method, random_problem, random_consts)
    # w_0 = x_0, so Psi_0 = (1 + alpha) ||x_0 - x*||^2
    assert trajectory.lyapunov[0] == pytest.approx(3.0 * trajectory.sq_dist[0])
    assert trajectory.sq_dist[0] == pytest.approx(100.0)


def test_step_draws_the_sample_first(random_problem, random_consts):
    method = MethodSpec(NoCorrection(), Sampler.nice(random_problem.n, 3), 0.5)
    x0 = default_x0(random_consts.x_star)
    state = initial_state(method.strategy, random_problem, x0)
    result = step(method, random_problem, random_consts, x0, state, rng_new(8, 0))
    expected = method.sampler.draw(rng_new(8, 0))
    assert np.array_equal(result.sample.indices, expected.indices)
    assert np.allclose(result.correction, 0.0)


def test_default_start_is_ten_away():
    x_star = np.array([1.0, -2.0, 0.5, 4.0])
    assert np.linalg.norm(default_x0(x_star) - x_star) == pytest.approx(10.0)


def test_ensemble_statistics(random_problem, random_consts):
    method = MethodSpec(NoCorrection(), Sampler.uniform(random_problem.n), 0.5, iterations=20)
    result = run_ensemble(method, random_problem, random_consts, base_seed=2, num_runs=4,
                          keep_trajectories=True)
    runs = np.array([t.sq_dist for t in result.trajectories])
    assert result.num_runs == 4
    assert [t.run_index for t in result.trajectories] == [0, 1, 2, 3]
    assert np.allclose(result.mean_sq_dist, runs.mean(axis=0), rtol=1e-12)
    assert np.allclose(result.se_sq_dist, runs.std(axis=0, ddof=1) / 2.0, rtol=1e-9)
    assert result.mean_lyapunov is None


def test_method_spec_validation(random_problem):
    uniform = Sampler.uniform(random_problem.n)
    with pytest.raises(NonPositiveGamma):
        MethodSpec(NoCorrection(), uniform, 0.0)
    with pytest.raises(ValueError):
        MethodSpec(NoCorrection(), Sampler.singleton([1.0] + [0.0] * (random_problem.n - 1)), 1.0)
    with pytest.raises(ValueError):
        MethodSpec(NoCorrection(), uniform, 1.0, record_lyapunov_alpha=-1.0)
    assert MethodSpec(NoCorrection(), uniform, 1.0).name == "SPPM"
    assert MethodSpec(NoCorrection(), uniform, 1.0, label="sppm-us").name == "sppm-us"


def _predicted_iterations(method, problem, consts, epsilon):
    x0 = default_x0(consts.x_star)
    state = initial_state(method.strategy, problem, x0)
    choice = optimal_stepsize(method, consts)
    alpha = choice.alpha if choice.alpha is not None else 1.0
    psi0 = float((x0 - consts.x_star) @ (x0 - consts.x_star))
    psi0 += alpha * method.strategy.sigma_sq(state, consts.x_star)
    if choice.unbounded:
        theta = certify_method(method, problem, consts, alpha).theta
        return int(np.ceil(np.log(psi0 / epsilon) / (1.0 - theta)))
    return choice.iterations(epsilon, psi0)


def _assert_exact_convergence(name, n, d, budget_factor):
    problem = create_random_problem(n, d, seed=5, lambda_rule={"constant": 0.5})
    consts = constants(problem)
    uniform = Sampler.uniform(problem.n)
    p = 1.0 / problem.n
    strategy = {
        "sppm-star": OptimalCorrection(),
        "sppm-gc": GradientCorrection(),
        "lsvrp": LooplessSVRP(p=p),
        "point-saga": PointSAGA(),
    }[name]
    choice = optimal_stepsize(MethodSpec(strategy, uniform, 1.0), consts)
    gamma = 1.0 if choice.unbounded else choice.gamma
    method = MethodSpec(strategy, uniform, gamma)

    epsilon = 1e-16 * 100.0
    budget = budget_factor * _predicted_iterations(method, problem, consts, epsilon)
    result = run_ensemble(replace(method, iterations=budget), problem, consts, num_runs=2)
    assert result.mean_sq_dist[0] == pytest.approx(100.0)
    assert result.mean_sq_dist[-1] <= 1e-16 * result.mean_sq_dist[0]


@pytest.mark.parametrize("name", ["sppm-star", "sppm-gc", "lsvrp", "point-saga"])
def test_variance_reduced_methods_converge_exactly(name):
    """n=20, d=3 within twice the predicted count; n=100, d=10 is marked slow"""
    _assert_exact_convergence(name, 20, 3, 2)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["sppm-star", "sppm-gc", "lsvrp", "point-saga"])
def test_variance_reduced_methods_converge_exactly_full_size(name):
    _assert_exact_convergence(name, 100, 10, 3)


def test_nice_neighborhood_shrinks_with_subset_size():
    problem = create_random_problem(10, 3, seed=42)
    consts = constants(problem)
    averages, errors, mus = [], [], []
    for tau in (1, 2, 5, 9, 10):
        sampler = Sampler.nice(problem.n, tau)
        method = MethodSpec(NoCorrection(), sampler, 0.1, iterations=600)
        result = run_ensemble(method, problem, consts, base_seed=2, num_runs=20,
                              keep_trajectories=True)
        per_run = np.array([np.mean(t.sq_dist[300:]) for t in result.trajectories])
        averages.append(per_run.mean())
        errors.append(per_run.std(ddof=1) / np.sqrt(per_run.size))
        mus.append(sampler.mu_as(consts.mu_each))

    for j in range(4):
        assert averages[j + 1] <= averages[j] + 3.0 * (errors[j] + errors[j + 1])
        assert mus[j + 1] >= mus[j]
    assert averages[-1] < 1e-8
