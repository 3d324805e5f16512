"""
Tests for the regularized least-squares problem: proximal steps, the
minimizer and the rate constants.
"""

import numpy as np
import pytest

from sppm_benchmark.core.problem import (
    all_grads, constants, create_random_problem, full_grad, grad_i, hessian_i,
    load_problem, make_lambdas, minimizer, objective, objective_i, prox_single,
    prox_subset, save_problem, sigma_star_as, sigma_star_ns
)
from sppm_benchmark.core.sampling import Sampler
from sppm_benchmark.exceptions import (
    BadDistribution, EmptySubset, IndexOutOfRange, NonPositiveGamma
)
from sppm_benchmark.models import RegressionProblem


def test_toy_constants(toy_consts):
    assert np.allclose(toy_consts.x_star, [0.0], atol=1e-15)
    assert toy_consts.mu == pytest.approx(2.0)
    assert toy_consts.delta == 0.0
    assert toy_consts.nu == pytest.approx(2.0)
    assert toy_consts.sigma_star_sq == pytest.approx(4.0)


def test_similarity_pair_constants(similarity_consts):
    assert similarity_consts.mu == pytest.approx(2.0)
    assert similarity_consts.delta == pytest.approx(1.0, rel=1e-9)
    assert similarity_consts.nu == pytest.approx(4.0)


def test_toy_prox_steps(toy):
    assert prox_single(toy, 0, 1.0, [1.0]) == pytest.approx([1.0])
    assert prox_single(toy, 1, 1.0, [1.0]) == pytest.approx([-1.0 / 3.0])
    assert prox_single(toy, 0, 1.0, [4.0]) == pytest.approx([2.0])


def test_prox_single_is_stationary(random_problem, rng):
    for i in range(random_problem.n):
        gamma = 10.0 ** rng.uniform(-2, 2)
        v = rng.standard_normal(random_problem.d)
        x = prox_single(random_problem, i, gamma, v)
        assert np.allclose(gamma * grad_i(random_problem, i, x) + x - v, 0.0, atol=1e-10)


def test_prox_subset_is_stationary(random_problem, rng):
    C = [1, 4, 6]
    weights = np.array([0.5, 2.0, 1.0])
    v = rng.standard_normal(random_problem.d)
    x = prox_subset(random_problem, C, weights, 0.7, v)
    residual = sum(w * grad_i(random_problem, i, x) for i, w in zip(C, weights)) + (x - v) / 0.7
    assert np.allclose(residual, 0.0, atol=1e-10)


def test_prox_subset_with_one_index_scales_the_stepsize(random_problem):
    v = np.array([1.0, -1.0, 2.0])
    expected = prox_single(random_problem, 2, 0.3 * 4.0, v)
    assert np.allclose(prox_subset(random_problem, [2], [4.0], 0.3, v), expected, rtol=1e-14)


def test_prox_errors(toy):
    with pytest.raises(NonPositiveGamma):
        prox_single(toy, 0, 0.0, [1.0])
    with pytest.raises(IndexOutOfRange):
        prox_single(toy, 2, 1.0, [1.0])
    with pytest.raises(EmptySubset):
        prox_subset(toy, [], [], 1.0, [1.0])
    with pytest.raises(IndexOutOfRange):
        prox_subset(toy, [0, 5], [1.0, 1.0], 1.0, [1.0])


def test_gradients_agree(random_problem, rng):
    x = rng.standard_normal(random_problem.d)
    grads = all_grads(random_problem, x)
    for i in range(random_problem.n):
        assert np.allclose(grads[i], grad_i(random_problem, i, x))
    assert np.allclose(full_grad(random_problem, x), grads.mean(axis=0))


def test_objective_is_mean_of_components(random_problem, rng):
    x = rng.standard_normal(random_problem.d)
    components = [objective_i(random_problem, i, x) for i in range(random_problem.n)]
    assert objective(random_problem, x) == pytest.approx(np.mean(components))


def test_minimizer_zeroes_the_gradient(random_problem):
    x_star = minimizer(random_problem)
    assert np.linalg.norm(full_grad(random_problem, x_star)) < 1e-12


def test_strong_convexity_and_smoothness_bracket_hessians(random_problem, random_consts):
    for i in range(random_problem.n):
        eigenvalues = np.linalg.eigvalsh(hessian_i(random_problem, i))
        assert eigenvalues[0] == pytest.approx(random_consts.mu_each[i], rel=1e-10)
        assert eigenvalues[-1] <= random_consts.nu * (1 + 1e-12)
    assert random_consts.mu == pytest.approx(random_consts.mu_each.min())


def test_delta_is_largest_hessian_deviation(random_problem, random_consts):
    hessians = np.array([hessian_i(random_problem, i) for i in range(random_problem.n)])
    deviations = hessians - hessians.mean(axis=0)
    D = np.einsum("nij,njk->ik", deviations, deviations) / random_problem.n
    assert random_consts.delta ** 2 == pytest.approx(np.linalg.eigvalsh(D)[-1], rel=1e-9)


def test_make_lambdas():
    assert np.allclose(make_lambdas(5, 3), [0.5, 0.25, 0.125, 0.5, 0.25])
    assert np.allclose(make_lambdas(3, 2, {"constant": 1.0}), [1.0, 1.0, 1.0])
    assert np.allclose(make_lambdas(2, 2, 0.3), [0.3, 0.3])
    with pytest.raises(ValueError):
        make_lambdas(3, 2, "halving")


def test_random_problem_is_seeded():
    first = create_random_problem(6, 2, seed=11)
    second = create_random_problem(6, 2, seed=11)
    assert np.array_equal(first.A, second.A)
    assert np.array_equal(first.b, second.b)
    assert not np.array_equal(first.A, create_random_problem(6, 2, seed=12).A)


def test_zero_targets_give_interpolation():
    problem = create_random_problem(10, 3, seed=1, zero_targets=True)
    consts = constants(problem)
    assert np.allclose(consts.x_star, 0.0)
    assert consts.sigma_star_sq == 0.0


def test_problem_validation():
    with pytest.raises(ValueError):
        RegressionProblem(A=[[1.0]], b=[1.0, 2.0], lambdas=[0.5])
    with pytest.raises(ValueError):
        RegressionProblem(A=[[1.0]], b=[1.0], lambdas=[0.0])


def test_save_and_load_problem(tmp_path, random_problem):
    path = tmp_path / "problem.json"
    save_problem(random_problem, path)
    loaded = load_problem(path)
    assert np.array_equal(loaded.A, random_problem.A)
    assert np.array_equal(loaded.lambdas, random_problem.lambdas)


def test_uniform_sampling_reproduces_sigma_star(random_problem, random_consts):
    uniform = np.full(random_problem.n, 1.0 / random_problem.n)
    ns = sigma_star_ns(random_problem, uniform, random_consts)
    assert ns.sigma_star_sq == pytest.approx(random_consts.sigma_star_sq, rel=1e-12)
    assert ns.mu == pytest.approx(random_consts.mu, rel=1e-12)

    as_ = sigma_star_as(random_problem, Sampler.uniform(random_problem.n), random_consts)
    assert as_.exact
    assert as_.sigma_star_sq == pytest.approx(random_consts.sigma_star_sq, rel=1e-12)


def test_full_sampling_has_no_noise(random_problem, random_consts):
    full = sigma_star_as(random_problem, Sampler.full(random_problem.n), random_consts)
    assert full.sigma_star_sq < 1e-20


def test_sigma_star_ns_needs_positive_probabilities(toy, toy_consts):
    with pytest.raises(BadDistribution):
        sigma_star_ns(toy, [1.0, 0.0], toy_consts)


def test_monte_carlo_sigma_agrees_with_enumeration(random_problem, random_consts):
    sampler = Sampler.nice(random_problem.n, 3)
    exact = sigma_star_as(random_problem, sampler, random_consts, exact=True)
    estimate = sigma_star_as(random_problem, sampler, random_consts, exact=False,
                             mc_draws=200_000, seed=3)
    assert not estimate.exact
    assert estimate.mu == exact.mu
    assert abs(estimate.sigma_star_sq - exact.sigma_star_sq) <= 5 * estimate.standard_error
