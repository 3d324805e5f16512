"""
Empirical checks of the inequalities the convergence theory rests on.

Each check returns a CheckReport whose worst_margin is the smallest
normalized slack it observed; a negative margin beyond the check's
tolerance is a violation. Conditional expectations over the sampler are
enumerated exactly when the support is small and estimated by Monte-Carlo
with a 3 standard error allowance otherwise.
"""

import dataclasses
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.engine import MethodSpec, apply_sample, run_ensemble
from ..core.numerics import extreme_eigenpair, rng_new
from ..core.problem import full_grad, grad_i, prox_single, prox_subset, similarity_matrix
from ..core.sampling import Sampler
from ..core.theory import (
    certificate, method_mu, method_params, optimal_stepsize,
    sampling_constants, theorem_alpha, validate_certificate_against_closed_form
)
from ..exceptions import CertificateInvalid, Mismatch
from ..methods.base import EMPTY_STATE, ControlState, CorrectionStrategy
from ..methods.point_saga import PointSAGA
from ..models import (
    AssumptionParams, CheckReport, ProblemConstants, RegressionProblem,
    SampledSubset, SamplingConstants
)
from .oracles import prox_oracle

logger = logging.getLogger(__name__)

Z_SCORE = 3.0
IDENTITY_RTOL = 1e-9
CONTRACTION_RTOL = 1e-10
ORACLE_GAP = 1e-8
RECURRENCE_RTOL = 1e-12
ATTAINMENT = 0.99
ROUNDING_ULPS = 16
CONVERGED_FRACTION = 1e-20

# exact enumeration inside the checks stops here, the sampler itself allows more
CHECK_ENUMERATION_LIMIT = 20_000


def _default_rng(rng: Optional[np.random.Generator]) -> np.random.Generator:
    return rng if rng is not None else rng_new(0, 0)


def _sq(v: np.ndarray) -> float:
    return float(v @ v)


def _relative_margin(rhs: float, lhs: float, slack: float = 0.0, magnitude: float = 0.0) -> float:
    """
    (rhs + slack - lhs) normalized by the larger side, or by the magnitude of
    the terms lhs was computed from when that is larger. A zero bound then
    tolerates a left side that is zero up to cancellation.
    """
    scale = max(abs(rhs), abs(lhs), magnitude)
    if scale == 0:
        return 0.0
    return (rhs + slack - lhs) / scale


def random_point(consts: ProblemConstants, rng: np.random.Generator) -> np.ndarray:
    """x* plus a random direction at a log-uniform distance in [0.01, 10]"""
    d = consts.x_star.size
    distance = 10.0 ** rng.uniform(-2.0, 1.0)
    direction = rng.standard_normal(d)
    return consts.x_star + distance * direction / np.linalg.norm(direction)


def random_control_state(strategy: CorrectionStrategy, problem: RegressionProblem,
                         consts: ProblemConstants, rng: np.random.Generator) -> ControlState:
    """Control state with every control point drawn independently by random_point"""
    if strategy.state_variant == "w":
        return strategy.init_state(problem, random_point(consts, rng))
    if strategy.state_variant == "table":
        table = np.array([random_point(consts, rng) for _ in range(problem.n)])
        return PointSAGA.state_from_table(problem, table)
    return EMPTY_STATE


def sampler_support(sampler: Sampler, rng: np.random.Generator,
                    mc_draws: int) -> Tuple[List[SampledSubset], np.ndarray, bool]:
    """
    Subsets to average over with their probabilities.

    Returns:
        (subsets, probabilities, exact); when the support is too large the
        subsets are mc_draws independent draws with equal probabilities
    """
    weights = sampler.weights()
    if sampler.support_size() <= CHECK_ENUMERATION_LIMIT:
        support = sampler.enumerate_support()
        subsets = [SampledSubset(indices=C, weights=weights[C]) for C, _ in support]
        return subsets, np.array([p_C for _, p_C in support]), True

    logger.warning(f"Support of {sampler.describe()} is large, using {mc_draws} draws")
    subsets = [sampler.draw(rng) for _ in range(mc_draws)]
    return subsets, np.full(mc_draws, 1.0 / mc_draws), False


def _expectation(values: np.ndarray, probs: np.ndarray, exact: bool) -> Tuple[float, float]:
    mean = float(probs @ values)
    if exact or values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def _shift_at_star(consts: ProblemConstants, sample: SampledSubset) -> np.ndarray:
    """grad f_xi(x*) for the reweighted sub-objective of a sample"""
    return sample.weights @ consts.grad_at_star[sample.indices]


def check_contraction(problem: RegressionProblem, i: int, mu_i: float,
                      gammas: Sequence[float], num_pairs: int,
                      rng: Optional[np.random.Generator] = None) -> CheckReport:
    """
    ||prox(x) - prox(y)|| (1 + gamma mu_i) <= ||x - y|| for random pairs.

    The bound is tight for one-dimensional quadratics, so each pair is
    allowed the rounding of its two prox evaluations and of x - y:
    ROUNDING_ULPS ulps of (1 + gamma mu_i)(||prox(x)|| + ||prox(y)||) + ||x|| + ||y||.

    Args:
        problem: problem instance
        i: function index
        mu_i: strong convexity constant of f_i
        gammas: stepsizes to probe
        num_pairs: pairs per stepsize
        rng: random stream
    """
    rng = _default_rng(rng)
    worst = 0.0
    for gamma in gammas:
        for _ in range(num_pairs):
            x = 10.0 * rng.standard_normal(problem.d)
            y = x + 10.0 ** rng.uniform(-3.0, 1.0) * rng.standard_normal(problem.d)
            gap = float(np.linalg.norm(x - y))
            if gap == 0:
                continue
            factor = 1.0 + gamma * mu_i
            px, py = prox_single(problem, i, gamma, x), prox_single(problem, i, gamma, y)
            moved = factor * float(np.linalg.norm(px - py))
            rounding = ROUNDING_ULPS * np.finfo(float).eps * (
                factor * (np.linalg.norm(px) + np.linalg.norm(py))
                + np.linalg.norm(x) + np.linalg.norm(y))
            worst = min(worst, (gap + rounding - moved) / gap)

    return CheckReport.from_margin(
        name=f"prox-contraction[{problem.name}, i={i}]",
        worst_margin=worst,
        samples=num_pairs * len(gammas),
        tolerance=CONTRACTION_RTOL,
        notes=f"gammas={list(gammas)!r}",
    )


def check_assumption5(method: MethodSpec, problem: RegressionProblem,
                      consts: ProblemConstants, params: AssumptionParams,
                      num_states: int = 20, mc_draws: int = 10_000,
                      rng: Optional[np.random.Generator] = None) -> CheckReport:
    """
    Both parametric recursions at random (x_k, control state) pairs.

    The correction inequality averages ||h_k - grad f_xi(x*)||^2 over the
    sampler. The control inequality is checked with the exact update law of
    each variance-reduced method: the two-point refresh mixture of L-SVRP at
    every reachable x_{k+1}, and for Point SAGA the average over the sampled
    index together with the x_{k+1} it produces.

    Args:
        method: configured method
        problem: problem instance
        consts: problem constants
        params: recursion constants claimed for the method
        num_states: random states to probe
        mc_draws: sample count when the support cannot be enumerated
        rng: random stream
    """
    rng = _default_rng(rng)
    strategy = method.strategy
    x_star = consts.x_star
    subsets, probs, exact = sampler_support(method.sampler, rng, mc_draws)

    worst = math.inf
    for _ in range(num_states):
        x_k = random_point(consts, rng)
        state = random_control_state(strategy, problem, consts, rng)
        sigma_k = strategy.sigma_sq(state, x_star)

        errors = np.empty(len(subsets))
        sizes = np.empty(len(subsets))
        steps = []
        for s, sample in enumerate(subsets):
            x_next, h = apply_sample(method, problem, consts, x_k, state, sample)
            shift = _shift_at_star(consts, sample)
            errors[s] = _sq(h - shift)
            sizes[s] = _sq(h) + _sq(shift)
            steps.append(x_next)

        lhs, se = _expectation(errors, probs, exact)
        rhs = params.A1 * _sq(x_k - x_star) + params.B1 * sigma_k + params.C1
        worst = min(worst, _relative_margin(rhs, lhs, Z_SCORE * se, float(probs @ sizes)))

        if strategy.state_variant == "w":
            p = strategy.p
            for x_next in steps:
                moved = _sq(x_next - x_star)
                lhs = p * moved + (1.0 - p) * sigma_k
                rhs = params.A2 * moved + params.B2 * sigma_k + params.C2
                worst = min(worst, _relative_margin(rhs, lhs))
        elif strategy.state_variant == "table":
            next_sigma = np.array([
                strategy.sigma_sq(strategy.update_state(state, problem, x_next, sample, rng), x_star)
                for x_next, sample in zip(steps, subsets)
            ])
            moved = np.array([_sq(x_next - x_star) for x_next in steps])
            lhs, _ = _expectation(next_sigma, probs, True)
            rhs = params.A2 * float(probs @ moved) + params.B2 * sigma_k + params.C2
            worst = min(worst, _relative_margin(rhs, lhs))

    return CheckReport.from_margin(
        name=f"sigma-recursions[{method.name}, {problem.name}]",
        worst_margin=worst,
        samples=num_states * len(subsets),
        tolerance=IDENTITY_RTOL,
        notes="exact" if exact else f"monte-carlo, {mc_draws} draws",
    )


def check_one_step_bound(method: MethodSpec, problem: RegressionProblem,
                         consts: ProblemConstants, params: AssumptionParams,
                         num_states: int = 20, mc_draws: int = 10_000,
                         rng: Optional[np.random.Generator] = None,
                         sampling: Optional[SamplingConstants] = None) -> CheckReport:
    """
    E||x_{k+1} - x*||^2 <= ((1 + gamma^2 A1)||x_k - x*||^2 + gamma^2 B1 sigma_k^2
    + gamma^2 C1) / (1 + gamma mu)^2, conditionally on random states.
    """
    rng = _default_rng(rng)
    strategy = method.strategy
    gamma = method.gamma
    x_star = consts.x_star
    denom = (1.0 + gamma * method_mu(method, consts, sampling)) ** 2
    subsets, probs, exact = sampler_support(method.sampler, rng, mc_draws)

    worst = math.inf
    for _ in range(num_states):
        x_k = random_point(consts, rng)
        state = random_control_state(strategy, problem, consts, rng)
        distances = np.array([
            _sq(apply_sample(method, problem, consts, x_k, state, sample)[0] - x_star)
            for sample in subsets
        ])
        lhs, se = _expectation(distances, probs, exact)
        rhs = ((1.0 + gamma ** 2 * params.A1) * _sq(x_k - x_star)
               + gamma ** 2 * params.B1 * strategy.sigma_sq(state, x_star)
               + gamma ** 2 * params.C1) / denom
        worst = min(worst, _relative_margin(rhs, lhs, Z_SCORE * se))

    return CheckReport.from_margin(
        name=f"one-step-bound[{method.name}, {problem.name}]",
        worst_margin=worst,
        samples=num_states * len(subsets),
        tolerance=IDENTITY_RTOL,
    )


def check_unbiased_correction(method: MethodSpec, problem: RegressionProblem,
                              consts: ProblemConstants, num_states: int = 20,
                              mc_draws: int = 10_000,
                              rng: Optional[np.random.Generator] = None) -> CheckReport:
    """The mean of h_k over the sampler vanishes at random states"""
    rng = _default_rng(rng)
    strategy = method.strategy
    subsets, probs, exact = sampler_support(method.sampler, rng, mc_draws)

    worst = math.inf
    for _ in range(num_states):
        x_k = random_point(consts, rng)
        state = random_control_state(strategy, problem, consts, rng)
        corrections = np.array([
            strategy.correction(state, problem, consts, x_k, sample) for sample in subsets
        ])
        mean = probs @ corrections
        scale = math.sqrt(float(probs @ np.sum(corrections ** 2, axis=1)))
        if scale == 0:
            worst = min(worst, 0.0)
            continue
        slack = 0.0
        if not exact:
            slack = Z_SCORE * float(np.linalg.norm(corrections.std(axis=0, ddof=1)))
            slack /= math.sqrt(len(subsets))
        worst = min(worst, (slack - float(np.linalg.norm(mean))) / scale)

    return CheckReport.from_margin(
        name=f"unbiased-correction[{method.name}, {problem.name}]",
        worst_margin=worst,
        samples=num_states * len(subsets),
        tolerance=IDENTITY_RTOL,
    )


def check_prox_identity(method: MethodSpec, problem: RegressionProblem,
                        consts: ProblemConstants, num_states: int = 50,
                        rng: Optional[np.random.Generator] = None) -> CheckReport:
    """
    x_{k+1} = x_k + gamma h_k - gamma grad f_xi(x_{k+1}) after every sampled step.
    """
    rng = _default_rng(rng)
    gamma = method.gamma
    worst = 0.0
    for _ in range(num_states):
        x_k = random_point(consts, rng)
        state = random_control_state(method.strategy, problem, consts, rng)
        sample = method.sampler.draw(rng)
        x_next, h = apply_sample(method, problem, consts, x_k, state, sample)
        grad = sum(w * grad_i(problem, i, x_next)
                   for i, w in zip(sample.indices, sample.weights))
        shifted = x_k + gamma * h
        residual = float(np.linalg.norm(x_next - shifted + gamma * grad))
        scale = max(1.0, float(np.linalg.norm(shifted)), gamma * float(np.linalg.norm(grad)))
        worst = min(worst, -residual / scale)

    return CheckReport.from_margin(
        name=f"prox-identity[{method.name}, {problem.name}]",
        worst_margin=worst,
        samples=num_states,
        tolerance=IDENTITY_RTOL,
    )


def check_lyapunov_recursion(method: MethodSpec, problem: RegressionProblem,
                             consts: ProblemConstants, gamma: float, alpha: float,
                             num_seeds: int, horizon: int, base_seed: int = 0,
                             x0: Optional[np.ndarray] = None) -> CheckReport:
    """
    Ensemble estimate of E[Psi_{k+1}] <= theta E[Psi_k] + zeta + 3 SE_{k+1} for k < horizon.

    Args:
        method: configured method; its stepsize and horizon are replaced
        problem: problem instance
        consts: problem constants
        gamma: stepsize, must give a valid certificate with alpha
        alpha: Lyapunov weight
        num_seeds: number of independent runs
        horizon: number of steps checked
        base_seed: experiment seed of the runs
        x0: starting point, the default start when omitted
    """
    spec = dataclasses.replace(method, gamma=gamma, iterations=horizon,
                               record_lyapunov_alpha=alpha)
    sampling = sampling_constants(spec, problem, consts)
    cert = certificate(method_params(spec, consts, sampling), gamma, alpha,
                       method_mu(spec, consts, sampling))
    ensemble = run_ensemble(spec, problem, consts, x0=x0, base_seed=base_seed,
                            num_runs=num_seeds)
    mean, se = ensemble.mean_lyapunov, ensemble.se_lyapunov

    predicted = cert.theta * mean[:-1] + cert.zeta
    # Psi cannot be resolved below the spacing of floats around x*
    resolution = ROUNDING_ULPS * np.finfo(float).eps * max(1.0, float(np.linalg.norm(consts.x_star)))
    rounding = (1.0 + alpha) * (2.0 * np.sqrt(mean[1:]) * resolution + resolution ** 2)
    slack = predicted + Z_SCORE * se[1:] + rounding - mean[1:]
    scale = np.maximum(np.abs(predicted), np.finfo(float).tiny)
    # steps after the mean reached the numerical floor carry no information
    active = mean[:-1] > CONVERGED_FRACTION * mean[0]
    worst = float(np.min(slack[active] / scale[active])) if np.any(active) else 0.0

    return CheckReport.from_margin(
        name=f"lyapunov-recursion[{spec.name}, {problem.name}]",
        worst_margin=worst,
        samples=num_seeds * horizon,
        tolerance=IDENTITY_RTOL,
        notes=f"theta={cert.theta!r} zeta={cert.zeta!r} alpha={alpha!r}",
    )


def check_similarity_constants(problem: RegressionProblem, consts: ProblemConstants,
                               num_probes: int = 100,
                               rng: Optional[np.random.Generator] = None) -> CheckReport:
    """
    The similarity inequalities hold with consts.delta and consts.nu, and delta is attained.

    Left sides are computed from component gradients, margins are normalized
    by nu^2 times the probe's squared distance. A probe along the top
    eigenvector of the Hessian-deviation matrix must reach 99% of delta^2.
    """
    rng = _default_rng(rng)
    x_star = consts.x_star
    delta_sq, nu_sq = consts.delta ** 2, consts.nu ** 2

    def similarity_lhs(x: np.ndarray) -> float:
        moved = np.array([grad_i(problem, i, x) for i in range(problem.n)]) - consts.grad_at_star
        deviations = moved - (full_grad(problem, x) - full_grad(problem, x_star))
        return float(np.mean(np.sum(deviations ** 2, axis=1)))

    def pointwise_margin(x: np.ndarray) -> float:
        distance = _sq(x - x_star)
        if distance == 0:
            return 0.0
        return (delta_sq * distance - similarity_lhs(x)) / (nu_sq * distance)

    worst = math.inf
    for _ in range(num_probes):
        worst = min(worst, pointwise_margin(random_point(consts, rng)))

        table = np.array([random_point(consts, rng) for _ in range(problem.n)])
        moved = np.array([grad_i(problem, i, table[i]) for i in range(problem.n)]) - consts.grad_at_star
        deviations = moved - moved.mean(axis=0)
        lhs = float(np.mean(np.sum(deviations ** 2, axis=1)))
        spread = float(np.mean(np.sum((table - x_star) ** 2, axis=1)))
        worst = min(worst, (nu_sq * spread - lhs) / (nu_sq * spread))

    notes = ""
    true_delta_sq, direction = extreme_eigenpair(similarity_matrix(problem), "largest")
    if true_delta_sq > IDENTITY_RTOL * nu_sq:
        probe = x_star + direction
        worst = min(worst, pointwise_margin(probe))
        attained = similarity_lhs(probe) / (delta_sq * _sq(direction)) if delta_sq > 0 else math.inf
        worst = min(worst, attained - ATTAINMENT)
        notes = f"attained {attained:.6f} of delta^2"

    return CheckReport.from_margin(
        name=f"similarity-constants[{problem.name}]",
        worst_margin=worst,
        samples=2 * num_probes,
        tolerance=IDENTITY_RTOL,
        notes=notes,
    )


def _random_anchor(problem: RegressionProblem, rng: np.random.Generator) -> np.ndarray:
    return 10.0 ** rng.uniform(-1.0, 1.0) * rng.standard_normal(problem.d)


def check_prox_oracle(problem: RegressionProblem, num_cases: int,
                      rng: Optional[np.random.Generator] = None,
                      gamma_range: Tuple[float, float] = (1e-4, 1e4)) -> CheckReport:
    """
    Closed-form single and subset proxes against the iterative oracle.

    Cases alternate between a single function and a random weighted subset;
    the margin is ORACLE_GAP minus the largest absolute gap.
    """
    rng = _default_rng(rng)
    low, high = np.log10(gamma_range[0]), np.log10(gamma_range[1])
    largest_gap = 0.0
    for case in range(num_cases):
        gamma = 10.0 ** rng.uniform(low, high)
        v = _random_anchor(problem, rng)
        if case % 2 == 0:
            i = int(rng.integers(problem.n))
            closed = prox_single(problem, i, gamma, v)
            reference = prox_oracle(problem, [i], [1.0], gamma, v)
        else:
            size = int(rng.integers(1, problem.n + 1))
            C = np.sort(rng.choice(problem.n, size=size, replace=False))
            weights = rng.uniform(0.5, 2.0, size=size) * problem.n / size
            closed = prox_subset(problem, C, weights, gamma, v)
            reference = prox_oracle(problem, C, weights, gamma, v)
        largest_gap = max(largest_gap, float(np.max(np.abs(closed - reference))))

    return CheckReport.from_margin(
        name=f"prox-oracle[{problem.name}]",
        worst_margin=ORACLE_GAP - largest_gap,
        samples=num_cases,
        notes=f"max gap {largest_gap:.3e}",
    )


def check_recurrence_unrolling(num_cases: int = 100, max_k: int = 50,
                               rng: Optional[np.random.Generator] = None) -> CheckReport:
    """
    s_{k+1} = a s_k + b stays below a^k s_0 + b min(k, 1/(1 - a)).
    """
    rng = _default_rng(rng)
    worst = math.inf
    for _ in range(num_cases):
        a = rng.uniform(0.0, 1.0)
        b = rng.exponential()
        s0 = rng.exponential() * 10.0 ** rng.uniform(-2.0, 2.0)
        s = s0
        for k in range(1, int(rng.integers(1, max_k + 1)) + 1):
            s = a * s + b
            bound = a ** k * s0 + b * min(k, 1.0 / (1.0 - a))
            worst = min(worst, _relative_margin(bound, s))

    return CheckReport.from_margin(
        name="recurrence-unrolling",
        worst_margin=worst,
        samples=num_cases,
        tolerance=RECURRENCE_RTOL,
    )


def check_certificate_cross_validation(method: MethodSpec, problem: RegressionProblem,
                                       consts: ProblemConstants, num_cases: int = 100,
                                       rng: Optional[np.random.Generator] = None) -> CheckReport:
    """
    Generic certificate against the closed-form rate at random valid (gamma, alpha).

    Stepsizes are drawn below the recommended one (or around 1 when any
    stepsize works), weights around the method's own; pairs outside the
    valid region are skipped.
    """
    rng = _default_rng(rng)
    sampling = sampling_constants(method, problem, consts)
    choice = optimal_stepsize(method, consts, epsilon=1e-2, sampling=sampling)
    reference = 1.0 if choice.unbounded else choice.gamma

    worst = math.inf
    valid = 0
    for _ in range(num_cases):
        gamma = reference * 10.0 ** rng.uniform(-2.0, 0.0)
        alpha = theorem_alpha(method, consts, gamma) * 10.0 ** rng.uniform(-1.0, 1.0)
        try:
            report = validate_certificate_against_closed_form(
                method, consts, gamma, alpha=alpha, sampling=sampling)
        except CertificateInvalid:
            continue
        except Mismatch as e:
            gap = abs(e.expected - e.actual) / max(abs(e.expected), abs(e.actual))
            report = CheckReport.from_margin(e.what, -gap, 1)
        valid += 1
        worst = min(worst, report.worst_margin)

    if valid == 0:
        logger.warning(f"No valid (gamma, alpha) drawn for {method.name}")
        worst = 0.0
    return CheckReport.from_margin(
        name=f"certificate-vs-closed-form[{method.name}, {problem.name}]",
        worst_margin=worst,
        samples=valid,
    )
