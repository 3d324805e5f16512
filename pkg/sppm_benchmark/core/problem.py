"""
Regularized least-squares finite sums.

Each f_i(x) = 1/2 (a_i^T x - b_i)^2 + lambda_i ||x||^2 has Hessian
H_i = a_i a_i^T + 2 lambda_i I, so every proximal step is a linear solve and
every constant the convergence theory needs is a spectral quantity of the H_i.

Function indices are 0-based throughout the package.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import (
    BadDistribution, EmptySubset, IndexOutOfRange, NonPositiveGamma, SupportTooLarge
)
from ..models import ProblemConstants, RegressionProblem, SamplingConstants
from .numerics import (
    extreme_eigenvalue, rank_one_spd_solve, rng_new, solve_spd, validate_probabilities
)
from .sampling import SUPPORT_LIMIT, Sampler

logger = logging.getLogger(__name__)

LambdaRule = Union[str, float, dict]

MC_MIN_DRAWS = 1_000_000
_MC_BATCH_ENTRIES = 2_000_000
_ENUMERATION_CHUNK = 10_000


def _check_index(p: RegressionProblem, i: int) -> int:
    if not 0 <= i < p.n:
        raise IndexOutOfRange(f"Function index {i} outside [0, {p.n})")
    return int(i)


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise NonPositiveGamma(f"Stepsize must be positive, got {gamma!r}")


def objective_i(p: RegressionProblem, i: int, x: ArrayLike) -> float:
    i = _check_index(p, i)
    x = np.asarray(x, dtype=float)
    residual = p.A[i] @ x - p.b[i]
    return float(0.5 * residual ** 2 + p.lambdas[i] * (x @ x))


def objective(p: RegressionProblem, x: ArrayLike) -> float:
    """Value of f = (1/n) sum_i f_i at x"""
    x = np.asarray(x, dtype=float)
    residuals = p.A @ x - p.b
    return float(np.mean(0.5 * residuals ** 2 + p.lambdas * (x @ x)))


def grad_i(p: RegressionProblem, i: int, x: ArrayLike) -> np.ndarray:
    """Gradient a_i (a_i^T x - b_i) + 2 lambda_i x of f_i"""
    i = _check_index(p, i)
    x = np.asarray(x, dtype=float)
    return p.A[i] * (p.A[i] @ x - p.b[i]) + 2.0 * p.lambdas[i] * x


def all_grads(p: RegressionProblem, x: ArrayLike) -> np.ndarray:
    """n x d matrix whose row i is grad f_i(x)"""
    x = np.asarray(x, dtype=float)
    residuals = p.A @ x - p.b
    return p.A * residuals[:, None] + 2.0 * p.lambdas[:, None] * x[None, :]


def full_grad(p: RegressionProblem, x: ArrayLike) -> np.ndarray:
    """Gradient of f at x"""
    x = np.asarray(x, dtype=float)
    residuals = p.A @ x - p.b
    return p.A.T @ residuals / p.n + 2.0 * np.mean(p.lambdas) * x


def hessian_i(p: RegressionProblem, i: int) -> np.ndarray:
    i = _check_index(p, i)
    return np.outer(p.A[i], p.A[i]) + 2.0 * p.lambdas[i] * np.eye(p.d)


def prox_single(p: RegressionProblem, i: int, gamma_eff: float, v: ArrayLike) -> np.ndarray:
    """
    Proximal point of f_i: argmin_x f_i(x) + ||x - v||^2 / (2 gamma_eff).

    Stationarity reads ((2 lambda_i + 1/gamma) I + a_i a_i^T) x = a_i b_i + v/gamma,
    which is solved with Sherman-Morrison.

    Raises:
        NonPositiveGamma: gamma_eff <= 0
        IndexOutOfRange: i outside [0, n)
    """
    _check_gamma(gamma_eff)
    i = _check_index(p, i)
    v = np.asarray(v, dtype=float)

    c = 2.0 * p.lambdas[i] + 1.0 / gamma_eff
    rhs = p.A[i] * p.b[i] + v / gamma_eff
    return rank_one_spd_solve(c, p.A[i], rhs)


def prox_subset(p: RegressionProblem, C: Sequence[int], weights: ArrayLike,
                gamma: float, v: ArrayLike) -> np.ndarray:
    """
    Proximal point of the reweighted subset objective sum_{i in C} w_i f_i.

    Args:
        p: problem instance
        C: sampled indices
        weights: positive weight per member of C, 1/(n p_i) for a sampler
        gamma: stepsize
        v: anchor point

    Returns:
        argmin_x sum_{i in C} w_i f_i(x) + ||x - v||^2 / (2 gamma)
    """
    C = np.asarray(C, dtype=int)
    weights = np.asarray(weights, dtype=float)
    if C.size == 0:
        raise EmptySubset("Sampled subset is empty")
    _check_gamma(gamma)
    if weights.shape != C.shape:
        raise ValueError("weights must align with the sampled indices")
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    for i in C:
        _check_index(p, i)

    if C.size == 1:
        return prox_single(p, int(C[0]), gamma * weights[0], v)

    v = np.asarray(v, dtype=float)
    rows = p.A[C]
    M = (rows.T * weights) @ rows
    M[np.diag_indices_from(M)] += 2.0 * weights @ p.lambdas[C] + 1.0 / gamma
    rhs = rows.T @ (weights * p.b[C]) + v / gamma
    return solve_spd(M, rhs)


def minimizer(p: RegressionProblem) -> np.ndarray:
    """Unique minimizer of f from its normal equations"""
    M = p.A.T @ p.A / p.n
    M[np.diag_indices_from(M)] += 2.0 * np.mean(p.lambdas)
    rhs = p.A.T @ p.b / p.n
    return solve_spd(M, rhs)


def strong_convexity_each(p: RegressionProblem) -> np.ndarray:
    """
    lambda_min(H_i) for every i.

    For d > 1 the rank-one term leaves a (d-1)-dimensional eigenspace at
    2 lambda_i; for d = 1 the Hessian is the scalar a_i^2 + 2 lambda_i.
    """
    if p.d == 1:
        return p.A[:, 0] ** 2 + 2.0 * p.lambdas
    return 2.0 * p.lambdas.copy()


def similarity_matrix(p: RegressionProblem) -> np.ndarray:
    """(1/n) sum_i (H_i - H_bar)^2, whose top eigenvalue is delta^2"""
    eye = np.eye(p.d)
    hessians = np.einsum("ni,nj->nij", p.A, p.A) + 2.0 * p.lambdas[:, None, None] * eye
    deviations = hessians - hessians.mean(axis=0)
    D = np.einsum("nij,njk->ik", deviations, deviations) / p.n
    return 0.5 * (D + D.T)


def constants(p: RegressionProblem) -> ProblemConstants:
    """
    Exact minimizer and rate constants of a problem.

    Returns:
        ProblemConstants with x_star, mu_i, mu, sigma_star^2, delta, nu and
        the gradients at x_star
    """
    x_star = minimizer(p)
    mu_each = strong_convexity_each(p)
    grads = all_grads(p, x_star)

    delta_sq = extreme_eigenvalue(similarity_matrix(p), "largest")
    delta = float(np.sqrt(max(delta_sq, 0.0)))
    nu = float(np.max(np.sum(p.A ** 2, axis=1) + 2.0 * p.lambdas))

    mu_each.flags.writeable = False
    grads.flags.writeable = False
    return ProblemConstants(
        x_star=x_star,
        mu_each=mu_each,
        mu=float(mu_each.min()),
        sigma_star_sq=float(np.mean(np.sum(grads ** 2, axis=1))),
        delta=delta,
        nu=max(nu, delta),
        grad_at_star=grads,
    )


def sigma_star_ns(p: RegressionProblem, probs: ArrayLike,
                  consts: Optional[ProblemConstants] = None) -> SamplingConstants:
    """
    Constants of single-element sampling with probabilities probs.

    sigma_NS^2 = (1/n) sum_i ||grad f_i(x*)||^2 / (n p_i) and mu_NS = min_i mu_i / (n p_i).

    Raises:
        BadDistribution: probs is not a distribution with all entries positive
    """
    probs = validate_probabilities(probs)
    if probs.shape != (p.n,):
        raise ValueError(f"probs must have length {p.n}")
    if np.any(probs <= 0):
        raise BadDistribution("Single-element sampling needs every p_i > 0")

    consts = consts or constants(p)
    scaled = 1.0 / (p.n * probs)
    sq_norms = np.sum(consts.grad_at_star ** 2, axis=1)
    return SamplingConstants(
        mu=float(np.min(consts.mu_each * scaled)),
        sigma_star_sq=float(np.mean(sq_norms * scaled)),
    )


def sigma_star_as(p: RegressionProblem, sampler: Sampler,
                  consts: Optional[ProblemConstants] = None,
                  exact: Optional[bool] = None,
                  mc_draws: int = MC_MIN_DRAWS,
                  seed: int = 0) -> SamplingConstants:
    """
    Constants of an arbitrary sampling.

    sigma_AS^2 = sum_C p_C ||sum_{i in C} grad f_i(x*) / (n p_i)||^2 is
    enumerated exactly when the support is small enough, otherwise
    estimated by Monte-Carlo with a reported standard error. mu_AS is always
    exact.

    Args:
        p: problem instance
        sampler: proper, nonvacuous sampler over p.n functions
        consts: precomputed problem constants
        exact: True to require enumeration, False to force Monte-Carlo,
            None to decide from the support size
        mc_draws: Monte-Carlo sample count, at least MC_MIN_DRAWS is advised
        seed: base seed of the Monte-Carlo stream

    Raises:
        SupportTooLarge: exact=True and the support exceeds the enumeration cap
    """
    if sampler.n != p.n:
        raise ValueError(f"Sampler covers {sampler.n} functions, problem has {p.n}")

    consts = consts or constants(p)
    weighted = consts.grad_at_star / (p.n * sampler.inclusion_probs())[:, None]
    mu = sampler.mu_as(consts.mu_each)

    enumerable = sampler.support_size() <= SUPPORT_LIMIT
    if exact is None:
        exact = enumerable
    if exact and not enumerable:
        raise SupportTooLarge(
            f"Support of {sampler.describe()} has {sampler.support_size()} subsets")

    if exact:
        total = 0.0
        support = sampler.enumerate_support()
        for start in range(0, len(support), _ENUMERATION_CHUNK):
            chunk = support[start:start + _ENUMERATION_CHUNK]
            sums = np.array([weighted[C].sum(axis=0) for C, _ in chunk])
            p_C = np.array([p_C for _, p_C in chunk])
            total += float(p_C @ np.sum(sums ** 2, axis=1))
        return SamplingConstants(mu=mu, sigma_star_sq=total)

    logger.warning(
        f"Estimating sigma_AS^2 of {sampler.describe()} with {mc_draws} Monte-Carlo draws")
    rng = rng_new(seed, 0)
    batch = max(1, _MC_BATCH_ENTRIES // p.n)
    values = []
    remaining = mc_draws
    while remaining > 0:
        size = min(batch, remaining)
        W = sampler.draw_weight_matrix(rng, size)
        sums = W @ consts.grad_at_star
        values.append(np.sum(sums ** 2, axis=1))
        remaining -= size
    values = np.concatenate(values)
    return SamplingConstants(
        mu=mu,
        sigma_star_sq=float(values.mean()),
        standard_error=float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0,
        exact=False,
    )


def make_lambdas(n: int, d: int, rule: LambdaRule = "powers-of-two") -> np.ndarray:
    """
    Ridge weights from a named rule.

    "powers-of-two" cycles 1/2, 1/4, ..., 1/2^d over the n functions;
    a number c or {"constant": c} gives lambda_i = c for all i.
    """
    if isinstance(rule, dict):
        if set(rule) != {"constant"}:
            raise ValueError(f"Unknown lambda rule {rule!r}")
        rule = rule["constant"]
    if isinstance(rule, str):
        if rule != "powers-of-two":
            raise ValueError(f"Unknown lambda rule {rule!r}")
        return 2.0 ** -((np.arange(n) % d) + 1.0)
    if not rule > 0:
        raise ValueError("Constant lambda must be positive")
    return np.full(n, float(rule))


def create_random_problem(n: int, d: int, seed: int = 42,
                          lambda_rule: LambdaRule = "powers-of-two",
                          zero_targets: bool = False,
                          name: Optional[str] = None) -> RegressionProblem:
    """
    Synthetic instance with standard-normal A and b.

    Args:
        n: number of functions
        d: dimension
        seed: data seed
        lambda_rule: see make_lambdas
        zero_targets: set b = 0, so every f_i is minimized at 0 (interpolation)
        name: instance ID, derived from the sizes when omitted
    """
    rng = rng_new(seed, 0)
    A = rng.standard_normal((n, d))
    b = rng.standard_normal(n)
    if zero_targets:
        b = np.zeros(n)
    problem = RegressionProblem(
        A=A, b=b, lambdas=make_lambdas(n, d, lambda_rule),
        name=name or f"random-n{n}-d{d}-s{seed}",
    )
    logger.debug(f"Created problem {problem.name}")
    return problem


def toy_problem() -> RegressionProblem:
    """Two 1-D functions 1/2 (x -+ 2)^2 + x^2 / 2, so f(x) = x^2 + 2 and x* = 0"""
    return RegressionProblem(A=[[1.0], [1.0]], b=[2.0, -2.0], lambdas=[0.5, 0.5], name="toy1")


def similarity_pair_problem() -> RegressionProblem:
    """Two 1-D functions with Hessians 2 and 4, so delta = 1 and nu = 4"""
    return RegressionProblem(A=[[1.0], [1.0]], b=[2.0, -2.0], lambdas=[0.5, 1.5], name="similarity")


def load_problem(path: Union[str, Path]) -> RegressionProblem:
    """Read a problem from its JSON fixture format"""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    problem = RegressionProblem.from_dict(data, name=data.get("name", path.stem))
    logger.info(f"Loaded problem {problem.name} (n={problem.n}, d={problem.d}) from {path}")
    return problem


def save_problem(problem: RegressionProblem, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(problem.to_dict(), f, indent=2)
    logger.info(f"Saved problem {problem.name} to {path}")
