"""
Convergence guarantees of the stochastic proximal point family.

Every method satisfies a pair of parametric recursions

    E||h_k - grad f_i(x*)||^2      <= A1 ||x_k - x*||^2 + B1 sigma_k^2 + C1
    E sigma_{k+1}^2                <= A2 ||x_{k+1} - x*||^2 + B2 sigma_k^2 + C2

and any stepsize gamma with weight alpha that keeps both ratios below one
yields E Psi_k <= theta^k Psi_0 + zeta / (1 - theta) for
Psi_k = ||x_k - x*||^2 + alpha sigma_k^2. This module evaluates the six
constants per method, the resulting certificate, each method's closed-form
rate, and the recommended stepsizes.
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from ..exceptions import CertificateInvalid, DegenerateConstants, Mismatch, MissingConstant
from ..models import (
    AssumptionParams, CheckReport, ClosedFormRate, CorrectionKind, MethodFamily,
    ProblemConstants, RateCertificate, RegressionProblem, SamplingConstants,
    SamplingScheme, StepsizeChoice
)
from .engine import MethodSpec
from .problem import sigma_star_as, sigma_star_ns

logger = logging.getLogger(__name__)

CROSS_CHECK_RTOL = 1e-12
BALANCE_RTOL = 1e-9

MethodLike = Union[MethodSpec, MethodFamily]

_CORRECTED_FAMILIES = {
    CorrectionKind.STAR: MethodFamily.SPPM_STAR,
    CorrectionKind.GC: MethodFamily.SPPM_GC,
    CorrectionKind.LSVRP: MethodFamily.LSVRP,
    CorrectionKind.POINT_SAGA: MethodFamily.POINT_SAGA,
}


def method_family(method: MethodLike) -> MethodFamily:
    """Theorem family of a configured method"""
    if isinstance(method, MethodFamily):
        return method
    if method.kind != CorrectionKind.NONE:
        return _CORRECTED_FAMILIES[method.kind]
    if method.sampler.is_uniform_singleton:
        return MethodFamily.SPPM
    if method.sampler.scheme == SamplingScheme.SINGLETON:
        return MethodFamily.SPPM_NS
    return MethodFamily.SPPM_AS


def _refresh_probability(method: MethodLike, p: Optional[float]) -> Optional[float]:
    if p is None and isinstance(method, MethodSpec) and method.kind == CorrectionKind.LSVRP:
        return method.strategy.p
    return p


def sampling_constants(method: MethodSpec, problem: RegressionProblem,
                       consts: ProblemConstants) -> Optional[SamplingConstants]:
    """
    (mu, sigma*^2) induced by the method's sampler, None for the corrected methods.
    """
    family = method_family(method)
    if family == MethodFamily.SPPM:
        return SamplingConstants(mu=consts.mu, sigma_star_sq=consts.sigma_star_sq)
    if family == MethodFamily.SPPM_NS:
        return sigma_star_ns(problem, method.sampler.probs, consts)
    if family == MethodFamily.SPPM_AS:
        return sigma_star_as(problem, method.sampler, consts)
    return None


def method_mu(method: MethodLike, consts: ProblemConstants,
              sampling: Optional[SamplingConstants] = None) -> float:
    """Strong convexity constant the method's rate is stated with"""
    family = method_family(method)
    if family in (MethodFamily.SPPM_NS, MethodFamily.SPPM_AS):
        if sampling is None:
            raise MissingConstant(f"{family.value} needs sampling constants")
        return sampling.mu
    if family == MethodFamily.SPPM and sampling is not None:
        return sampling.mu
    return consts.mu


def method_params(method: MethodLike, consts: ProblemConstants,
                  sampling: Optional[SamplingConstants] = None,
                  p: Optional[float] = None) -> AssumptionParams:
    """
    The six recursion constants (A1, B1, C1, A2, B2, C2) of a method.

    Args:
        method: configured method or theorem family
        consts: problem constants
        sampling: sampler constants, required for nonuniform and subset sampling
        p: refresh probability, taken from the method when it is an L-SVRP spec

    Raises:
        MissingConstant: a constant the family needs was not supplied
    """
    family = method_family(method)
    p = _refresh_probability(method, p)

    if family == MethodFamily.SPPM:
        sigma_sq = sampling.sigma_star_sq if sampling is not None else consts.sigma_star_sq
        return AssumptionParams(C1=sigma_sq)
    if family in (MethodFamily.SPPM_NS, MethodFamily.SPPM_AS):
        if sampling is None:
            raise MissingConstant(f"{family.value} needs sampling constants")
        return AssumptionParams(C1=sampling.sigma_star_sq)
    if family == MethodFamily.SPPM_STAR:
        return AssumptionParams()
    if family == MethodFamily.SPPM_GC:
        return AssumptionParams(A1=consts.delta ** 2)
    if family == MethodFamily.LSVRP:
        if p is None:
            raise MissingConstant("L-SVRP needs its refresh probability p")
        return AssumptionParams(B1=consts.delta ** 2, A2=p, B2=1.0 - p)

    n = consts.n
    return AssumptionParams(B1=consts.nu ** 2, A2=1.0 / n, B2=(n - 1.0) / n)


def certificate(params: AssumptionParams, gamma: float, alpha: float, mu: float) -> RateCertificate:
    """
    Contraction factor and neighborhood of Psi_k for a stepsize and weight.

    Raises:
        CertificateInvalid: one of the two ratios is not below 1
    """
    if not (gamma > 0 and alpha > 0 and mu > 0):
        raise ValueError("gamma, alpha and mu must be positive")

    denom = (1.0 + gamma * mu) ** 2
    growth = 1.0 + alpha * params.A2
    first = (1.0 + gamma ** 2 * params.A1) * growth / denom
    second = gamma ** 2 * params.B1 * growth / (alpha * denom) + params.B2

    # 1 - ratio in closed form; subtracting a ratio close to 1 loses digits at small gamma
    first_gap = (gamma * mu * (2.0 + gamma * mu) - gamma ** 2 * params.A1
                 - alpha * params.A2 * (1.0 + gamma ** 2 * params.A1)) / denom
    second_gap = (1.0 - params.B2) - gamma ** 2 * params.B1 * growth / (alpha * denom)

    if not (first < 1 and first_gap > 0):
        raise CertificateInvalid(1, first)
    if not (second < 1 and second_gap > 0):
        raise CertificateInvalid(2, second)

    theta = max(first, second)
    zeta = gamma ** 2 * params.C1 * growth / denom + alpha * params.C2
    neighborhood = zeta / min(first_gap, second_gap) if zeta > 0 else 0.0
    return RateCertificate(theta=theta, zeta=zeta, neighborhood=neighborhood, alpha=alpha)


def _sppm_like(mu: float, sigma_sq: float, gamma: float) -> ClosedFormRate:
    return ClosedFormRate(
        factor=1.0 / (1.0 + gamma * mu) ** 2,
        neighborhood=gamma * sigma_sq / (gamma * mu ** 2 + 2.0 * mu),
    )


def closed_form_rate(method: MethodLike, consts: ProblemConstants, gamma: float,
                     p: Optional[float] = None, alpha: Optional[float] = None,
                     sampling: Optional[SamplingConstants] = None) -> ClosedFormRate:
    """
    Per-step factor and neighborhood each method's own convergence theorem states.

    L-SVRP needs alpha; Point SAGA fixes alpha = gamma mu n.

    Raises:
        MissingConstant: p, alpha or sampling constants absent where needed
    """
    family = method_family(method)
    p = _refresh_probability(method, p)
    mu = consts.mu

    if family == MethodFamily.SPPM:
        if sampling is not None:
            return _sppm_like(sampling.mu, sampling.sigma_star_sq, gamma)
        return _sppm_like(mu, consts.sigma_star_sq, gamma)
    if family in (MethodFamily.SPPM_NS, MethodFamily.SPPM_AS):
        if sampling is None:
            raise MissingConstant(f"{family.value} needs sampling constants")
        return _sppm_like(sampling.mu, sampling.sigma_star_sq, gamma)
    if family == MethodFamily.SPPM_STAR:
        return ClosedFormRate(factor=1.0 / (1.0 + gamma * mu) ** 2, neighborhood=0.0)
    if family == MethodFamily.SPPM_GC:
        return ClosedFormRate(
            factor=(1.0 + gamma ** 2 * consts.delta ** 2) / (1.0 + gamma * mu) ** 2,
            neighborhood=0.0)
    if family == MethodFamily.LSVRP:
        if p is None or alpha is None:
            raise MissingConstant("L-SVRP rate needs p and alpha")
        scale = (1.0 + alpha * p) / (1.0 + gamma * mu) ** 2
        return ClosedFormRate(
            factor=max(scale, gamma ** 2 * consts.delta ** 2 * scale / alpha + 1.0 - p),
            neighborhood=0.0)

    n = consts.n
    return ClosedFormRate(
        factor=max(1.0 / (1.0 + gamma * mu),
                   gamma * consts.nu ** 2 / ((1.0 + gamma * mu) * mu * n) + 1.0 - 1.0 / n),
        neighborhood=0.0)


def lsvrp_rate_branches(consts: ProblemConstants, gamma: float, p: float):
    """A(gamma) and B(gamma) of L-SVRP with alpha = gamma mu / p"""
    mu = consts.mu
    first = 1.0 / (1.0 + gamma * mu)
    second = p * gamma * consts.delta ** 2 / (mu * (1.0 + gamma * mu)) + 1.0 - p
    return first, second


def optimal_stepsize(method: MethodLike, consts: ProblemConstants,
                     epsilon: Optional[float] = None, p: Optional[float] = None,
                     sampling: Optional[SamplingConstants] = None) -> StepsizeChoice:
    """
    Recommended stepsize with its iteration complexity.

    SPPM family: gamma = mu epsilon / sigma*^2, complexity factor
    sigma*^2 / (2 epsilon mu^2) + 1/2 in front of log(2 ||x0 - x*||^2 / epsilon).
    Gradient correction: gamma = mu / delta^2, factor 1 + delta^2 / mu^2.
    L-SVRP: gamma = p / (p delta^2 / mu + (1 - p) mu), alpha = gamma mu / p,
    factor 1/p + delta^2 / mu^2. Point SAGA: gamma = 1 / (nu^2 / mu + (n - 1) mu),
    alpha = gamma mu n, factor n + nu^2 / mu^2.

    When every stepsize converges and larger is better (optimal shift, zero
    similarity, interpolation) the choice is unbounded: gamma = inf.

    Raises:
        MissingConstant: epsilon, p or sampling constants absent where needed
        Mismatch: the L-SVRP stepsize does not balance the two rate branches
    """
    family = method_family(method)
    p = _refresh_probability(method, p)
    mu = consts.mu

    if family in (MethodFamily.SPPM, MethodFamily.SPPM_NS, MethodFamily.SPPM_AS):
        if epsilon is None or not epsilon > 0:
            raise MissingConstant(f"{family.value} stepsize needs a positive epsilon")
        if family != MethodFamily.SPPM and sampling is None:
            raise MissingConstant(f"{family.value} needs sampling constants")
        if sampling is not None:
            mu, sigma_sq = sampling.mu, sampling.sigma_star_sq
        else:
            sigma_sq = consts.sigma_star_sq
        if sigma_sq == 0:
            return _unbounded()
        return StepsizeChoice(
            gamma=mu * epsilon / sigma_sq,
            alpha=None,
            complexity_factor=sigma_sq / (2.0 * epsilon * mu ** 2) + 0.5,
            log_scale=2.0,
        )

    if family == MethodFamily.SPPM_STAR:
        return _unbounded()

    if family == MethodFamily.SPPM_GC:
        if consts.delta == 0:
            logger.info("Zero similarity constant: any gradient-correction stepsize converges")
            return _unbounded()
        return StepsizeChoice(
            gamma=mu / consts.delta ** 2,
            alpha=None,
            complexity_factor=1.0 + consts.delta ** 2 / mu ** 2,
        )

    if family == MethodFamily.LSVRP:
        if p is None:
            raise MissingConstant("L-SVRP stepsize needs p")
        denominator = p * consts.delta ** 2 / mu + (1.0 - p) * mu
        if denominator == 0:
            return _unbounded()
        gamma = p / denominator
        first, second = lsvrp_rate_branches(consts, gamma, p)
        gap = abs(first - second) / max(first, second)
        if gap > BALANCE_RTOL:
            raise Mismatch("L-SVRP rate balance", first, second)
        return StepsizeChoice(
            gamma=gamma,
            alpha=gamma * mu / p,
            complexity_factor=1.0 / p + consts.delta ** 2 / mu ** 2,
            balance_gap=gap,
        )

    n = consts.n
    gamma = 1.0 / (consts.nu ** 2 / mu + (n - 1.0) * mu)
    return StepsizeChoice(
        gamma=gamma,
        alpha=gamma * mu * n,
        complexity_factor=n + consts.nu ** 2 / mu ** 2,
    )


def _unbounded() -> StepsizeChoice:
    return StepsizeChoice(gamma=math.inf, alpha=None, complexity_factor=0.0, unbounded=True)


def theorem_alpha(method: MethodLike, consts: ProblemConstants, gamma: float,
                  p: Optional[float] = None) -> float:
    """
    Lyapunov weight the method's own analysis uses at gamma.

    gamma mu / p for L-SVRP, gamma mu n for Point SAGA, 1 otherwise (any
    weight works when sigma_k^2 is identically zero).
    """
    family = method_family(method)
    p = _refresh_probability(method, p)
    if family == MethodFamily.LSVRP:
        if p is None:
            raise MissingConstant("L-SVRP weight needs p")
        return gamma * consts.mu / p
    if family == MethodFamily.POINT_SAGA:
        return gamma * consts.mu * consts.n
    return 1.0


def _relative_gap(expected: float, actual: float) -> float:
    scale = max(abs(expected), abs(actual))
    return 0.0 if scale == 0 else abs(expected - actual) / scale


def validate_certificate_against_closed_form(method: MethodLike, consts: ProblemConstants,
                                             gamma: float, alpha: Optional[float] = None,
                                             p: Optional[float] = None,
                                             sampling: Optional[SamplingConstants] = None,
                                             rtol: float = CROSS_CHECK_RTOL) -> CheckReport:
    """
    Check that the generic certificate reproduces a method's closed-form rate.

    Point SAGA always uses alpha = gamma mu n; the other families use the
    supplied alpha (1 when omitted).

    Raises:
        Mismatch: factor or neighborhood differ by more than rtol
        CertificateInvalid: (gamma, alpha) is outside the valid region
    """
    family = method_family(method)
    p = _refresh_probability(method, p)
    if family == MethodFamily.POINT_SAGA:
        alpha = gamma * consts.mu * consts.n
    elif alpha is None:
        alpha = 1.0

    params = method_params(family, consts, sampling, p)
    mu = method_mu(family, consts, sampling)
    cert = certificate(params, gamma, alpha, mu)
    closed = closed_form_rate(family, consts, gamma, p=p, alpha=alpha, sampling=sampling)

    factor_gap = _relative_gap(closed.factor, cert.theta)
    if factor_gap > rtol:
        raise Mismatch(f"{family.value} contraction factor", closed.factor, cert.theta)
    neighborhood_gap = _relative_gap(closed.neighborhood, cert.neighborhood)
    if neighborhood_gap > rtol:
        raise Mismatch(f"{family.value} neighborhood", closed.neighborhood, cert.neighborhood)

    return CheckReport.from_margin(
        name=f"certificate-vs-closed-form[{family.value}]",
        worst_margin=rtol - max(factor_gap, neighborhood_gap),
        samples=1,
        notes=f"gamma={gamma!r} alpha={alpha!r}",
    )


def single_step_radius(consts: ProblemConstants,
                       sampling: Optional[SamplingConstants] = None) -> float:
    """sigma*^2 / mu^2, the limit of the SPPM neighborhood as gamma grows"""
    if sampling is not None:
        return sampling.sigma_star_sq / sampling.mu ** 2
    return consts.sigma_star_sq / consts.mu ** 2


def importance_sampling_constants(consts: ProblemConstants) -> SamplingConstants:
    """Constants of single-index sampling with p_i proportional to mu_i"""
    mu_each = np.asarray(consts.mu_each)
    sq_norms = np.sum(consts.grad_at_star ** 2, axis=1)
    return SamplingConstants(
        mu=float(np.mean(mu_each)),
        sigma_star_sq=float(np.mean(mu_each) * np.mean(sq_norms / mu_each)),
    )


def variance_sampling_constants(consts: ProblemConstants) -> SamplingConstants:
    """
    Constants of single-index sampling with p_i proportional to ||grad f_i(x*)||.

    Raises:
        DegenerateConstants: some gradient at x* vanishes, so mu_VS is undefined
    """
    norms = consts.grad_norms_at_star
    if np.any(norms == 0):
        raise DegenerateConstants(
            f"{int(np.sum(norms == 0))} component gradients vanish at x*")
    mean_norm = float(np.mean(norms))
    return SamplingConstants(
        mu=mean_norm * float(np.min(np.asarray(consts.mu_each) / norms)),
        sigma_star_sq=mean_norm ** 2,
    )


def lsvrp_balanced_alpha(consts: ProblemConstants, gamma: float, p: float) -> float:
    """
    Weight alpha at which both L-SVRP ratios coincide, which minimizes their maximum.

    The first ratio grows and the second shrinks with alpha; equating them
    gives p alpha^2 + b alpha - gamma^2 delta^2 = 0 with
    b = 1 - p gamma^2 delta^2 - (1 - p)(1 + gamma mu)^2.

    Raises:
        DegenerateConstants: delta = 0 and the first ratio dominates for every alpha
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    c = gamma ** 2 * consts.delta ** 2
    b = 1.0 - p * c - (1.0 - p) * (1.0 + gamma * consts.mu) ** 2
    root = math.sqrt(b * b + 4.0 * p * c)
    if b >= 0:
        alpha = 2.0 * c / (b + root) if b + root > 0 else 0.0
    else:
        alpha = (root - b) / (2.0 * p)
    if not alpha > 0:
        raise DegenerateConstants("No positive weight balances the L-SVRP ratios")
    return alpha


def lsvrp_numeric_alpha(consts: ProblemConstants, gamma: float, p: float,
                        log_bounds=(-30.0, 30.0)) -> float:
    """Numerical minimizer of the L-SVRP rate over log alpha, a cross-check of lsvrp_balanced_alpha"""
    params = AssumptionParams(B1=consts.delta ** 2, A2=p, B2=1.0 - p)
    denom = (1.0 + gamma * consts.mu) ** 2

    def worst_ratio(log_alpha: float) -> float:
        alpha = math.exp(log_alpha)
        growth = 1.0 + alpha * params.A2
        return max(growth / denom,
                   gamma ** 2 * params.B1 * growth / (alpha * denom) + params.B2)

    result = minimize_scalar(worst_ratio, bounds=log_bounds, method="bounded",
                             options={"xatol": 1e-12})
    return float(math.exp(result.x))


def certify_method(method: MethodSpec, problem: RegressionProblem, consts: ProblemConstants,
                   alpha: Optional[float] = None) -> RateCertificate:
    """
    Certificate of a configured method at its own stepsize.

    Args:
        method: configured method
        problem: problem instance
        consts: problem constants
        alpha: Lyapunov weight, theorem_alpha when omitted

    Raises:
        CertificateInvalid: the stepsize is outside the valid region
    """
    sampling = sampling_constants(method, problem, consts)
    params = method_params(method, consts, sampling)
    if alpha is None:
        alpha = theorem_alpha(method, consts, method.gamma)
    return certificate(params, method.gamma, alpha, method_mu(method, consts, sampling))
