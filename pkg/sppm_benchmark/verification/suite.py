"""
Default verification suite.

Runs every check on the fixed fixtures (toy1, the similarity pair, an
interpolation instance, a single-function instance) and on seeded random
instances, for each of the seven methods.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..core.engine import MethodSpec
from ..core.numerics import rng_new
from ..core.problem import (
    constants, create_random_problem, similarity_pair_problem, toy_problem
)
from ..core.sampling import Sampler, importance_probabilities
from ..core.theory import method_params, optimal_stepsize, sampling_constants, theorem_alpha
from ..methods.corrected import GradientCorrection, OptimalCorrection
from ..methods.lsvrp import LooplessSVRP
from ..methods.plain import NoCorrection
from ..methods.point_saga import PointSAGA
from ..models import CheckReport, MethodFamily, ProblemConstants, RegressionProblem
from .checks import (
    check_assumption5, check_certificate_cross_validation, check_contraction,
    check_lyapunov_recursion, check_one_step_bound, check_prox_identity, check_prox_oracle,
    check_recurrence_unrolling, check_similarity_constants, check_unbiased_correction
)

logger = logging.getLogger(__name__)

SUITE_REFRESH_PROBABILITY = 0.5
CONTRACTION_STEPSIZES = (0.01, 1.0, 100.0)


@dataclass(frozen=True)
class SuiteScale:
    """Sample sizes of one suite scale"""

    random_instances: int
    contraction_pairs: int
    states: int
    mc_draws: int
    lyapunov_seeds: int
    lyapunov_horizon: int
    similarity_probes: int
    oracle_cases: int
    recurrence_cases: int
    cross_validation_cases: int


SCALES: Dict[str, SuiteScale] = {
    "quick": SuiteScale(
        random_instances=3, contraction_pairs=100, states=5, mc_draws=2_000,
        lyapunov_seeds=200, lyapunov_horizon=30, similarity_probes=30,
        oracle_cases=40, recurrence_cases=100, cross_validation_cases=20,
    ),
    "full": SuiteScale(
        random_instances=20, contraction_pairs=1000, states=20, mc_draws=10_000,
        lyapunov_seeds=500, lyapunov_horizon=100, similarity_probes=200,
        oracle_cases=50, recurrence_cases=100, cross_validation_cases=100,
    ),
}


def single_function_problem() -> RegressionProblem:
    """f(x) = 1/2 (x - 2)^2 + x^2 / 2 alone; SPPM with gamma = 1 moves x - 1 by a factor 1/3"""
    return RegressionProblem(A=[[1.0]], b=[2.0], lambdas=[0.5], name="single")


def suite_problems(num_random: int, seed: int = 0) -> List[RegressionProblem]:
    """Fixtures followed by num_random random instances with 2 <= n <= 20 and 2 <= d <= 8"""
    problems = [
        toy_problem(),
        similarity_pair_problem(),
        create_random_problem(10, 3, seed=seed, zero_targets=True, name="interpolation"),
    ]
    rng = rng_new(seed, 1)
    for r in range(num_random):
        n = int(rng.integers(2, 21))
        d = int(rng.integers(2, 9))
        data_seed = int(rng.integers(2 ** 31))
        problems.append(create_random_problem(n, d, seed=data_seed, name=f"random-{r}"))
    return problems


def suite_methods(problem: RegressionProblem, consts: ProblemConstants) -> List[MethodSpec]:
    """
    The seven methods at stepsizes inside their valid regions.

    Plain and shifted methods use gamma = 1, gradient correction mu / delta^2
    (1 when delta = 0), L-SVRP and Point SAGA their recommended stepsizes.
    """
    uniform = Sampler.uniform(problem.n)
    methods = [
        MethodSpec(NoCorrection(), uniform, 1.0, label="sppm"),
        MethodSpec(NoCorrection(), Sampler.singleton(importance_probabilities(consts.mu_each)),
                   1.0, label="sppm-is"),
    ]
    if problem.n >= 2:
        methods.append(MethodSpec(NoCorrection(), Sampler.nice(problem.n, 2), 1.0,
                                  label="sppm-nice[tau=2]"))
    methods.append(MethodSpec(OptimalCorrection(), uniform, 1.0, label="sppm-star"))

    gc_gamma = consts.mu / consts.delta ** 2 if consts.delta > 0 else 1.0
    methods.append(MethodSpec(GradientCorrection(), uniform, gc_gamma, label="sppm-gc"))

    p = SUITE_REFRESH_PROBABILITY
    lsvrp = optimal_stepsize(MethodFamily.LSVRP, consts, p=p)
    methods.append(MethodSpec(LooplessSVRP(p=p), uniform, lsvrp.gamma, label=f"lsvrp[p={p}]"))

    saga = optimal_stepsize(MethodFamily.POINT_SAGA, consts)
    methods.append(MethodSpec(PointSAGA(), uniform, saga.gamma, label="point-saga"))
    return methods


class _Streams:
    """Hands out a fresh generator per check, in a fixed order"""

    def __init__(self, seed: int):
        self.seed = seed
        self.count = 0

    def next(self) -> np.random.Generator:
        self.count += 1
        return rng_new(self.seed, 1000 + self.count)


def _deterministic_cases() -> List[Tuple[MethodSpec, RegressionProblem, np.ndarray]]:
    toy = toy_problem()
    single = single_function_problem()
    return [
        (MethodSpec(OptimalCorrection(), Sampler.uniform(2), 1.0, label="sppm-star"), toy, None),
        (MethodSpec(GradientCorrection(), Sampler.uniform(2), 1.0, label="sppm-gc"), toy, None),
        (MethodSpec(NoCorrection(), Sampler.uniform(1), 1.0, label="sppm"), single,
         np.array([2.0])),
    ]


def verify_all(scale: str = "quick", seed: int = 0) -> List[CheckReport]:
    """
    Run the default suite.

    Args:
        scale: "quick" or "full"
        seed: seed of every random instance and probe

    Returns:
        Reports in a fixed order; identical for identical arguments
    """
    if scale not in SCALES:
        raise ValueError(f"Unknown scale '{scale}', expected one of {sorted(SCALES)}")
    sizes = SCALES[scale]
    streams = _Streams(seed)
    reports: List[CheckReport] = []

    reports.append(check_recurrence_unrolling(sizes.recurrence_cases, rng=streams.next()))

    for index, problem in enumerate(suite_problems(sizes.random_instances, seed)):
        logger.info(f"Verifying {problem.name} (n={problem.n}, d={problem.d})")
        consts = constants(problem)

        reports.append(check_similarity_constants(
            problem, consts, sizes.similarity_probes, rng=streams.next()))
        i = index % problem.n
        reports.append(check_contraction(
            problem, i, float(consts.mu_each[i]), CONTRACTION_STEPSIZES,
            sizes.contraction_pairs, rng=streams.next()))
        reports.append(check_prox_oracle(problem, sizes.oracle_cases, rng=streams.next()))

        for method in suite_methods(problem, consts):
            sampling = sampling_constants(method, problem, consts)
            params = method_params(method, consts, sampling)
            reports.append(check_assumption5(
                method, problem, consts, params, sizes.states, sizes.mc_draws,
                rng=streams.next()))
            reports.append(check_one_step_bound(
                method, problem, consts, params, sizes.states, sizes.mc_draws,
                rng=streams.next(), sampling=sampling))
            reports.append(check_unbiased_correction(
                method, problem, consts, sizes.states, sizes.mc_draws, rng=streams.next()))
            reports.append(check_prox_identity(
                method, problem, consts, sizes.states, rng=streams.next()))
            reports.append(check_certificate_cross_validation(
                method, problem, consts, sizes.cross_validation_cases, rng=streams.next()))
            if problem.d >= 2:
                reports.append(check_lyapunov_recursion(
                    method, problem, consts, method.gamma,
                    theorem_alpha(method, consts, method.gamma),
                    sizes.lyapunov_seeds, sizes.lyapunov_horizon, base_seed=seed))

    for method, problem, x0 in _deterministic_cases():
        consts = constants(problem)
        reports.append(check_lyapunov_recursion(
            method, problem, consts, method.gamma, 1.0, 1, sizes.lyapunov_horizon,
            base_seed=seed, x0=x0))

    failed = [report.name for report in reports if not report.passed]
    if failed:
        logger.error(f"{len(failed)} of {len(reports)} checks failed: {', '.join(failed)}")
    else:
        logger.info(f"All {len(reports)} checks passed")
    return reports
