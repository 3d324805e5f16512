"""
The stochastic proximal point loop with learned correction.

Every iteration draws a sample, asks the correction strategy for h_k, and
takes x_{k+1} = prox_{gamma f_C}(x_k + gamma h_k). The strategies in
sppm_benchmark.methods decide h_k and the control state; this module owns
the loop, the seeded streams and ensemble statistics.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import NonPositiveGamma
from ..methods.base import ControlState, CorrectionStrategy
from ..models import (
    CorrectionKind, EnsembleResult, ProblemConstants, RegressionProblem,
    SampledSubset, Trajectory
)
from .numerics import RNG_ALGORITHM, rng_new
from .problem import prox_single, prox_subset
from .sampling import Sampler

logger = logging.getLogger(__name__)

DEFAULT_X0_DISTANCE = 10.0


@dataclass(frozen=True)
class MethodSpec:
    """
    A fully configured method.

    Attributes:
        strategy: correction strategy
        sampler: sampling scheme; corrected methods need uniform single-index sampling
        gamma: stepsize
        iterations: number of steps taken by run
        record_lyapunov_alpha: weight alpha of Psi_k = ||x_k - x*||^2 + alpha sigma_k^2, if recorded
        label: display name, defaults to the strategy's method name
    """

    strategy: CorrectionStrategy
    sampler: Sampler
    gamma: float
    iterations: int = 100
    record_lyapunov_alpha: Optional[float] = None
    label: Optional[str] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise NonPositiveGamma(f"Stepsize must be positive, got {self.gamma!r}")
        if self.iterations < 0:
            raise ValueError("iterations cannot be negative")
        if self.record_lyapunov_alpha is not None and not self.record_lyapunov_alpha >= 0:
            raise ValueError("Lyapunov weight alpha must be nonnegative")
        if not self.sampler.proper:
            raise ValueError(f"Sampler {self.sampler.describe()} is not proper")
        if self.strategy.requires_uniform_singleton and not self.sampler.is_uniform_singleton:
            raise ValueError(
                f"{self.strategy.get_method_name()} needs uniform single-index sampling, "
                f"got {self.sampler.describe()}")

    @property
    def kind(self) -> CorrectionKind:
        return self.strategy.kind

    @property
    def name(self) -> str:
        return self.label or self.strategy.get_method_name()


@dataclass(frozen=True)
class StepResult:
    """Outcome of one iteration: next iterate, next state, the sample and h_k"""

    x: np.ndarray
    state: ControlState
    sample: SampledSubset
    correction: np.ndarray


def default_x0(x_star: ArrayLike) -> np.ndarray:
    """x* shifted along the all-ones direction to distance 10"""
    x_star = np.asarray(x_star, dtype=float)
    return x_star + DEFAULT_X0_DISTANCE / np.sqrt(x_star.size) * np.ones(x_star.size)


def initial_state(strategy: CorrectionStrategy, problem: RegressionProblem,
                  x0: ArrayLike) -> ControlState:
    """Control state at k = 0; every control point starts at x0"""
    return strategy.init_state(problem, np.asarray(x0, dtype=float))


def correction(strategy: CorrectionStrategy, state: ControlState, problem: RegressionProblem,
               consts: ProblemConstants, x_k: ArrayLike, sample: SampledSubset) -> np.ndarray:
    return strategy.correction(state, problem, consts, np.asarray(x_k, dtype=float), sample)


def sigma_sq(strategy: CorrectionStrategy, state: ControlState, x_star: ArrayLike) -> float:
    return strategy.sigma_sq(state, np.asarray(x_star, dtype=float))


def step(method: MethodSpec, problem: RegressionProblem, consts: ProblemConstants,
         x_k: ArrayLike, state: ControlState, rng: np.random.Generator) -> StepResult:
    """
    One iteration.

    The sample is drawn first; a refresh coin, if the strategy flips one, is
    drawn from the same stream afterwards.
    """
    x_k = np.asarray(x_k, dtype=float)
    sample = method.sampler.draw(rng)
    x_next, h = apply_sample(method, problem, consts, x_k, state, sample)
    next_state = method.strategy.update_state(state, problem, x_next, sample, rng)
    return StepResult(x=x_next, state=next_state, sample=sample, correction=h)


def apply_sample(method: MethodSpec, problem: RegressionProblem, consts: ProblemConstants,
                 x_k: np.ndarray, state: ControlState,
                 sample: SampledSubset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Next iterate for a given sample, without touching the control state.

    Subset sampling takes the prox of sum_{i in C} f_i / (n p_i) at x_k;
    corrected methods take the prox of f_i at x_k + gamma h_k.

    Returns:
        (x_{k+1}, h_k)
    """
    h = method.strategy.correction(state, problem, consts, x_k, sample)
    if method.kind == CorrectionKind.NONE:
        x_next = prox_subset(problem, sample.indices, sample.weights, method.gamma, x_k)
    else:
        x_next = prox_single(problem, sample.single, method.gamma, x_k + method.gamma * h)
    return x_next, h


def run(method: MethodSpec, problem: RegressionProblem, consts: ProblemConstants,
        x0: Optional[ArrayLike] = None, base_seed: int = 0, run_index: int = 0) -> Trajectory:
    """
    Run method.iterations steps from x0 on the (base_seed, run_index) stream.

    Args:
        method: configured method
        problem: problem instance
        consts: constants of problem
        x0: starting point, default_x0(x*) when omitted
        base_seed: experiment seed
        run_index: index of this run within the experiment

    Returns:
        Trajectory with squared distances (and Psi_k when alpha is set)
    """
    if method.iterations < 1:
        raise ValueError("run needs at least one iteration")

    x_star = consts.x_star
    x = default_x0(x_star) if x0 is None else np.array(x0, dtype=float)
    state = initial_state(method.strategy, problem, x)
    rng = rng_new(base_seed, run_index)
    alpha = method.record_lyapunov_alpha

    sq_dist = np.empty(method.iterations + 1)
    lyapunov = np.empty(method.iterations + 1) if alpha is not None else None
    sampled: List[np.ndarray] = []

    def record(k: int):
        diff = x - x_star
        sq_dist[k] = diff @ diff
        if lyapunov is not None:
            lyapunov[k] = sq_dist[k] + alpha * method.strategy.sigma_sq(state, x_star)

    record(0)
    for k in range(1, method.iterations + 1):
        result = step(method, problem, consts, x, state, rng)
        x, state = result.x, result.state
        sampled.append(result.sample.indices)
        record(k)

    return Trajectory(
        sq_dist=sq_dist,
        lyapunov=lyapunov,
        sampled=sampled,
        base_seed=base_seed,
        run_index=run_index,
        rng_algorithm=RNG_ALGORITHM,
    )


class _RunningMoments:
    """Welford accumulator over equally shaped arrays"""

    def __init__(self):
        self.count = 0
        self.mean = None
        self.m2 = None

    def add(self, values: np.ndarray):
        self.count += 1
        if self.mean is None:
            self.mean = values.astype(float).copy()
            self.m2 = np.zeros_like(self.mean)
            return
        delta = values - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (values - self.mean)

    def standard_error(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        variance = np.maximum(self.m2, 0.0) / (self.count - 1)
        return np.sqrt(variance / self.count)


def _run_cell(args) -> Trajectory:
    method, problem, consts, x0, base_seed, run_index = args
    return run(method, problem, consts, x0, base_seed, run_index)


def run_ensemble(method: MethodSpec, problem: RegressionProblem, consts: ProblemConstants,
                 x0: Optional[ArrayLike] = None, base_seed: int = 0, num_runs: int = 1,
                 workers: int = 1, keep_trajectories: bool = False) -> EnsembleResult:
    """
    Independent runs with per-iteration mean and standard error.

    Run r uses the stream (base_seed, r). Moments are accumulated in run
    order, so the result does not depend on worker scheduling.

    Args:
        method: configured method
        problem: problem instance
        consts: constants of problem
        x0: shared starting point
        base_seed: experiment seed
        num_runs: number of runs, at least 1
        workers: process count; 1 runs everything in this process
        keep_trajectories: attach every Trajectory to the result
    """
    if num_runs < 1:
        raise ValueError("num_runs must be at least 1")

    logger.info(f"Running {num_runs} runs of {method.name} "
                f"(gamma={method.gamma!r}, {method.iterations} iterations)")

    cells = [(method, problem, consts, x0, base_seed, r) for r in range(num_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajectories = pool.map(_run_cell, cells)
            return _aggregate(method, trajectories, keep_trajectories)
    return _aggregate(method, map(_run_cell, cells), keep_trajectories)


def _aggregate(method: MethodSpec, trajectories, keep: bool) -> EnsembleResult:
    sq_dist = _RunningMoments()
    lyapunov = _RunningMoments()
    kept = []
    for trajectory in trajectories:
        sq_dist.add(trajectory.sq_dist)
        if trajectory.lyapunov is not None:
            lyapunov.add(trajectory.lyapunov)
        if keep:
            kept.append(trajectory)

    has_lyapunov = lyapunov.count > 0
    logger.info(f"Finished {sq_dist.count} runs of {method.name}: "
                f"final mean sq_dist {sq_dist.mean[-1]:.3e}")
    return EnsembleResult(
        label=method.name,
        gamma=method.gamma,
        num_runs=sq_dist.count,
        mean_sq_dist=sq_dist.mean,
        se_sq_dist=sq_dist.standard_error(),
        mean_lyapunov=lyapunov.mean if has_lyapunov else None,
        se_lyapunov=lyapunov.standard_error() if has_lyapunov else None,
        trajectories=kept,
    )
