"""
Core functionality for stochastic proximal point experiments.

This module contains the problem model, sampling, the iteration engine,
the convergence theory and the experiment coordinator.
"""

from .numerics import RNG_ALGORITHM, rng_new, solve_spd
from .sampling import Sampler, importance_probabilities, variance_probabilities
from .problem import (
    constants,
    create_random_problem,
    load_problem,
    prox_single,
    prox_subset,
    save_problem,
    similarity_pair_problem,
    toy_problem,
)
from .engine import MethodSpec, apply_sample, run, run_ensemble, step
from .theory import (
    certificate,
    certify_method,
    closed_form_rate,
    method_params,
    optimal_stepsize,
    sampling_constants,
    theorem_alpha,
    validate_certificate_against_closed_form,
)
from .utils import calculate_statistics, time_average, write_trajectory_csv
from .benchmark import ExperimentOutcome, SPPMBenchmark

__all__ = [
    'SPPMBenchmark',
    'ExperimentOutcome',
    'RNG_ALGORITHM',
    'rng_new',
    'solve_spd',
    'Sampler',
    'importance_probabilities',
    'variance_probabilities',
    'constants',
    'create_random_problem',
    'load_problem',
    'prox_single',
    'prox_subset',
    'save_problem',
    'similarity_pair_problem',
    'toy_problem',
    'MethodSpec',
    'apply_sample',
    'run',
    'run_ensemble',
    'step',
    'certificate',
    'certify_method',
    'closed_form_rate',
    'method_params',
    'optimal_stepsize',
    'sampling_constants',
    'theorem_alpha',
    'validate_certificate_against_closed_form',
    'calculate_statistics',
    'time_average',
    'write_trajectory_csv',
]
