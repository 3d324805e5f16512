"""
SPPM Benchmark - stochastic proximal point methods on regularized least squares.

This package runs the stochastic proximal point method with its sampling and
variance-reduction variants, computes their theoretical rate certificates and
checks those certificates empirically.

Example usage:
    >>> from sppm_benchmark import SPPMBenchmark, get_preset
    >>> benchmark = SPPMBenchmark()
    >>> outcome = benchmark.run_experiment(get_preset("fig1"), out_dir="results")
    >>> benchmark.print_experiment_report(outcome)
"""

from .core import (
    MethodSpec, Sampler, SPPMBenchmark, ExperimentOutcome,
    constants, create_random_problem, load_problem, toy_problem, similarity_pair_problem,
    run, run_ensemble, step, certificate, optimal_stepsize, theorem_alpha,
)
from .models import (
    RegressionProblem, ProblemConstants, RateCertificate, StepsizeChoice,
    Trajectory, EnsembleResult, CheckReport, CorrectionKind, MethodFamily, SamplingScheme
)
from .methods import (
    CorrectionStrategy, NoCorrection, OptimalCorrection, GradientCorrection,
    LooplessSVRP, PointSAGA, strategy_registry
)
from .config import ExperimentConfig, MethodConfig, PRESETS, get_preset, load_config
from .verification import verify_all

__version__ = "0.1.0"

# Public API
__all__ = [
    # Main classes
    'SPPMBenchmark',
    'ExperimentOutcome',
    'MethodSpec',
    'Sampler',
    'RegressionProblem',
    'ProblemConstants',
    'RateCertificate',
    'StepsizeChoice',
    'Trajectory',
    'EnsembleResult',
    'CheckReport',
    'CorrectionKind',
    'MethodFamily',
    'SamplingScheme',

    # Strategies
    'CorrectionStrategy',
    'NoCorrection',
    'OptimalCorrection',
    'GradientCorrection',
    'LooplessSVRP',
    'PointSAGA',
    'strategy_registry',

    # Functions
    'constants',
    'create_random_problem',
    'load_problem',
    'toy_problem',
    'similarity_pair_problem',
    'run',
    'run_ensemble',
    'step',
    'certificate',
    'optimal_stepsize',
    'theorem_alpha',
    'verify_all',

    # Configuration
    'ExperimentConfig',
    'MethodConfig',
    'PRESETS',
    'get_preset',
    'load_config',
]
