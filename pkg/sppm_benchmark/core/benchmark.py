"""
Experiment API.

Module with primary SPPMBenchmark class that coordinates problem management,
method construction, ensemble runs, result comparison and experiment output.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import (
    METHOD_KINDS, METHOD_NAMES, THEORY, THEORY_STEPSIZE_METHODS, VS_PROBABILITY_FLOOR,
    ExperimentConfig, MethodConfig
)
from ..exceptions import ConfigError
from ..methods.base import strategy_registry
from ..models import (
    EnsembleResult, ExperimentCell, ProblemConstants, RegressionProblem, StepsizeChoice
)
from ..visualization.plotters import plot_convergence
from .engine import MethodSpec, default_x0, initial_state, run_ensemble
from .numerics import RNG_ALGORITHM
from .problem import constants, create_random_problem, load_problem
from .sampling import Sampler, importance_probabilities, variance_probabilities
from .theory import (
    certify_method, method_family, optimal_stepsize, sampling_constants, theorem_alpha
)
from .utils import calculate_statistics, time_average, write_trajectory_csv

DEFAULT_RESULTS_DIR = Path("data/experiment_results")

LAMBDA_RULE_NOTE = ("powers-of-two: lambda_i = 2^-((i mod d) + 1) for 0-based i, "
                    "cycling 1/2, ..., 1/2^d over the n functions")


@dataclass
class ExperimentOutcome:
    """Files written by run_experiment and the cells behind them"""

    name: str
    csv_path: Path
    svg_path: Optional[Path]
    metadata_path: Path
    cells: List[ExperimentCell] = field(default_factory=list, repr=False)


class SPPMBenchmark:
    """
    Main API class for stochastic proximal point experiments.

    This class provides a unified interface for managing problem instances,
    building configured methods, running seeded ensembles and writing results.
    """

    def __init__(self, workers: int = 1):
        """
        Initialize the experiment API.

        Args:
            workers: processes per ensemble; 1 runs everything in this process
        """
        self.problems: Dict[str, RegressionProblem] = {}
        self._constants: Dict[str, ProblemConstants] = {}
        self.results: List[EnsembleResult] = []
        self.errors: Dict[str, str] = {}
        self.workers = workers
        self.logger = logging.getLogger(self.__class__.__name__)

    def get_available_methods(self) -> List[str]:
        return list(METHOD_NAMES)

    def get_method_info(self, method_name: Optional[str] = None) -> Dict[str, Any]:
        """
        Get information about methods.

        Args:
            method_name: Specific method name, or None for all methods

        Returns:
            Dictionary with method information
        """
        def info(name: str) -> Dict[str, Any]:
            return {
                'name': name,
                'kind': METHOD_KINDS[name].value,
                'theory_stepsize': name in THEORY_STEPSIZE_METHODS,
            }

        if method_name:
            return info(method_name) if method_name in METHOD_KINDS else {}
        return {name: info(name) for name in METHOD_NAMES}

    def load_problem(self, problem: RegressionProblem):
        """
        Register a problem instance under its name.

        Args:
            problem: problem instance to load
        """
        self.problems[problem.name] = problem
        self._constants.pop(problem.name, None)
        self.logger.info(f"Loaded problem: {problem.name} (n={problem.n}, d={problem.d})")

    def load_problem_from_file(self, filepath: Union[str, Path]) -> RegressionProblem:
        problem = load_problem(filepath)
        self.load_problem(problem)
        return problem

    def create_random_problem(self, name: str, n: int, d: int, seed: int = 42,
                              **kwargs) -> RegressionProblem:
        """
        Create and load a random instance.

        Args:
            name: Name for the instance
            n: number of functions
            d: dimension
            seed: data seed
            **kwargs: lambda_rule and zero_targets, see create_random_problem
        """
        problem = create_random_problem(n, d, seed=seed, name=name, **kwargs)
        self.load_problem(problem)
        return problem

    def get_problem(self, problem_name: str) -> Optional[RegressionProblem]:
        return self.problems.get(problem_name)

    def list_problems(self) -> List[str]:
        return list(self.problems.keys())

    def _require_problem(self, problem_name: str) -> RegressionProblem:
        if problem_name not in self.problems:
            raise ValueError(f"Problem '{problem_name}' not found")
        return self.problems[problem_name]

    def get_constants(self, problem_name: str) -> ProblemConstants:
        """Constants of a loaded problem, computed once"""
        problem = self._require_problem(problem_name)
        if problem_name not in self._constants:
            consts = constants(problem)
            self._constants[problem_name] = consts
            self.logger.info(
                f"Constants of {problem_name}: mu={consts.mu:.4g}, "
                f"sigma*^2={consts.sigma_star_sq:.4g}, delta={consts.delta:.4g}, nu={consts.nu:.4g}")
        return self._constants[problem_name]

    def make_sampler(self, problem_name: str, method_config: MethodConfig) -> Sampler:
        """Sampler a configured method draws from"""
        problem = self._require_problem(problem_name)
        name = method_config.name
        if name == "sppm" and method_config.probs is not None:
            return Sampler.singleton(method_config.probs)
        if name == "sppm-is":
            return Sampler.singleton(importance_probabilities(self.get_constants(problem_name).mu_each))
        if name == "sppm-vs":
            norms = self.get_constants(problem_name).grad_norms_at_star
            return Sampler.singleton(variance_probabilities(norms, floor=VS_PROBABILITY_FLOOR))
        if name == "sppm-nice":
            return Sampler.nice(problem.n, method_config.tau)
        if name == "sppm-block":
            return Sampler.block(method_config.blocks, method_config.block_probs)
        if name == "sppm-stratified":
            return Sampler.stratified(method_config.blocks)
        return Sampler.uniform(problem.n)

    def build_method(self, problem_name: str, method_config: MethodConfig,
                     gamma_setting: Union[float, str], iterations: int,
                     path: str = "method") -> Tuple[MethodSpec, Optional[float], Optional[StepsizeChoice]]:
        """
        Turn a method entry into a runnable MethodSpec.

        Args:
            problem_name: loaded problem the method runs on
            method_config: method entry
            gamma_setting: one configured stepsize, a number or "theory"
            iterations: steps per run
            path: field path of the entry, used in errors

        Returns:
            (method, Lyapunov weight or None, stepsize choice when gamma came from theory)

        Raises:
            ConfigError: the entry does not describe a valid method on this problem
        """
        problem = self._require_problem(problem_name)
        consts = self.get_constants(problem_name)
        try:
            sampler = self.make_sampler(problem_name, method_config)
            if sampler.n != problem.n:
                raise ConfigError(path, f"sampler covers {sampler.n} functions, problem has {problem.n}")
            extras = {"p": method_config.p} if method_config.name == "lsvrp" else {}
            strategy = strategy_registry.create(method_config.kind, **extras)
            gamma = 1.0 if gamma_setting == THEORY else float(gamma_setting)
            method = MethodSpec(strategy, sampler, gamma, iterations,
                                label=method_config.display_name())
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(path, str(e), cause=e) from e

        choice = None
        if gamma_setting == THEORY:
            sampling = sampling_constants(method, problem, consts)
            choice = optimal_stepsize(method, consts, epsilon=method_config.epsilon,
                                      sampling=sampling)
            if choice.unbounded:
                raise ConfigError(f"{path}.gamma",
                                  f"every stepsize converges for {method_config.name} on "
                                  f"{problem_name}; give a number")
            method = replace(method, gamma=choice.gamma)

        alpha = None
        if method_config.alpha == THEORY:
            if choice is not None and choice.alpha is not None:
                alpha = choice.alpha
            else:
                alpha = theorem_alpha(method, consts, method.gamma)
        elif method_config.alpha is not None:
            alpha = float(method_config.alpha)
        if alpha is not None:
            method = replace(method, record_lyapunov_alpha=alpha)
        return method, alpha, choice

    def run_method(self, problem_name: str, method: MethodSpec, runs: int = 1,
                   base_seed: int = 0, x0: Optional[np.ndarray] = None,
                   keep_trajectories: bool = False) -> EnsembleResult:
        """
        Run an ensemble of a configured method on a loaded problem.

        Args:
            problem_name: Name of the problem
            method: configured method
            runs: number of independent runs
            base_seed: experiment seed
            x0: starting point, default start when None
            keep_trajectories: attach every run to the result

        Returns:
            Ensemble result
        """
        problem = self._require_problem(problem_name)
        consts = self.get_constants(problem_name)

        self.logger.info(
            f"Running '{method.name}' on '{problem_name}' "
            f"(gamma: {method.gamma:.4g}, runs: {runs}, iterations: {method.iterations})"
        )
        result = run_ensemble(method, problem, consts, x0=x0, base_seed=base_seed,
                              num_runs=runs, workers=self.workers,
                              keep_trajectories=keep_trajectories)
        self.results.append(result)
        return result

    def benchmark(self, problem_name: str, methods: List[MethodSpec], runs: int = 1,
                  base_seed: int = 0,
                  x0: Optional[np.ndarray] = None) -> Dict[str, Optional[EnsembleResult]]:
        """
        Run several methods on the same problem.

        Args:
            problem_name: name of the problem
            methods: configured methods
            runs: runs per method
            base_seed: experiment seed shared by all methods
            x0: shared starting point

        Returns:
            Dictionary mapping method names to results, None for failed methods
        """
        self._require_problem(problem_name)
        self.logger.info(f"Benchmarking problem '{problem_name}' with {len(methods)} methods")

        results: Dict[str, Optional[EnsembleResult]] = {}
        for method in methods:
            try:
                results[method.name] = self.run_method(problem_name, method, runs, base_seed, x0)
            except Exception as e:
                self.logger.error(f"Failed to run {method.name}: {e}")
                self.errors[method.name] = str(e)
                results[method.name] = None
        return results

    def compare_results(self, results: Dict[str, Optional[EnsembleResult]]) -> Dict[str, Any]:
        """
        Compare ensembles run on the same problem.

        The neighborhood of each method is its mean squared distance averaged
        over the second half of the run.

        Args:
            results: Dictionary mapping method names to results

        Returns:
            Dictionary with comparison statistics
        """
        if not results:
            return {}

        valid = {name: result for name, result in results.items() if result is not None}
        if not valid:
            return {
                'error': 'No valid results to compare',
                'all_failed': True
            }

        finals = {name: float(r.mean_sq_dist[-1]) for name, r in valid.items()}
        neighborhoods = {
            name: time_average(r.mean_sq_dist, len(r.mean_sq_dist) // 2)
            for name, r in valid.items()
        }
        best_method = min(finals, key=finals.get)
        best = finals[best_method]

        comparison = {
            'best_method': best_method,
            'best_final_sq_dist': best,
            'final_sq_dist': finals,
            'neighborhood': neighborhoods,
            'final_statistics': calculate_statistics(finals.values()),
            'total_methods': len(results),
            'successful_methods': len(valid),
            'failed_methods': len(results) - len(valid),
        }
        if len(valid) > 1 and best > 0:
            comparison['ratio_to_best'] = {name: value / best for name, value in finals.items()}
        return comparison

    def export_results(self, filename: str, include_problems: bool = False,
                       directory: Union[str, Path] = DEFAULT_RESULTS_DIR) -> Path:
        """
        Export ensemble summaries to a JSON file.

        Args:
            filename: Output file name
            include_problems: Whether to include problem data in export
            directory: Output directory

        Returns:
            Path of the written file
        """
        export_data: Dict[str, Any] = {
            'metadata': {
                'num_results': len(self.results),
                'num_problems': len(self.problems),
                'rng_algorithm': RNG_ALGORITHM,
            },
            'results': [result.to_dict() for result in self.results]
        }
        if include_problems:
            export_data['problems'] = {
                name: problem.to_dict() for name, problem in self.problems.items()
            }

        filepath = Path(directory) / filename
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(export_data, f, indent=2)

        self.logger.info(f"Results exported to {filepath}")
        return filepath

    def import_results(self, filepath: Union[str, Path]) -> int:
        """
        Import ensemble summaries from a JSON file.

        Returns:
            Number of results imported
        """
        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)

        for name, problem_data in data.get('problems', {}).items():
            self.load_problem(RegressionProblem.from_dict(problem_data, name=name))

        imported_count = 0
        for result_data in data.get('results', []):
            self.results.append(EnsembleResult.from_dict(result_data))
            imported_count += 1

        self.logger.info(f"Imported {imported_count} results from {filepath}")
        return imported_count

    def get_results_summary(self) -> Dict[str, Any]:
        """
        Get summary statistics of all results, grouped by method label.
        """
        if not self.results:
            return {'total_results': 0}

        by_label: Dict[str, List[EnsembleResult]] = {}
        for result in self.results:
            by_label.setdefault(result.label, []).append(result)

        method_stats = {
            label: {
                'ensembles': len(results),
                'total_runs': sum(r.num_runs for r in results),
                'final_sq_dist': calculate_statistics(r.mean_sq_dist[-1] for r in results),
            }
            for label, results in by_label.items()
        }
        return {
            'total_results': len(self.results),
            'unique_methods': len(by_label),
            'failed_methods': dict(self.errors),
            'method_statistics': method_stats,
        }

    def clear_results(self):
        """clear all stored results"""
        self.results.clear()
        self.errors.clear()
        self.logger.info("Cleared all results")

    def clear_problems(self):
        """clear all loaded problems"""
        self.problems.clear()
        self._constants.clear()
        self.logger.info("Cleared all problems")

    def clear_all(self):
        self.clear_results()
        self.clear_problems()

    def certify(self, problem_name: str, method_config: MethodConfig,
                gamma_setting: Union[float, str] = THEORY) -> Dict[str, Any]:
        """
        Rate certificate of a method at one stepsize, with the recommended
        stepsize and its iteration count for method_config.epsilon.

        The weight alpha is the configured one, or the method's own when
        unset. The iteration count starts from the default x0.

        Raises:
            ConfigError: invalid method entry
            CertificateInvalid: (gamma, alpha) outside the valid region
        """
        problem = self._require_problem(problem_name)
        consts = self.get_constants(problem_name)
        method, alpha, choice = self.build_method(problem_name, method_config, gamma_setting,
                                                  iterations=1, path="certify")
        cert = certify_method(method, problem, consts, alpha)
        if choice is None:
            choice = optimal_stepsize(method, consts, epsilon=method_config.epsilon,
                                      sampling=sampling_constants(method, problem, consts))

        x0 = default_x0(consts.x_star)
        state = initial_state(method.strategy, problem, x0)
        diff = x0 - consts.x_star
        psi0 = float(diff @ diff) + (choice.alpha or 0.0) * method.strategy.sigma_sq(state, consts.x_star)

        return {
            'method': method.name,
            'family': method_family(method).value,
            'problem': problem_name,
            'gamma': method.gamma,
            'alpha': cert.alpha,
            'theta': cert.theta,
            'zeta': cert.zeta,
            'neighborhood': cert.neighborhood,
            'gamma_star': choice.gamma,
            'alpha_star': choice.alpha,
            'complexity_factor': choice.complexity_factor,
            'epsilon': method_config.epsilon,
            'psi0': psi0,
            'iterations': choice.iterations(method_config.epsilon, psi0),
        }

    def run_experiment(self, config: ExperimentConfig,
                       out_dir: Union[str, Path] = DEFAULT_RESULTS_DIR) -> ExperimentOutcome:
        """
        Run a whole experiment and write its CSV, optional SVG and metadata.

        Every (method, stepsize) cell uses runs 0..runs-1 of config.base_seed,
        so all cells share their random streams.

        Args:
            config: validated experiment
            out_dir: directory of the output files

        Returns:
            Paths of the written files with the cells
        """
        pc = config.problem
        problem = self.create_random_problem(
            config.name, pc.n, pc.d, seed=pc.data_seed,
            lambda_rule=pc.lambda_rule, zero_targets=pc.zero_targets)
        consts = self.get_constants(problem.name)

        if config.x0 == "default":
            x0 = None
        elif config.x0 == "zeros":
            x0 = np.zeros(problem.d)
        else:
            x0 = np.asarray(config.x0, dtype=float)

        self.logger.info(
            f"Running experiment '{config.name}': {len(config.methods)} methods, "
            f"{config.runs} runs of {config.iterations} iterations")

        cells: List[ExperimentCell] = []
        records: List[Dict[str, Any]] = []
        for j, method_config in enumerate(config.methods):
            for gamma_setting in method_config.gammas():
                method, alpha, choice = self.build_method(
                    problem.name, method_config, gamma_setting, config.iterations,
                    path=f"methods[{j}]")
                try:
                    result = self.run_method(problem.name, method, config.runs,
                                             config.base_seed, x0, keep_trajectories=True)
                except Exception as e:
                    self.logger.error(f"Failed to run {method.name} (gamma={method.gamma!r}): {e}")
                    self.errors[f"{method.name}@{method.gamma!r}"] = str(e)
                    continue
                cells.append(ExperimentCell(label=method.name, gamma_setting=gamma_setting,
                                            gamma=method.gamma, alpha=alpha, result=result))
                records.append({
                    'method': method.name,
                    'gamma_setting': gamma_setting,
                    'gamma': method.gamma,
                    'alpha': alpha,
                    'sampler': method.sampler.describe(),
                    'complexity_factor': None if choice is None else choice.complexity_factor,
                })

        out_dir = Path(out_dir)
        csv_path = out_dir / config.output.csv
        write_trajectory_csv(csv_path, cells)

        svg_path = None
        if config.output.svg:
            svg_path = plot_convergence(cells, out_dir / config.output.svg, title=config.name)

        metadata = {
            'experiment': config.to_dict(),
            'rng_algorithm': RNG_ALGORITHM,
            'seeds': {'base_seed': config.base_seed, 'data_seed': pc.data_seed,
                      'runs': config.runs},
            'lambda_rule': pc.lambda_rule,
            'problem': {'name': problem.name, 'n': problem.n, 'd': problem.d},
            'constants': {'mu': consts.mu, 'sigma_star_sq': consts.sigma_star_sq,
                          'delta': consts.delta, 'nu': consts.nu},
            'cells': records,
        }
        if pc.lambda_rule == "powers-of-two":
            metadata['lambda_rule_note'] = LAMBDA_RULE_NOTE

        metadata_path = out_dir / f"{Path(config.output.csv).stem}.meta.json"
        with open(metadata_path, 'w', encoding='utf-8') as f:
            json.dump(metadata, f, indent=2, sort_keys=True)
            f.write("\n")

        self.logger.info(f"Experiment '{config.name}' finished: {len(cells)} cells")
        return ExperimentOutcome(name=config.name, csv_path=csv_path, svg_path=svg_path,
                                 metadata_path=metadata_path, cells=cells)

    def print_experiment_report(self, outcome: ExperimentOutcome):
        """
        Print a formatted experiment report.

        Args:
            outcome: result of run_experiment()
        """
        print("\n" + "=" * 60)
        print(f"EXPERIMENT REPORT: {outcome.name}")
        print("=" * 60)
        for cell in outcome.cells:
            mean = cell.result.mean_sq_dist
            print(f"{cell.label:<24} gamma={cell.gamma:<12.4g} "
                  f"start={mean[0]:.3e} final={mean[-1]:.3e}")
        print("-" * 60)
        print(f"CSV:      {outcome.csv_path}")
        if outcome.svg_path is not None:
            print(f"SVG:      {outcome.svg_path}")
        print(f"Metadata: {outcome.metadata_path}")
