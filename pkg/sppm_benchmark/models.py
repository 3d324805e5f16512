"""
All data structures used throughout the API
"""

import json
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np


class CorrectionKind(Enum):
    NONE = "none"
    STAR = "star"
    GC = "gc"
    LSVRP = "lsvrp"
    POINT_SAGA = "point_saga"


class SamplingScheme(Enum):
    FULL = "full"
    SINGLETON = "singleton"
    NICE = "nice"
    BLOCK = "block"
    STRATIFIED = "stratified"


class MethodFamily(Enum):
    """Theorem family a configured method belongs to"""

    SPPM = "sppm"
    SPPM_NS = "sppm-ns"
    SPPM_AS = "sppm-as"
    SPPM_STAR = "sppm-star"
    SPPM_GC = "sppm-gc"
    LSVRP = "lsvrp"
    POINT_SAGA = "point-saga"

    @property
    def variance_reduced(self) -> bool:
        return self in (MethodFamily.SPPM_STAR, MethodFamily.SPPM_GC,
                        MethodFamily.LSVRP, MethodFamily.POINT_SAGA)


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} must contain only finite entries")
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class RegressionProblem:
    """
    Regularized least-squares finite sum.

    f_i(x) = 1/2 (a_i^T x - b_i)^2 + lambda_i ||x||^2 and f = (1/n) sum_i f_i.

    Attributes:
        A: n x d data matrix, row i is a_i
        b: targets, length n
        lambdas: per-function ridge weights, all positive
        name: instance ID
    """

    A: np.ndarray
    b: np.ndarray
    lambdas: np.ndarray
    name: str = "problem"

    def __post_init__(self):
        A = _frozen_array(self.A, 2, "A")
        b = _frozen_array(self.b, 1, "b")
        lambdas = _frozen_array(self.lambdas, 1, "lambdas")

        n, d = A.shape
        if n < 1 or d < 1:
            raise ValueError("Problem must have n >= 1 and d >= 1")
        if b.shape != (n,):
            raise ValueError(f"b must have length {n}, got {b.shape[0]}")
        if lambdas.shape != (n,):
            raise ValueError(f"lambdas must have length {n}, got {lambdas.shape[0]}")
        if np.any(lambdas <= 0):
            raise ValueError("Every lambda_i must be positive")

        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lambdas", lambdas)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def to_dict(self) -> Dict:
        """Convert problem to the JSON fixture format"""
        return {
            "n": self.n,
            "d": self.d,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "lambdas": self.lambdas.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict, name: Optional[str] = None) -> "RegressionProblem":
        """Create problem from the JSON fixture format"""
        problem = cls(
            A=data["A"],
            b=data["b"],
            lambdas=data["lambdas"],
            name=name or data.get("name", "problem"),
        )
        if "n" in data and data["n"] != problem.n:
            raise ValueError(f"Declared n={data['n']} but A has {problem.n} rows")
        if "d" in data and data["d"] != problem.d:
            raise ValueError(f"Declared d={data['d']} but A has {problem.d} columns")
        return problem


@dataclass(frozen=True)
class ProblemConstants:
    """
    Exact minimizer and the constants the convergence rates consume.

    Attributes:
        x_star: unique minimizer of f
        mu_each: strong convexity constant of every f_i
        mu: min of mu_each
        sigma_star_sq: mean squared norm of the gradients at x_star
        delta: similarity constant
        nu: multi-point similarity constant used by Point SAGA
        grad_at_star: n x d matrix, row i is grad f_i(x_star)
    """

    x_star: np.ndarray
    mu_each: np.ndarray
    mu: float
    sigma_star_sq: float
    delta: float
    nu: float
    grad_at_star: np.ndarray

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.sigma_star_sq < 0:
            raise ValueError("sigma_star_sq cannot be negative")
        if self.delta < 0:
            raise ValueError("delta cannot be negative")
        if self.nu < max(self.delta, 0.0):
            raise ValueError("nu cannot be smaller than delta")

    @property
    def n(self) -> int:
        return self.grad_at_star.shape[0]

    @property
    def grad_norms_at_star(self) -> np.ndarray:
        return np.linalg.norm(self.grad_at_star, axis=1)


@dataclass(frozen=True)
class SampledSubset:
    """Indices drawn by a sampler with their weights 1/(n p_i), sorted by index"""

    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.indices) == 0:
            raise ValueError("A sampled subset cannot be empty")
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights must have equal length")

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def single(self) -> int:
        """The index of a one-element subset"""
        if self.size != 1:
            raise ValueError(f"Expected a single index, got {self.size}")
        return int(self.indices[0])


@dataclass(frozen=True)
class SamplingConstants:
    """
    Strong convexity and gradient-noise constants induced by a sampler.

    standard_error is zero when sigma_star_sq was enumerated exactly.
    """

    mu: float
    sigma_star_sq: float
    standard_error: float = 0.0
    exact: bool = True


@dataclass(frozen=True)
class AssumptionParams:
    """The six constants of the two parametric recursions"""

    A1: float = 0.0
    B1: float = 0.0
    C1: float = 0.0
    A2: float = 0.0
    B2: float = 0.0
    C2: float = 0.0

    def __post_init__(self):
        for name, value in zip(("A1", "B1", "C1", "A2", "B2", "C2"), self.as_tuple()):
            if not value >= 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if not self.B2 < 1:
            raise ValueError(f"B2 must be smaller than 1, got {self.B2}")

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.A1, self.B1, self.C1, self.A2, self.B2, self.C2)

    @property
    def variance_reduced(self) -> bool:
        return self.C1 == 0 and self.C2 == 0


@dataclass(frozen=True)
class RateCertificate:
    """
    Contraction factor theta and additive term zeta of the Lyapunov bound
    E[Psi_k] <= theta^k Psi_0 + zeta / (1 - theta).
    """

    theta: float
    zeta: float
    neighborhood: float
    alpha: float

    def bound(self, k: int, psi0: float) -> float:
        return self.theta ** k * psi0 + self.neighborhood

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class ClosedFormRate:
    """Per-step contraction factor and additive neighborhood of a theorem"""

    factor: float
    neighborhood: float


@dataclass(frozen=True)
class StepsizeChoice:
    """
    Output of a stepsize selector.

    Attributes:
        gamma: selected stepsize, math.inf when any stepsize works and larger is better
        alpha: Lyapunov weight the selector pairs with gamma, if any
        complexity_factor: multiplier in front of the logarithm
        log_scale: the logarithm's argument is log_scale * psi0 / epsilon
        unbounded: True when gamma is not a finite number
        balance_gap: relative gap between the two branches of the rate at gamma
    """

    gamma: float
    alpha: Optional[float]
    complexity_factor: float
    log_scale: float = 1.0
    unbounded: bool = False
    balance_gap: float = 0.0

    def iterations(self, epsilon: float, psi0: float) -> int:
        """Smallest iteration count the complexity bound guarantees"""
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.unbounded:
            return 1
        ratio = self.log_scale * psi0 / epsilon
        if ratio <= 1.0:
            return 0
        return int(math.ceil(self.complexity_factor * math.log(ratio)))


@dataclass
class Trajectory:
    """
    One seeded run.

    Attributes:
        sq_dist: ||x_k - x_star||^2 for k = 0..iterations
        lyapunov: Psi_k for k = 0..iterations, None when no alpha was given
        sampled: index set drawn at every iteration
        base_seed, run_index: stream identifiers
        rng_algorithm: name of the generator behind the stream
    """

    sq_dist: np.ndarray
    lyapunov: Optional[np.ndarray]
    sampled: List[np.ndarray]
    base_seed: int
    run_index: int
    rng_algorithm: str

    def __post_init__(self):
        if len(self.sq_dist) != len(self.sampled) + 1:
            raise ValueError("sq_dist must hold one more entry than sampled")
        if self.lyapunov is not None and len(self.lyapunov) != len(self.sq_dist):
            raise ValueError("lyapunov and sq_dist lengths differ")
        if not np.all(self.sq_dist >= 0):
            raise ValueError("Squared distances must be nonnegative")

    @property
    def iterations(self) -> int:
        return len(self.sampled)


@dataclass
class EnsembleResult:
    """Per-iteration mean and standard error over independent runs"""

    label: str
    gamma: float
    num_runs: int
    mean_sq_dist: np.ndarray
    se_sq_dist: np.ndarray
    mean_lyapunov: Optional[np.ndarray] = None
    se_lyapunov: Optional[np.ndarray] = None
    trajectories: List[Trajectory] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict:
        """Convert summary (without trajectories) to a JSON-ready dictionary"""
        return {
            "label": self.label,
            "gamma": self.gamma,
            "num_runs": self.num_runs,
            "mean_sq_dist": self.mean_sq_dist.tolist(),
            "se_sq_dist": self.se_sq_dist.tolist(),
            "mean_lyapunov": None if self.mean_lyapunov is None else self.mean_lyapunov.tolist(),
            "se_lyapunov": None if self.se_lyapunov is None else self.se_lyapunov.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EnsembleResult":
        def optional(key):
            return None if data.get(key) is None else np.asarray(data[key], dtype=float)

        return cls(
            label=data["label"],
            gamma=data["gamma"],
            num_runs=data["num_runs"],
            mean_sq_dist=np.asarray(data["mean_sq_dist"], dtype=float),
            se_sq_dist=np.asarray(data["se_sq_dist"], dtype=float),
            mean_lyapunov=optional("mean_lyapunov"),
            se_lyapunov=optional("se_lyapunov"),
        )


@dataclass
class CheckReport:
    """
    Outcome of one verification check.

    worst_margin is the most violating slack found; negative means the
    checked inequality was violated.
    """

    name: str
    passed: bool
    worst_margin: float
    samples: int
    tolerance: float = 0.0
    notes: str = ""

    def __post_init__(self):
        if self.passed != (self.worst_margin >= -self.tolerance):
            raise ValueError("passed must agree with worst_margin and tolerance")

    @classmethod
    def from_margin(cls, name: str, worst_margin: float, samples: int,
                    tolerance: float = 0.0, notes: str = "") -> "CheckReport":
        return cls(
            name=name,
            passed=bool(worst_margin >= -tolerance),
            worst_margin=float(worst_margin),
            samples=int(samples),
            tolerance=tolerance,
            notes=notes,
        )

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class ExperimentCell:
    """
    One (method, stepsize) cell of an experiment grid.

    Attributes:
        label: method display name
        gamma_setting: the configured stepsize, a number or "theory"
        gamma: the stepsize actually used
        alpha: Lyapunov weight recorded, if any
        result: ensemble over all runs, with trajectories attached
    """

    label: str
    gamma_setting: Union[float, str]
    gamma: float
    alpha: Optional[float]
    result: EnsembleResult
