"""
Small dense linear algebra and seeded randomness shared by the package.

Every matrix here is at most a few dozen rows wide, so the routines favour
exactness and simple failure modes over speed.
"""

import logging
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..exceptions import BadDistribution, NoConvergence, NonPositiveC, NotSPD

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.random.PCG64 seeded by SeedSequence([base_seed, run_index])"

MAX_POWER_ITERATIONS = 100_000
EIGEN_RTOL = 1e-9
PROBABILITY_ATOL = 1e-12
SYMMETRY_RTOL = 1e-12

# start vector of every power iteration comes from this fixed stream
_POWER_SEED = 20240607
_SQUARINGS = 4


def _square(M: ArrayLike, name: str = "M") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} must contain only finite entries")
    return M


def is_symmetric(M: np.ndarray) -> bool:
    scale = np.max(np.abs(M)) if M.size else 0.0
    return bool(np.max(np.abs(M - M.T), initial=0.0) <= SYMMETRY_RTOL * scale)


def solve_spd(M: ArrayLike, rhs: ArrayLike) -> np.ndarray:
    """
    Solve M x = rhs for a symmetric positive definite M by Cholesky.

    Args:
        M: d x d symmetric positive definite matrix
        rhs: right-hand side of length d

    Returns:
        Solution vector x

    Raises:
        NotSPD: factorization met a nonpositive pivot
    """
    M = _square(M)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (M.shape[0],):
        raise ValueError(f"rhs must have length {M.shape[0]}, got shape {rhs.shape}")

    try:
        factor = cho_factor(M, lower=True, check_finite=False)
    except LinAlgError as e:
        raise NotSPD(f"Matrix is not positive definite: {e}") from e

    return cho_solve(factor, rhs, check_finite=False)


def rank_one_spd_solve(c: float, a: ArrayLike, rhs: ArrayLike) -> np.ndarray:
    """Solve (c I + a a^T) x = rhs with the Sherman-Morrison formula"""
    if not c > 0:
        raise NonPositiveC(f"c must be positive, got {c!r}")

    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    return (rhs - a * (a @ rhs) / (c + a @ a)) / c


def extreme_eigenpair(M: ArrayLike, which: str = "largest") -> Tuple[float, np.ndarray]:
    """
    Extreme eigenvalue of a symmetric matrix with a unit eigenvector.

    The largest eigenvalue of a PSD matrix is found by power iteration; the
    smallest one by power iteration on s I - M with s = largest + 1.

    Args:
        M: symmetric matrix (PSD when which="largest")
        which: "largest" or "smallest"

    Returns:
        (eigenvalue, unit eigenvector)

    Raises:
        NoConvergence: the residual test did not pass within MAX_POWER_ITERATIONS
    """
    M = _square(M)
    if not is_symmetric(M):
        raise ValueError("Matrix must be symmetric")
    if which not in ("largest", "smallest"):
        raise ValueError(f"which must be 'largest' or 'smallest', got {which!r}")

    d = M.shape[0]
    if not np.any(M):
        return 0.0, np.eye(d)[0]

    if which == "largest":
        return _power_iteration(M, M)

    top, _ = _power_iteration(M, M)
    shift = top + 1.0
    return _power_iteration(shift * np.eye(d) - M, M)


def _power_iteration(iterated: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    # iterated and target share eigenvectors; the Rayleigh quotient is taken on target
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(iterated.shape[0])
    v /= np.linalg.norm(v)
    scale = np.max(np.abs(target))

    # iterate on a normalized power of the matrix to widen the spectral gap
    power = iterated / np.max(np.abs(iterated))
    for _ in range(_SQUARINGS):
        power = power @ power
        power /= np.max(np.abs(power))

    for iteration in range(1, MAX_POWER_ITERATIONS + 1):
        w = power @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        v = w / norm

        value = float(v @ target @ v)
        residual = np.linalg.norm(target @ v - value * v)
        if residual <= 0.1 * EIGEN_RTOL * max(abs(value), 1e-3 * scale):
            logger.debug(f"Power iteration converged after {iteration} steps")
            return value, v

    raise NoConvergence(
        f"Power iteration did not reach relative tolerance {EIGEN_RTOL} "
        f"within {MAX_POWER_ITERATIONS} iterations")


def extreme_eigenvalue(M: ArrayLike, which: str = "largest") -> float:
    """Extreme eigenvalue of a symmetric matrix, see extreme_eigenpair"""
    value, _ = extreme_eigenpair(M, which)
    return value


def rng_new(base_seed: int, run_index: int) -> np.random.Generator:
    """
    Deterministic generator for one (base_seed, run_index) stream.

    Distinct pairs are mixed by SeedSequence into statistically independent
    PCG64 streams.
    """
    if base_seed < 0 or run_index < 0:
        raise ValueError("base_seed and run_index must be nonnegative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(base_seed), int(run_index)])))


def validate_probabilities(probs: ArrayLike) -> np.ndarray:
    """
    Check that probs is a probability vector and return it as a float array.

    Raises:
        BadDistribution: negative or non-finite entries, or a sum off by more than 1e-12
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise BadDistribution("Probabilities must be a nonempty vector")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise BadDistribution("Probabilities must be finite and nonnegative")
    total = probs.sum()
    if abs(total - 1.0) > PROBABILITY_ATOL:
        raise BadDistribution(f"Probabilities sum to {total!r}, not 1")
    return probs


def sample_categorical(rng: np.random.Generator, probs: ArrayLike) -> int:
    """
    Draw index i with probability probs[i] by inverting the cumulative sum.

    Ties in the cumulative sum resolve toward the lower index, and an index
    with zero probability is never returned.
    """
    probs = validate_probabilities(probs)
    cdf = np.cumsum(probs)
    index = int(np.searchsorted(cdf, rng.random(), side="right"))
    if index >= probs.size:
        # rounding left cdf[-1] slightly below the uniform draw
        index = int(np.flatnonzero(probs > 0)[-1])
    return index
