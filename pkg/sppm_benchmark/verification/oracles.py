"""
Reference minimizers that share no code path with the closed-form solvers.
"""

import logging
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import NoConvergence, NonPositiveGamma
from ..models import RegressionProblem

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-11
ORACLE_MAX_ITERATIONS = 10 ** 6


def prox_oracle(problem: RegressionProblem, C: Sequence[int], weights: ArrayLike,
                gamma: float, v: ArrayLike, tol: float = ORACLE_TOLERANCE,
                max_iter: int = ORACLE_MAX_ITERATIONS) -> np.ndarray:
    """
    Minimize sum_j w_j f_{C_j}(x) + ||x - v||^2 / (2 gamma) iteratively.

    Runs accelerated gradient descent with the subproblem's exact smoothness
    L and strong convexity m (extreme eigenvalues of its Hessian) from x = v,
    stopping once the gradient norm is at most tol * max(1, ||linear term||).

    Args:
        problem: problem instance
        C: indices of the functions in the subproblem
        weights: positive weight per index in C
        gamma: stepsize of the quadratic anchor
        v: anchor point
        tol: gradient tolerance
        max_iter: iteration cap

    Returns:
        Approximate minimizer

    Raises:
        NoConvergence: tolerance not reached within max_iter iterations
    """
    if not gamma > 0:
        raise NonPositiveGamma(f"Stepsize must be positive, got {gamma!r}")
    C = np.asarray(C, dtype=int)
    weights = np.asarray(weights, dtype=float)
    v = np.asarray(v, dtype=float)

    rows = problem.A[C]
    hessian = (rows.T * weights) @ rows
    hessian[np.diag_indices_from(hessian)] += 2.0 * weights @ problem.lambdas[C] + 1.0 / gamma
    linear = rows.T @ (weights * problem.b[C]) + v / gamma

    eigenvalues = np.linalg.eigvalsh(hessian)
    m, L = float(eigenvalues[0]), float(eigenvalues[-1])
    root_kappa = np.sqrt(L / m)
    momentum = (root_kappa - 1.0) / (root_kappa + 1.0)
    threshold = tol * max(1.0, float(np.linalg.norm(linear)))

    x = v.copy()
    y = v.copy()
    for _ in range(max_iter):
        g = hessian @ y - linear
        if np.linalg.norm(g) <= threshold:
            return y
        x_next = y - g / L
        y = x_next + momentum * (x_next - x)
        x = x_next

    raise NoConvergence(
        f"Prox oracle did not reach gradient norm {threshold:.3e} in {max_iter} iterations")
