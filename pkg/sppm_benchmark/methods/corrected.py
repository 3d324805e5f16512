"""
Memoryless corrections: the optimal shift and gradient correction.
"""

import numpy as np

from ..core.problem import full_grad, grad_i
from ..models import CorrectionKind, ProblemConstants, RegressionProblem, SampledSubset
from .base import ControlState, CorrectionStrategy


class OptimalCorrection(CorrectionStrategy):
    """
    h_k = grad f_i(x*).

    Needs the gradients at the solution, so it is a reference method: x* stays
    a fixed point of every step and the iterates contract at 1/(1 + gamma mu)^2.
    """

    @property
    def kind(self) -> CorrectionKind:
        return CorrectionKind.STAR

    def get_method_name(self) -> str:
        return "SPPM*"

    def correction(self, state: ControlState, problem: RegressionProblem,
                   consts: ProblemConstants, x_k: np.ndarray,
                   sample: SampledSubset) -> np.ndarray:
        self.check_state(state)
        return np.array(consts.grad_at_star[sample.single])


class GradientCorrection(CorrectionStrategy):
    """h_k = grad f_i(x_k) - grad f(x_k)"""

    @property
    def kind(self) -> CorrectionKind:
        return CorrectionKind.GC

    def get_method_name(self) -> str:
        return "SPPM-GC"

    def correction(self, state: ControlState, problem: RegressionProblem,
                   consts: ProblemConstants, x_k: np.ndarray,
                   sample: SampledSubset) -> np.ndarray:
        self.check_state(state)
        return grad_i(problem, sample.single, x_k) - full_grad(problem, x_k)
