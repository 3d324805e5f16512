"""
Loopless SVRP: gradient correction taken at a reference point that is
refreshed to the current iterate with probability p.
"""

import numpy as np

from ..core.problem import full_grad, grad_i
from ..models import CorrectionKind, ProblemConstants, RegressionProblem, SampledSubset
from .base import ControlState, CorrectionStrategy


class LooplessSVRP(CorrectionStrategy):
    """
    h_k = grad f_i(w_k) - grad f(w_k); w_{k+1} = x_{k+1} with probability p, else w_k.

    The full gradient at w_k is cached in the state and only recomputed when
    w moves.
    """

    state_variant = "w"

    def __init__(self, p: float = 1.0, **kwargs):
        """
        Args:
            p: reference point refresh probability, 0 < p <= 1
        """
        if not 0 < p <= 1:
            raise ValueError(f"Refresh probability must lie in (0, 1], got {p!r}")
        super().__init__(p=p, **kwargs)
        self.p = float(p)

    @property
    def kind(self) -> CorrectionKind:
        return CorrectionKind.LSVRP

    def get_method_name(self) -> str:
        return f"L-SVRP[p={self.p!r}]"

    def init_state(self, problem: RegressionProblem, x0: np.ndarray) -> ControlState:
        return self.refresh(problem, x0)

    @staticmethod
    def refresh(problem: RegressionProblem, w: np.ndarray) -> ControlState:
        """State with reference point w"""
        w = np.array(w, dtype=float)
        return ControlState(w=w, anchor_grad=full_grad(problem, w))

    def correction(self, state: ControlState, problem: RegressionProblem,
                   consts: ProblemConstants, x_k: np.ndarray,
                   sample: SampledSubset) -> np.ndarray:
        self.check_state(state)
        return grad_i(problem, sample.single, state.w) - state.anchor_grad

    def update_state(self, state: ControlState, problem: RegressionProblem,
                     x_next: np.ndarray, sample: SampledSubset,
                     rng: np.random.Generator) -> ControlState:
        self.check_state(state)
        # p = 1 consumes no coin, keeping the stream aligned with gradient correction
        if self.p < 1.0 and rng.random() >= self.p:
            return state
        return self.refresh(problem, x_next)

    def sigma_sq(self, state: ControlState, x_star: np.ndarray) -> float:
        """||w_k - x*||^2"""
        self.check_state(state)
        diff = state.w - x_star
        return float(diff @ diff)
