"""
Point SAGA: a table of one past iterate per component function.
"""

import numpy as np

from ..core.problem import grad_i
from ..models import CorrectionKind, ProblemConstants, RegressionProblem, SampledSubset
from .base import ControlState, CorrectionStrategy


class PointSAGA(CorrectionStrategy):
    """
    h_k = grad f_i(w^i_k) - (1/n) sum_j grad f_j(w^j_k), then w^i_{k+1} = x_{k+1}.

    Only the slot of the sampled index changes per step.
    """

    state_variant = "table"

    @property
    def kind(self) -> CorrectionKind:
        return CorrectionKind.POINT_SAGA

    def get_method_name(self) -> str:
        return "Point-SAGA"

    def init_state(self, problem: RegressionProblem, x0: np.ndarray) -> ControlState:
        x0 = np.asarray(x0, dtype=float)
        return self.state_from_table(problem, np.tile(x0, (problem.n, 1)))

    @staticmethod
    def state_from_table(problem: RegressionProblem, table: np.ndarray) -> ControlState:
        """State holding the given n x d table of points"""
        table = np.array(table, dtype=float)
        grads = np.array([grad_i(problem, j, table[j]) for j in range(problem.n)])
        return ControlState(table=table, table_grads=grads)

    def correction(self, state: ControlState, problem: RegressionProblem,
                   consts: ProblemConstants, x_k: np.ndarray,
                   sample: SampledSubset) -> np.ndarray:
        self.check_state(state)
        if len(state.table) != problem.n:
            raise ValueError(f"Table holds {len(state.table)} points, expected {problem.n}")
        return state.table_grads[sample.single] - state.table_grads.mean(axis=0)

    def update_state(self, state: ControlState, problem: RegressionProblem,
                     x_next: np.ndarray, sample: SampledSubset,
                     rng: np.random.Generator) -> ControlState:
        self.check_state(state)
        i = sample.single
        table = state.table.copy()
        table_grads = state.table_grads.copy()
        table[i] = x_next
        table_grads[i] = grad_i(problem, i, x_next)
        return ControlState(table=table, table_grads=table_grads)

    def sigma_sq(self, state: ControlState, x_star: np.ndarray) -> float:
        """(1/n) sum_j ||w^j_k - x*||^2"""
        self.check_state(state)
        return float(np.mean(np.sum((state.table - x_star) ** 2, axis=1)))
