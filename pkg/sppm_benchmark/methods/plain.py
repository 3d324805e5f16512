"""
Plain stochastic proximal point: no correction, any proper sampler.
"""

import numpy as np

from ..models import CorrectionKind, ProblemConstants, RegressionProblem, SampledSubset
from .base import ControlState, CorrectionStrategy


class NoCorrection(CorrectionStrategy):
    """h_k = 0. With uniform, nonuniform or subset sampling this is SPPM, SPPM-NS or SPPM-AS"""

    @property
    def kind(self) -> CorrectionKind:
        return CorrectionKind.NONE

    def get_method_name(self) -> str:
        return "SPPM"

    @property
    def requires_uniform_singleton(self) -> bool:
        return False

    def correction(self, state: ControlState, problem: RegressionProblem,
                   consts: ProblemConstants, x_k: np.ndarray,
                   sample: SampledSubset) -> np.ndarray:
        self.check_state(state)
        return np.zeros(problem.d)
