"""
Base classes for correction strategies.

A correction strategy decides the shift h_k applied before every proximal
step, x_{k+1} = prox_{gamma f_i}(x_k + gamma h_k), and owns the control
state it learns from. All strategies share this interface so the engine can
drive any of them.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Type
import logging

import numpy as np

from ..exceptions import StateMismatch
from ..models import CorrectionKind, ProblemConstants, RegressionProblem, SampledSubset


@dataclass(frozen=True)
class ControlState:
    """
    Control vectors of a variance-reduced method.

    Exactly one variant is populated:
        empty: nothing (no correction, optimal shift, gradient correction)
        w: reference point w_k with cached full gradient at w_k (L-SVRP)
        table: n points w^1..w^n with their component gradients (Point SAGA)
    """

    w: Optional[np.ndarray] = None
    anchor_grad: Optional[np.ndarray] = None
    table: Optional[np.ndarray] = None
    table_grads: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.w is None) != (self.anchor_grad is None):
            raise ValueError("w and its full gradient must be set together")
        if (self.table is None) != (self.table_grads is None):
            raise ValueError("table and its gradients must be set together")
        if self.w is not None and self.table is not None:
            raise ValueError("A control state holds either w or a table, not both")

    @property
    def variant(self) -> str:
        if self.w is not None:
            return "w"
        if self.table is not None:
            return "table"
        return "empty"

    def with_updates(self, **changes) -> "ControlState":
        return replace(self, **changes)


EMPTY_STATE = ControlState()


class CorrectionStrategy(ABC):
    """Rule for the correction vector h_k and the control state behind it"""

    state_variant = "empty"

    def __init__(self, **kwargs):
        """
        Args:
            **kwargs: strategy-specific parameters
        """
        self.config = kwargs
        self.logger = logging.getLogger(self.__class__.__name__)

    @property
    @abstractmethod
    def kind(self) -> CorrectionKind:
        pass

    @abstractmethod
    def get_method_name(self) -> str:
        pass

    @abstractmethod
    def correction(self, state: ControlState, problem: RegressionProblem,
                   consts: ProblemConstants, x_k: np.ndarray,
                   sample: SampledSubset) -> np.ndarray:
        """
        Correction vector h_k for the drawn sample.

        Args:
            state: current control state
            problem: problem instance
            consts: problem constants (x_star and gradients at x_star)
            x_k: current iterate
            sample: drawn subset, a single index for every corrected method

        Returns:
            h_k, whose mean over the sampling distribution is zero

        Raises:
            StateMismatch: state variant does not belong to this strategy
        """
        pass

    @property
    def requires_uniform_singleton(self) -> bool:
        """Whether the method is only defined for one uniformly drawn index"""
        return True

    def init_state(self, problem: RegressionProblem, x0: np.ndarray) -> ControlState:
        return EMPTY_STATE

    def update_state(self, state: ControlState, problem: RegressionProblem,
                     x_next: np.ndarray, sample: SampledSubset,
                     rng: np.random.Generator) -> ControlState:
        """
        Control state for the next iteration.

        Implementations that flip coins draw from rng after the sampler did.
        """
        return state

    def sigma_sq(self, state: ControlState, x_star: np.ndarray) -> float:
        """sigma_k^2 of the Lyapunov function, zero without control vectors"""
        self.check_state(state)
        return 0.0

    def check_state(self, state: ControlState) -> None:
        if state.variant != self.state_variant:
            raise StateMismatch(
                f"{self.get_method_name()} expects a '{self.state_variant}' control state, "
                f"got '{state.variant}'")

    def get_strategy_info(self) -> Dict[str, Any]:
        return {
            'name': self.get_method_name(),
            'kind': self.kind.value,
            'config': self.config,
            'class': self.__class__.__name__,
        }


class StrategyRegistry:
    """
    Registry of correction strategy classes, looked up by kind.
    """

    def __init__(self):
        self._strategies: Dict[CorrectionKind, Type[CorrectionStrategy]] = {}
        self.logger = logging.getLogger(self.__class__.__name__)

    def register_strategy(self, kind: CorrectionKind,
                          strategy_cls: Type[CorrectionStrategy], force: bool = False) -> bool:
        """
        Args:
            kind: correction kind the class implements
            strategy_cls: CorrectionStrategy subclass
            force: whether to override an existing registration

        Returns:
            True if registration successful, False otherwise
        """
        if kind in self._strategies and not force:
            self.logger.warning(f"Strategy '{kind.value}' already registered")
            return False

        self._strategies[kind] = strategy_cls
        self.logger.debug(f"Registered strategy: {kind.value} -> {strategy_cls.__name__}")
        return True

    def create(self, kind: CorrectionKind, **kwargs) -> CorrectionStrategy:
        """
        Instantiate the strategy registered for kind.

        Raises:
            ValueError: nothing registered for kind
        """
        if kind not in self._strategies:
            raise ValueError(f"No strategy registered for '{kind.value}'")
        return self._strategies[kind](**kwargs)

    def get_kinds(self) -> List[CorrectionKind]:
        return list(self._strategies.keys())

    def clear(self):
        self._strategies.clear()
        self.logger.info("Cleared all registered strategies")


strategy_registry = StrategyRegistry()
