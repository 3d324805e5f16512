"""
Correction strategies of the stochastic proximal point family.

Every strategy is registered in strategy_registry under its CorrectionKind.
"""

from ..models import CorrectionKind
from .base import ControlState, CorrectionStrategy, EMPTY_STATE, StrategyRegistry, strategy_registry
from .corrected import GradientCorrection, OptimalCorrection
from .lsvrp import LooplessSVRP
from .plain import NoCorrection
from .point_saga import PointSAGA

strategy_registry.register_strategy(CorrectionKind.NONE, NoCorrection)
strategy_registry.register_strategy(CorrectionKind.STAR, OptimalCorrection)
strategy_registry.register_strategy(CorrectionKind.GC, GradientCorrection)
strategy_registry.register_strategy(CorrectionKind.LSVRP, LooplessSVRP)
strategy_registry.register_strategy(CorrectionKind.POINT_SAGA, PointSAGA)

__all__ = [
    'ControlState',
    'CorrectionStrategy',
    'EMPTY_STATE',
    'StrategyRegistry',
    'strategy_registry',
    'NoCorrection',
    'OptimalCorrection',
    'GradientCorrection',
    'LooplessSVRP',
    'PointSAGA',
]
