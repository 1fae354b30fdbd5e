"""
共享订单簿数据模型
"""

from .base import BaseModel
from .params import ModelParams, Side, SIDES, PHI, inventory_states, in_bounds
from .rates import RateVector, QuoteMatrix
from .results import Regime, ValueGrid, SolveResult
from .paths import McEstimate, PathRecord

__all__ = [
    "BaseModel", "ModelParams", "Side", "SIDES", "PHI", "inventory_states", "in_bounds",
    "RateVector", "QuoteMatrix", "Regime", "ValueGrid", "SolveResult",
    "McEstimate", "PathRecord",
]
