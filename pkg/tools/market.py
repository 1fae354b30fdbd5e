"""
市场基础函数
强度函数、库存上限门控与报价投影，其余模块共享
"""

import numpy as np

from models.params import ModelParams, Side, InventoryPair, PHI
from models.rates import QuoteMatrix


def intensity(params: ModelParams, venue: int, d):
    """
    强度函数 Λʲ(d) = Aʲ exp(−(κ/σ)(d + cʲ))

    Args:
        params: 模型参数
        venue: 交易所下标 j
        d: 报价（标量或数组）

    Returns:
        每日到达率，严格为正且关于 d 严格递减
    """
    return params.A[venue] * np.exp(-(params.kappa / params.sigma) * (d + params.c[venue]))


def side_open(params: ModelParams, side, q_i):
    """指示函数 1{φ(k)·qⁱ < q̄}；side 可以是 Side 或下标数组"""
    return PHI[np.asarray(side, dtype=int)] * np.asarray(q_i) < params.q_bar


def effective_intensity(params: ModelParams, side: Side, maker: int, venue: int,
                        quotes: QuoteMatrix, q: InventoryPair) -> float:
    """
    经库存门控后的成交强度 λ^{k,i,j}

    Raises:
        ValueError: 报价不满足边界规则时
    """
    problems = quotes.violations(params, q)
    if problems:
        raise ValueError("报价不可行: " + "; ".join(problems))
    if not side_open(params, side, q[maker]):
        return 0.0
    return float(intensity(params, venue, quotes.get(side, maker)))


def clamp_quote(params: ModelParams, d):
    """投影到 [−δ∞, δ∞]"""
    return np.clip(d, -params.delta_inf, params.delta_inf)
