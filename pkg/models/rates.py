"""
支付率与报价数据模型
"""
from typing import Optional, Sequence

import numpy as np

from .base import BaseModel
from .params import ModelParams, Side, InventoryPair, PHI


class RateVector(BaseModel):
    """
    单个交易所 ℓ 的 9 分量支付率 z^ℓ

    zN[k][i][j]: 做市商 i 在方向 k 经由交易所 j 成交一笔时的支付率 ($/笔)
    zS: 价格暴露率 z^{ℓ,S}
    """

    def __init__(self, zN: Optional[Sequence] = None, zS: float = 0.0):
        zN = np.zeros((2, 2, 2)) if zN is None else np.asarray(zN, dtype=float)
        if zN.shape != (2, 2, 2):
            raise ValueError(f"zN 形状必须为 (2, 2, 2)，当前 {zN.shape}")
        if not np.all(np.isfinite(zN)) or not np.isfinite(zS):
            raise ValueError("支付率必须为有限值")
        self.zN = zN
        self.zS = float(zS)

    @classmethod
    def zeros(cls) -> "RateVector":
        return cls()

    def own_pair(self, side: Side, maker: int) -> np.ndarray:
        """(z^{ℓ,k,i,0}, z^{ℓ,k,i,1})"""
        return self.zN[int(side), maker]

    def is_restricted(self, exchange: int, atol: float = 0.0) -> bool:
        """是否属于受限合约类 Ξ′：对本交易所做市商两个交易所的支付率相同"""
        own = self.zN[:, exchange, :]
        return bool(np.all(np.abs(own[:, 0] - own[:, 1]) <= atol))


def stack_rates(z0: RateVector, z1: RateVector):
    """
    将两个交易所的支付率堆叠为数组

    Returns:
        (Z, ZS): Z 形状 (2 ℓ, 2 k, 2 i, 2 j)，ZS 形状 (2,)
    """
    return np.stack([z0.zN, z1.zN]), np.array([z0.zS, z1.zS])


def own_rates(Z: np.ndarray) -> np.ndarray:
    """
    取出决定报价的自有支付率 z^{i,k,i,j}

    Args:
        Z: 形状 (2 ℓ, 2 k, 2 i, 2 j, ...) 的支付率数组

    Returns:
        形状 (2 k, 2 i, 2 j, ...) 的数组
    """
    return np.stack([Z[0, :, 0], Z[1, :, 1]], axis=1)


class QuoteMatrix(BaseModel):
    """某一状态下的四个报价 δ[k][i]"""

    def __init__(self, delta: Sequence):
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (2, 2):
            raise ValueError(f"报价矩阵形状必须为 (2, 2)，当前 {delta.shape}")
        self.delta = delta

    def get(self, side: Side, maker: int) -> float:
        return float(self.delta[int(side), maker])

    def best(self, side: Side) -> float:
        """该方向的最优（最小）报价"""
        return float(self.delta[int(side)].min())

    def violations(self, params: ModelParams, q: InventoryPair) -> list:
        """列出违反可行集 𝒜 的条目"""
        problems = []
        for k in (Side.BID, Side.ASK):
            for i in (0, 1):
                d = self.delta[int(k), i]
                if not -params.delta_inf <= d <= params.delta_inf:
                    problems.append(f"δ[{k.label}][{i}]={d} 超出 ±δ∞")
                if PHI[int(k)] * q[i] >= params.q_bar and d != params.delta_inf:
                    problems.append(f"δ[{k.label}][{i}]={d} 在库存上限处必须为 δ∞")
        return problems

    def is_admissible(self, params: ModelParams, q: InventoryPair) -> bool:
        return not self.violations(params, q)
