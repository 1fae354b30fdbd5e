"""
蒙特卡洛结果数据模型
"""
import math
from typing import Any, Dict, Optional, Sequence

import numpy as np

from .base import BaseModel


class McEstimate(BaseModel):
    """样本均值估计：mean、标准误 se = std/√n、路径数与种子"""

    def __init__(self, mean: float, se: float, n_paths: int, seed: Optional[int] = None):
        self.mean = float(mean)
        self.se = float(se)
        self.n_paths = int(n_paths)
        self.seed = seed

    @classmethod
    def from_samples(cls, samples: Sequence[float], seed: Optional[int] = None) -> "McEstimate":
        """
        由样本构造估计

        Raises:
            ValueError: 样本为空
        """
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n == 0:
            raise ValueError("路径数为 0，均值无定义")
        se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
        return cls(float(samples.mean()), se, n, seed)

    def z_score(self, reference: float) -> float:
        """(mean − reference) / se"""
        if self.se == 0:
            return 0.0 if self.mean == reference else float("inf")
        return (self.mean - reference) / self.se


class PathRecord(BaseModel):
    """
    单条路径的完整轨迹

    times (N+1,)；price (N+1,)；inventory (N+1, 2)；counts (N+1, 2 k, 2 i, 2 j) 为累计成交数；
    pl (N+1, 2) 为做市商盈亏 PL = X + QS；Y (N+1, 2) 为合约累积量；fees (N+1, 2) 为交易所手续费收入
    """

    def __init__(self, times, price, inventory, counts, pl, Y, fees, seed: Optional[int] = None):
        self.times = np.asarray(times, dtype=float)
        self.price = np.asarray(price, dtype=float)
        self.inventory = np.asarray(inventory, dtype=int)
        self.counts = np.asarray(counts, dtype=int)
        self.pl = np.asarray(pl, dtype=float)
        self.Y = np.asarray(Y, dtype=float)
        self.fees = np.asarray(fees, dtype=float)
        self.seed = seed

    def rows(self) -> list:
        """逐时刻展开为 CSV 行"""
        out = []
        for n, t in enumerate(self.times):
            row: Dict[str, Any] = {
                "t": float(t), "S": float(self.price[n]),
                "Q0": int(self.inventory[n, 0]), "Q1": int(self.inventory[n, 1]),
                "PL0": float(self.pl[n, 0]), "PL1": float(self.pl[n, 1]),
                "Y0": float(self.Y[n, 0]), "Y1": float(self.Y[n, 1]),
                "fee0": float(self.fees[n, 0]), "fee1": float(self.fees[n, 1]),
            }
            for k, label in enumerate("ba"):
                for i in (0, 1):
                    for j in (0, 1):
                        row[f"N_{label}_{i}_{j}"] = int(self.counts[n, k, i, j])
            out.append(row)
        return out
