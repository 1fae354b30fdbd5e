"""
求解结果数据模型
Regime、ValueGrid 与 SolveResult（含 npz 持久化）
"""
import json
import os
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ConfigError, SolverError
from .base import BaseModel
from .params import ModelParams, InventoryPair


class Regime(str, Enum):
    """签约情形：哪些交易所提供激励合约"""
    NONE = "none"
    ONE = "one"
    BOTH = "both"

    @classmethod
    def parse(cls, value: Any) -> "Regime":
        """
        从字符串解析

        Raises:
            ConfigError: 未知取值
        """
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigError(f"未知情形 {value!r}，可选 none/one/both", key="regime")

    @property
    def terminal(self) -> Tuple[float, float]:
        """两个未知函数在 T 时刻的终值"""
        return {Regime.NONE: (0.0, 0.0), Regime.ONE: (-1.0, 0.0),
                Regime.BOTH: (-1.0, -1.0)}[self]

    @property
    def value_names(self) -> Tuple[str, str]:
        """CSV 中的值列名"""
        return ("w0", "w1") if self is Regime.NONE else ("v0", "v1")

    def negative_grids(self) -> Tuple[int, ...]:
        """必须严格为负的未知函数下标（交易所值函数）"""
        return {Regime.NONE: (), Regime.ONE: (0,), Regime.BOTH: (0, 1)}[self]

    def contracting(self) -> Tuple[int, ...]:
        """提供合约的交易所"""
        return self.negative_grids()


class ValueGrid(BaseModel):
    """
    某时刻 t 的一对值函数网格

    values[l] 形状 (2q̄+1, 2q̄+1)，下标 [q⁰+q̄, q¹+q̄]
    """

    def __init__(self, t: float, values: np.ndarray, regime: Regime):
        self.t = float(t)
        self.values = np.asarray(values, dtype=float)
        self.regime = Regime.parse(regime)

    def at(self, l: int, q: InventoryPair, q_bar: int) -> float:
        return float(self.values[l, q[0] + q_bar, q[1] + q_bar])

    def check(self) -> None:
        """
        校验有限性与符号不变量

        Raises:
            SolverError: 出现非有限值或交易所值函数非负
        """
        q_bar = (self.values.shape[-1] - 1) // 2
        bad = ~np.isfinite(self.values)
        if bad.any():
            l, a, b = np.argwhere(bad)[0]
            raise SolverError(f"值函数 {l} 出现非有限值", t=self.t, q=(a - q_bar, b - q_bar))
        for l in self.regime.negative_grids():
            bad = self.values[l] >= 0.0
            if bad.any():
                a, b = np.argwhere(bad)[0]
                raise SolverError(f"交易所值函数 {l} 非负，违反符号不变量",
                                  t=self.t, q=(a - q_bar, b - q_bar))


class SolveResult(BaseModel):
    """
    某个情形的完整求解结果

    times 为升序时间网格 0 = t₀ < … < t_N = T；values[n] 是 times[n] 时刻的
    ValueGrid 数据，形状 (N+1, 2, 2q̄+1, 2q̄+1)。
    """

    def __init__(self, regime: Regime, params: ModelParams, dt: float,
                 times: np.ndarray, values: np.ndarray,
                 snapshots: Optional[Sequence[float]] = None):
        self.regime = Regime.parse(regime)
        self.params = params
        self.dt = float(dt)
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.snapshots = sorted(float(s) for s in (snapshots or [0.0]))

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def slice_index(self, t: float) -> int:
        """最近的已存时间切片下标"""
        n = int(round(float(t) / self.dt))
        return min(max(n, 0), self.n_steps)

    def grid(self, t: float) -> ValueGrid:
        n = self.slice_index(t)
        return ValueGrid(self.times[n], self.values[n], self.regime)

    def value(self, l: int, q: InventoryPair, t: float = 0.0) -> float:
        """未知函数 l 在 (t, q) 处的值"""
        i0, i1 = self.params.index(q)
        return float(self.values[self.slice_index(t), l, i0, i1])

    def snapshot_grids(self) -> List[ValueGrid]:
        return [self.grid(t) for t in self.snapshots]

    def to_dict(self) -> Dict[str, Any]:
        """只导出元数据（网格体量较大）"""
        return {
            "regime": self.regime.value,
            "params": self.params.to_dict(),
            "dt": self.dt,
            "n_steps": self.n_steps,
            "snapshots": self.snapshots,
        }

    # ---------- 持久化 ----------
    def save_npz(self, path: str) -> str:
        """
        保存为 npz（原子替换）

        Returns:
            写入的文件路径
        """
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        tmp = path + ".tmp.npz"
        np.savez_compressed(
            tmp,
            times=self.times,
            values=self.values,
            meta=np.array(json.dumps(self.to_dict())),
        )
        os.replace(tmp, path)
        return path

    @classmethod
    def load_npz(cls, path: str) -> "SolveResult":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            return cls(
                regime=meta["regime"],
                params=ModelParams.from_dict(meta["params"]),
                dt=meta["dt"],
                times=data["times"],
                values=data["values"],
                snapshots=meta["snapshots"],
            )
