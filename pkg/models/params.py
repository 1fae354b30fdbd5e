"""
模型参数与下标约定
ModelParams 在构造后只读，所有模块共享同一个实例
"""
from enum import IntEnum
from typing import Any, Dict, Iterator, Sequence, Tuple

import numpy as np

from utils.errors import ConfigError
from .base import BaseModel


class Side(IntEnum):
    """报价方向：数组第一维的下标"""
    BID = 0
    ASK = 1

    @property
    def phi(self) -> int:
        """符号映射 φ(bid)=+1, φ(ask)=−1"""
        return 1 if self is Side.BID else -1

    @property
    def label(self) -> str:
        return "b" if self is Side.BID else "a"


SIDES = (Side.BID, Side.ASK)
# φ(k) 按下标排列，便于广播
PHI = np.array([1, -1])

InventoryPair = Tuple[int, int]


def _pair(value: Any, name: str) -> Tuple[float, float]:
    if np.isscalar(value):
        return (float(value), float(value))
    values = tuple(float(v) for v in value)
    if len(values) != 2:
        raise ConfigError("需要两个分量 (交易所/做市商 0 与 1)", key=name)
    return values


class ModelParams(BaseModel):
    """市场、偏好与连接参数"""

    _FIELDS = ("sigma", "kappa", "A", "c", "gamma", "eta", "beta",
               "q_bar", "delta_inf", "T", "S0")

    def __init__(
        self,
        sigma: float = 1.2,
        kappa: float = 8.0,
        A: Sequence[float] = (100.0, 100.0),
        c: Sequence[float] = (1e-5, 1e-5),
        gamma: Sequence[float] = (0.01, 0.01),
        eta: Sequence[float] = (0.1, 0.1),
        beta: float = 0.6,
        q_bar: int = 5,
        delta_inf: float = 10.0,
        T: float = 1.0,
        S0: float = 100.0,
    ):
        """
        初始化并校验参数

        Args:
            sigma: 波动率 ($·day^-1/2)
            kappa: 强度衰减 ($^-1·day^-1/2)
            A: 两个交易所的基础强度 (A⁰, A¹)，单位 day⁻¹
            c: 两个交易所的手续费/强度平移 (c⁰, c¹)，单位 $
            gamma: 做市商风险厌恶 (γ⁰, γ¹)
            eta: 交易所风险厌恶 (η⁰, η¹)
            beta: 连接效率 β ∈ [0, 1)
            q_bar: 库存上限 q̄（正整数）
            delta_inf: 报价上界 δ∞
            T: 期限（天）
            S0: 初始价格
        """
        object.__setattr__(self, "_frozen", False)
        self.sigma = float(sigma)
        self.kappa = float(kappa)
        self.A = _pair(A, "A")
        self.c = _pair(c, "c")
        self.gamma = _pair(gamma, "gamma")
        self.eta = _pair(eta, "eta")
        self.beta = float(beta)
        if float(q_bar) != int(q_bar):
            raise ConfigError("库存上限必须为整数", key="q_bar")
        self.q_bar = int(q_bar)
        self.delta_inf = float(delta_inf)
        self.T = float(T)
        self.S0 = float(S0)
        self.validate()
        object.__setattr__(self, "_frozen", True)

    def __setattr__(self, key, value):
        if getattr(self, "_frozen", False):
            raise AttributeError("ModelParams 构造后只读，请使用 replace()")
        object.__setattr__(self, key, value)

    @classmethod
    def baseline(cls) -> "ModelParams":
        """基准参数"""
        return cls()

    def validate(self) -> None:
        """
        校验正性约束与 β < 1

        Raises:
            ConfigError: 参数不合法时
        """
        for name in ("sigma", "kappa", "delta_inf", "T", "S0"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"必须为正数，当前值 {value}", key=name)
        for name in ("A", "c", "gamma", "eta"):
            for value in getattr(self, name):
                if not np.isfinite(value) or value <= 0:
                    raise ConfigError(f"分量必须为正数，当前值 {value}", key=name)
        if not 0.0 <= self.beta < 1.0:
            raise ConfigError(f"β 必须位于 [0, 1)，当前值 {self.beta}", key="beta")
        if self.q_bar < 1:
            raise ConfigError(f"必须为正整数，当前值 {self.q_bar}", key="q_bar")
        for i in (0, 1):
            # tilde-ζ 中 log(1 - ·) 的参数必须为正（溢出时比值为 inf 或 nan）
            for beta in (0.0, self.beta):
                ratio = self.exposure_ratio(i, beta)
                if not 1.0 - ratio > 0.0:
                    raise ConfigError(f"交易所 {i} 的暴露比值 {ratio} 使 log(1 − ·) 无定义，"
                                      f"请缩小 σ、γ 或 η", key="sigma")

    def replace(self, **overrides) -> "ModelParams":
        """返回修改部分字段后的新实例（重新校验）"""
        data = {name: getattr(self, name) for name in self._FIELDS}
        data.update(overrides)
        return ModelParams(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self._FIELDS}

    # ---------- 派生常量 ----------
    @property
    def n_states(self) -> int:
        """单个做市商库存取值个数 2q̄+1"""
        return 2 * self.q_bar + 1

    def log_tilde_A(self, j: int) -> float:
        """log Ãʲ = log Aʲ − κcʲ/σ"""
        return float(np.log(self.A[j]) - self.kappa * self.c[j] / self.sigma)

    def exposure_ratio(self, m: int, beta: float) -> float:
        """(1−β)²σ²γη / ((κ+(1−β)σγ)(κ+(1−β)ση))，β=0 时为 tilde-ζ 的比值"""
        s = (1.0 - beta) * self.sigma
        g, e = self.gamma[m], self.eta[m]
        return s * s * g * e / ((self.kappa + s * g) * (self.kappa + s * e))

    def inventory_axis(self) -> np.ndarray:
        """库存取值 −q̄..q̄"""
        return np.arange(-self.q_bar, self.q_bar + 1)

    def inventory_mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """格点上的 (q⁰, q¹) 数组，形状 (2q̄+1, 2q̄+1)，下标 [q⁰+q̄, q¹+q̄]"""
        axis = self.inventory_axis()
        return np.meshgrid(axis, axis, indexing="ij")

    def index(self, q: InventoryPair) -> Tuple[int, int]:
        """库存对在格点数组中的下标"""
        if not in_bounds(q, self.q_bar):
            raise ValueError(f"库存 {q} 超出 [-{self.q_bar}, {self.q_bar}]")
        return (int(q[0]) + self.q_bar, int(q[1]) + self.q_bar)


def in_bounds(q: InventoryPair, q_bar: int) -> bool:
    return all(-q_bar <= int(v) <= q_bar for v in q)


def inventory_states(q_bar: int) -> Iterator[InventoryPair]:
    """按 (q⁰, q¹) 字典序枚举 (2q̄+1)² 个库存状态"""
    for q0 in range(-q_bar, q_bar + 1):
        for q1 in range(-q_bar, q_bar + 1):
            yield (q0, q1)
