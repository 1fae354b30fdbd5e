"""
做市商均衡
哈密顿量 h⁰/h¹、领先者报价 Γ、跟随者报价 Γβ、唯一纳什不动点 Δ，
以及用于校验的网格穷举最优反应
"""

from typing import Sequence, Tuple

import numpy as np

from models.params import ModelParams, Side, InventoryPair, PHI
from models.rates import RateVector, QuoteMatrix, stack_rates, own_rates
from .market import intensity, side_open, clamp_quote

COARSE_STRIDE = 100


def _out(x):
    """0 维结果返回 float，其余保持数组"""
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _log_ratio(params: ModelParams, maker: int, z_venue0, z_venue1):
    """log(Σⱼ Ãʲ e^{−γⁱzⱼ} / Σⱼ Ãʲ)，用 logaddexp 保证数值稳定"""
    g = params.gamma[maker]
    la0, la1 = params.log_tilde_A(0), params.log_tilde_A(1)
    num = np.logaddexp(la0 - g * np.asarray(z_venue0, dtype=float),
                       la1 - g * np.asarray(z_venue1, dtype=float))
    return num - np.logaddexp(la0, la1)


def _gamma_raw(params: ModelParams, maker: int, z_venue0, z_venue1):
    g = params.gamma[maker]
    raw = (np.log1p(params.sigma * g / params.kappa)
           + _log_ratio(params, maker, z_venue0, z_venue1)) / g
    return clamp_quote(params, raw)


def _gamma_beta_raw(params: ModelParams, maker: int, d_other, z_venue0, z_venue1):
    g, b = params.gamma[maker], params.beta
    raw = (-b / (1.0 - b) * np.asarray(d_other, dtype=float)
           + (np.log1p((1.0 - b) * params.sigma * g / params.kappa)
              + _log_ratio(params, maker, z_venue0, z_venue1)) / (g * (1.0 - b)))
    return clamp_quote(params, raw)


def gamma_quote(params: ModelParams, maker: int, side: Side,
                z_own: Sequence[float], q_i: int) -> float:
    """
    领先者报价 Γ^{k,i}

    Args:
        params: 模型参数
        maker: 做市商 i
        side: 方向 k
        z_own: (z^{i,k,i,0}, z^{i,k,i,1})
        q_i: 做市商 i 的库存

    Returns:
        φ(k)qⁱ = q̄ 时为 δ∞，否则为投影后的闭式解
    """
    z = np.asarray(z_own, dtype=float)
    quote = _gamma_raw(params, maker, z[0], z[1])
    return _out(np.where(side_open(params, side, q_i), quote, params.delta_inf))


def gamma_beta_quote(params: ModelParams, maker: int, side: Side, d_other: float,
                     z_own: Sequence[float], q_i: int) -> float:
    """
    跟随者报价 Γβ^{k,i}：对手报价为 d_other 时在 d ≥ d_other 上的最优反应
    """
    z = np.asarray(z_own, dtype=float)
    quote = _gamma_beta_raw(params, maker, d_other, z[0], z[1])
    return _out(np.where(side_open(params, side, q_i), quote, params.delta_inf))


def quote_map(params: ModelParams, own: np.ndarray, q0, q1) -> np.ndarray:
    """
    批量计算不动点 Δ

    Args:
        own: 形状 (2 k, 2 i, 2 j, ...) 的自有支付率 z^{i,k,i,j}
        q0, q1: 可广播到 own 尾部维度的库存

    Returns:
        形状 (2 k, 2 i, ...) 的报价
    """
    own = np.asarray(own, dtype=float)
    tail = own.shape[3:]
    k_idx = np.arange(2).reshape((2,) + (1,) * len(tail))
    q = (np.asarray(q0), np.asarray(q1))
    open_ = [side_open(params, k_idx, q[i]) for i in (0, 1)]
    leader = [np.where(open_[i], _gamma_raw(params, i, own[:, i, 0], own[:, i, 1]),
                       params.delta_inf) for i in (0, 1)]
    quotes = []
    for i in (0, 1):
        other = leader[1 - i]
        follow = np.where(open_[i],
                          _gamma_beta_raw(params, i, other, own[:, i, 0], own[:, i, 1]),
                          params.delta_inf)
        # 平局按情形 (a) 处理：双方都报自己的 Γ
        quotes.append(np.where(leader[i] <= other, leader[i],
                               np.where(other < follow, follow, other)))
    return np.stack(quotes, axis=1)


def delta_fixed_point(params: ModelParams, rates: Tuple[RateVector, RateVector],
                      q: InventoryPair) -> QuoteMatrix:
    """
    唯一纳什不动点 Δ(z, q)

    Args:
        params: 模型参数
        rates: 两个交易所的支付率 (z⁰, z¹)
        q: 库存对

    Returns:
        QuoteMatrix，两侧均满足边界规则
    """
    Z, _ = stack_rates(*rates)
    return QuoteMatrix(quote_map(params, own_rates(Z), q[0], q[1]))


def side_value(params: ModelParams, maker: int, side: int, d_own, d_other,
               zN: np.ndarray, q0, q1):
    """
    hⁱ 在方向 k 上的部分 hⁱ_k（可对 d_own 批量计算）

    Args:
        zN: 做市商 i 所属交易所的支付率，形状 (2 k, 2 i, 2 j, ...)
    """
    g, b = params.gamma[maker], params.beta
    q = (q0, q1)
    other = 1 - maker
    d_own = np.asarray(d_own, dtype=float)
    d_other = np.asarray(d_other, dtype=float)
    best = np.minimum(d_own, d_other)
    own_open = side_open(params, side, q[maker])
    other_open = side_open(params, side, q[other])
    total = 0.0
    for j in (0, 1):
        gain = zN[side, maker, j] + d_own - b * (d_own - best)
        own_term = -np.expm1(-g * gain) / g * intensity(params, j, d_own)
        cross_term = -np.expm1(-g * zN[side, other, j]) / g * intensity(params, j, d_other)
        total = total + np.where(own_open, own_term, 0.0) + np.where(other_open, cross_term, 0.0)
    return total


def h_value(params: ModelParams, maker: int, delta: np.ndarray, zN: np.ndarray, q0, q1):
    """hⁱ(δ, zⁱ, q)，delta 形状 (2 k, 2 i, ...)"""
    other = 1 - maker
    return sum(side_value(params, maker, k, delta[k, maker], delta[k, other], zN, q0, q1)
               for k in (0, 1))


def hamiltonian_h(params: ModelParams, maker: int, quotes: QuoteMatrix,
                  z_i: RateVector, q: InventoryPair) -> float:
    """
    做市商 i 的哈密顿量被积函数 hⁱ

    Returns:
        对方向与交易所求和的效用率（自有成交含 β 惩罚，交叉项为对方成交的支付）
    """
    return _out(h_value(params, maker, quotes.delta, z_i.zN, q[0], q[1]))


def hamiltonian_arrays(params: ModelParams, Z: np.ndarray, q0, q1, delta=None):
    """
    批量计算 ℋ⁰、ℋ¹

    Args:
        Z: 形状 (2 ℓ, 2 k, 2 i, 2 j, ...) 的支付率
        delta: 已算好的 Δ（可选）

    Returns:
        (delta, H) ，H 形状 (2, ...)
    """
    if delta is None:
        delta = quote_map(params, own_rates(Z), q0, q1)
    H = np.stack([h_value(params, m, delta, Z[m], q0, q1) for m in (0, 1)])
    return delta, H


def hamiltonian_H(params: ModelParams, maker: int, rates: Tuple[RateVector, RateVector],
                  q: InventoryPair) -> float:
    """ℋⁱ(z, q) = hⁱ(Δ(z, q), zⁱ, q)"""
    quotes = delta_fixed_point(params, rates, q)
    return hamiltonian_h(params, maker, quotes, rates[maker], q)


def quote_mesh(params: ModelParams, mesh: float) -> np.ndarray:
    """[−δ∞, δ∞] 上步长为 mesh 的报价网格"""
    if mesh <= 0:
        raise ValueError("mesh 必须为正")
    n = int(round(2 * params.delta_inf / mesh)) + 1
    return np.linspace(-params.delta_inf, params.delta_inf, n)


def best_response_bruteforce(params: ModelParams, maker: int, d_other: Sequence[float],
                             z_i: RateVector, q: InventoryPair,
                             mesh: float = 1e-4) -> Tuple[float, float]:
    """
    网格穷举最优反应（校验 Δ 用）

    Args:
        d_other: 对手的 (bid, ask) 报价
        z_i: 做市商 i 所属交易所的支付率
        mesh: 网格步长

    Returns:
        (bid, ask)：满足边界规则的 hⁱ 网格最大点

    hⁱ 在对手报价两侧各为单峰函数：先在每 COARSE_STRIDE 个网格点取一个的粗网格上
    分别定位两侧的最大点，再在其邻域与对手报价处的细网格上穷举。
    """
    grid = quote_mesh(params, mesh)
    rough = np.arange(0, len(grid), COARSE_STRIDE)
    response = []
    for k in (0, 1):
        if not side_open(params, k, q[maker]):
            response.append(params.delta_inf)
            continue
        values = side_value(params, maker, k, grid[rough], d_other[k], z_i.zN, q[0], q[1])
        below = grid[rough] <= d_other[k]
        centers = [int(np.argmin(np.abs(grid - d_other[k])))]
        for part in (below, ~below):
            if part.any():
                centers.append(int(rough[part][np.argmax(values[part])]))
        idx = np.unique(np.concatenate([np.arange(c - 2 * COARSE_STRIDE, c + 2 * COARSE_STRIDE + 1)
                                        for c in centers]))
        idx = idx[(idx >= 0) & (idx < len(grid))]
        fine = side_value(params, maker, k, grid[idx], d_other[k], z_i.zN, q[0], q[1])
        response.append(float(grid[idx[int(np.argmax(fine))]]))
    return tuple(response)


def iterate_best_responses(params: ModelParams, rates: Tuple[RateVector, RateVector],
                           q: InventoryPair, mesh: float = 1e-4,
                           max_rounds: int = 10) -> QuoteMatrix:
    """
    交替网格最优反应直至收敛

    从对手缺席（报 δ∞）时做市商 0 的最优报价出发，轮流求最优反应。
    """
    d = np.full((2, 2), params.delta_inf)
    d[:, 0] = best_response_bruteforce(params, 0, d[:, 1], rates[0], q, mesh)
    d[:, 1] = best_response_bruteforce(params, 1, d[:, 0], rates[1], q, mesh)
    for _ in range(max_rounds):
        previous = d.copy()
        d[:, 0] = best_response_bruteforce(params, 0, d[:, 1], rates[0], q, mesh)
        d[:, 1] = best_response_bruteforce(params, 1, d[:, 0], rates[1], q, mesh)
        if np.max(np.abs(d - previous)) <= 0.5 * mesh:
            break
    return QuoteMatrix(d)


def oracle_tolerance(params: ModelParams, mesh: float) -> float:
    """
    网格最优反应与 Δ 的允许偏差

    领先者的网格解误差不超过 mesh/2；跟随者报价关于对手报价的斜率为 −β/(1−β)，
    再加上自身的网格舍入。
    """
    slope = params.beta / (1.0 - params.beta)
    return mesh * max(1.0, 0.5 + 0.5 * slope)
