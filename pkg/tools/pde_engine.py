"""
PDE 求解引擎
在库存格点上用显式（向后）欧拉求解三种签约情形的耦合方程组，
并给出闭式最优合约支付率 ζ̂ / ζ̌ / ζ、被动交易所的手续费价值与报价曲面
"""

import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from models.params import ModelParams, Side, SIDES, InventoryPair, PHI, inventory_states
from models.rates import QuoteMatrix
from models.results import Regime, ValueGrid, SolveResult
from utils.console import log, warn
from utils.csv_handler import CSVHandler
from utils.errors import ConfigError, MissingResultError, SolverError, StabilityError
from .equilibrium import gamma_quote, quote_map, hamiltonian_arrays
from .market import intensity, side_open

STABILITY_LIMIT = 0.5
MAX_HALVINGS = 6


class SliceFields(NamedTuple):
    """某一时间切片上整个格点的支付率、报价与哈密顿量"""
    Z: np.ndarray       # (2 ℓ, 2 k, 2 i, 2 j, n, n)
    ZS: np.ndarray      # (2 ℓ, n, n)
    delta: np.ndarray   # (2 k, 2 i, n, n)
    H: np.ndarray       # (2, n, n)


# ---------- 格点差分 ----------

def shifted(f, side, axis: int):
    """
    f(q + φ(k)e^axis)

    f 的最后两维为 (q⁰, q¹)；越界处取 f(q) 本身，对应支付率为 0（该方向已被门控）。
    """
    f = np.asarray(f)
    n = f.shape[-1]
    idx = np.clip(np.arange(n) + PHI[int(side)], 0, n - 1)
    return np.take(f, idx, axis=f.ndim - 2 + axis)


def jump_differences(w: np.ndarray) -> np.ndarray:
    """形状 (2 k, 2 i, n, n) 的 w(q + φ(k)eⁱ) − w(q)"""
    return np.stack([np.stack([shifted(w, k, i) - w for i in (0, 1)]) for k in (0, 1)])


def _log_ratio(v, side, axis):
    return np.log(v / shifted(v, side, axis))


def zeta_hat(params: ModelParams, w: np.ndarray, q: InventoryPair, side: Side, maker: int) -> float:
    """
    无合约情形的支付率 ẑ^{ℓ,k,i,j} = ŵ_ℓ(q+φ(k)eⁱ) − ŵ_ℓ(q)（与交易所 j 无关）

    Args:
        w: ŵ_ℓ 在某时刻的网格
    """
    i0, i1 = params.index(q)
    return float(shifted(w, side, maker)[i0, i1] - w[i0, i1])


# ---------- 闭式合约支付率 ----------

def zeta_check_0S(params: ModelParams, q_m, exchange: int = 0):
    """价格暴露率 −γᵐqᵐ/(γᵐ+ηᵐ)，即 g^{m,S} 的驻点"""
    g, e = params.gamma[exchange], params.eta[exchange]
    return -g / (g + e) * np.asarray(q_m, dtype=float)


def g0s_eval(params: ModelParams, z_S, q_m, exchange: int = 0):
    """g^{m,S}(z, q) = ηᵐσ²/2·(γᵐ(z+q)² + ηᵐz²)"""
    g, e = params.gamma[exchange], params.eta[exchange]
    z = np.asarray(z_S, dtype=float)
    return 0.5 * e * params.sigma ** 2 * (g * (z + q_m) ** 2 + e * z ** 2)


def _fee_log(params: ModelParams, m: int) -> float:
    """log(Σⱼ Ãʲ / (Ã^{1−m} + Ãᵐe^{−ηᵐcᵐ}))"""
    la = (params.log_tilde_A(0), params.log_tilde_A(1))
    return float(np.logaddexp(la[0], la[1])
                 - np.logaddexp(la[1 - m], la[m] - params.eta[m] * params.c[m]))


def _tilde(params: ModelParams, m: int, log_ratio, beta: float):
    return (log_ratio + math.log1p(-params.exposure_ratio(m, beta))
            + _fee_log(params, m)) / params.eta[m]


def zeta_tilde(params: ModelParams, m: int, v: np.ndarray, side, beta: float = 0.0) -> np.ndarray:
    """
    整个格点上的 ζ̃^{m,k,m}（beta=0）或 ζ̃β^{m,k,m}（beta=β）

    Args:
        v: 交易所 m 的值函数网格（严格为负）
    """
    return _tilde(params, m, _log_ratio(v, side, m), beta)


def _cross_fields(params: ModelParams, m: int, v: np.ndarray) -> np.ndarray:
    """形状 (2 k, 2 j, n, n) 的 ζ^{m,k,1−m,j}"""
    g, e = params.gamma[m], params.eta[m]
    out = []
    for k in (0, 1):
        ratio = _log_ratio(v, k, 1 - m)
        out.append(np.stack([(e * params.c[m] * (j == m) + ratio) / (e + g) for j in (0, 1)]))
    return np.stack(out)


def zeta_check_cross(params: ModelParams, m: int, side: Side, venue: int,
                     v: np.ndarray, q: InventoryPair) -> float:
    """
    合约交易所 m 对另一做市商成交的支付率 ζ̌^{m,k,1−m,j}

    收取手续费的交易所 j = m 额外得到 ηᵐcᵐ/(ηᵐ+γᵐ)
    """
    i0, i1 = params.index(q)
    y, y2 = v[i0, i1], shifted(v, side, 1 - m)[i0, i1]
    if y >= 0 or y2 >= 0:
        raise SolverError(f"交易所 {m} 的值函数非负，无法取对数比", q=q)
    g, e = params.gamma[m], params.eta[m]
    return (e * params.c[m] * (venue == m) + math.log(y / y2)) / (e + g)


def _g_side(params: ModelParams, m: int, side: int, z_own, z_cross, delta_k,
            q0, q1, y, y1, y2):
    """
    g^{m,k} 的数组形式

    Args:
        z_own: (2 j, ...) 自家做市商的支付率
        z_cross: (2 j, ...) 另一做市商的支付率
        delta_k: (2 i, ...) 该方向两个做市商的报价
        y, y1, y2: v(q), v(q+φ(k)eᵐ), v(q+φ(k)e^{1−m})
    """
    g, e, b = params.gamma[m], params.eta[m], params.beta
    q = (q0, q1)
    best = np.minimum(delta_k[0], delta_k[1])
    d_own, d_cross = delta_k[m], delta_k[1 - m]
    own_open = side_open(params, side, q[m])
    cross_open = side_open(params, side, q[1 - m])
    total = 0.0
    for j in (0, 1):
        fee = params.c[m] if j == m else 0.0
        gain = z_own[j] + d_own - b * (d_own - best)
        own = intensity(params, j, d_own) * (
            np.exp(e * (z_own[j] - fee)) * y1 - y * (1.0 - e * np.expm1(-g * gain) / g))
        cross = intensity(params, j, d_cross) * (
            np.exp(e * (z_cross[j] - fee)) * y2 - y * (1.0 - e * np.expm1(-g * z_cross[j]) / g))
        total = total + np.where(own_open, own, 0.0) + np.where(cross_open, cross, 0.0)
    return total


def g0k_eval(params: ModelParams, m: int, side: Side, z_own: float, z_cross: Sequence[float],
             z_comp: float, q: InventoryPair, y: float, y1: float, y2: float) -> float:
    """
    交易所 m 在方向 k 上的 g^{m,k}

    Args:
        z_own: 自家做市商的支付率（两个交易所相同）
        z_cross: 另一做市商经交易所 0/1 成交的支付率
        z_comp: 另一交易所给其做市商的自有支付率（决定 Δ）
        y, y1, y2: v(q), v(q+φ(k)eᵐ), v(q+φ(k)e^{1−m})
    """
    own = np.zeros((2, 2, 2))
    own[:, m] = z_own
    own[:, 1 - m] = z_comp
    delta = quote_map(params, own, q[0], q[1])[int(side)]
    return float(_g_side(params, m, int(side), np.full(2, float(z_own)),
                         np.asarray(z_cross, dtype=float), delta, q[0], q[1], y, y1, y2))


# ---------- 自有支付率 ----------

OWN_ROUNDS = 4
REFINE_WIDTH = 0.5
REFINE_POINTS = 21
REFINE_LEVELS = 6
TIE_STEP = 1e-9


def _leader_quote(params: ModelParams, maker: int, side: int, z, q_i):
    return np.asarray(gamma_quote(params, maker, side, (z, z), q_i))


def leading_mask(params: ModelParams, m: int, z: np.ndarray, comp: np.ndarray, q0, q1) -> np.ndarray:
    """
    自有支付率 z 下做市商 m 的 Γ 是否不高于对手的 Γ（平局算领先）

    Args:
        z: (2 k, ...) 交易所 m 的自有支付率
        comp: (2 k, ...) 对手做市商的自有支付率，可与 z 广播
    """
    q = (q0, q1)
    return np.stack([_leader_quote(params, m, k, z[k], q[m])
                     <= _leader_quote(params, 1 - m, k, comp[k], q[1 - m]) for k in (0, 1)])


def own_branch(params: ModelParams, m: int, v: np.ndarray, comp: np.ndarray, q0, q1) -> np.ndarray:
    """情形判断：取 ζ̃ 时做市商 m 是否领先，决定自有支付率所在的分支"""
    tilde = np.stack([zeta_tilde(params, m, v, k) for k in (0, 1)])
    return leading_mask(params, m, tilde, comp, q0, q1)


def own_rate_objective(params: ModelParams, m: int, z: np.ndarray, comp: np.ndarray,
                       cross: np.ndarray, v: np.ndarray, q0, q1,
                       leading: Optional[np.ndarray] = None) -> np.ndarray:
    """
    一组候选自有支付率下的 g^{m,k}

    Args:
        z: (2 k, C, n, n) 候选支付率
        comp: (2 k, n, n) 对手做市商的自有支付率
        cross: (2 k, 2 j, n, n) 交易所 m 的交叉支付率
        v: 交易所 m 的值函数网格
        leading: (2 k, n, n) 限定分支；给定时分支外的候选记为 −inf

    Returns:
        (2 k, C, n, n)
    """
    own = np.empty((2, 2, 2) + z.shape[1:])
    own[:, m] = z[:, None]
    own[:, 1 - m] = comp[:, None, None]
    delta = quote_map(params, own, q0, q1)
    value = np.stack([
        _g_side(params, m, k, np.stack([z[k], z[k]]), cross[k][:, None], delta[k],
                q0, q1, v, shifted(v, k, m), shifted(v, k, 1 - m))
        for k in (0, 1)])
    value = np.where(np.isnan(value), -np.inf, value)
    if leading is not None:
        inside = leading_mask(params, m, z, comp[:, None], q0, q1) == leading[:, None]
        value = np.where(inside, value, -np.inf)
    return value


def _own_candidates(params: ModelParams, m: int, v: np.ndarray, comp: np.ndarray, q0, q1) -> np.ndarray:
    """
    闭式候选，形状 (2 k, 6, n, n)

    依次为 ζ̃、ζ̃β、Γᵐ 与对手 Γ 持平的点及其领先一侧的邻点、
    跟随报价恰为对手 Γ 的点、跟报对手时 g 的驻点。
    """
    g, e = params.gamma[m], params.eta[m]
    lead = math.log1p(params.sigma * g / params.kappa) / g
    follow = math.log1p((1.0 - params.beta) * params.sigma * g / params.kappa) / g
    q = (q0, q1)
    out = []
    for k in (0, 1):
        d = _leader_quote(params, 1 - m, k, comp[k], q[1 - m])
        match = (_log_ratio(v, k, m) + _fee_log(params, m) - g * d) / (e + g)
        out.append(np.stack([
            zeta_tilde(params, m, v, k), zeta_tilde(params, m, v, k, params.beta),
            lead - d, lead - d + TIE_STEP, follow - d, match,
        ]))
    return np.stack(out)


def _pick(z: np.ndarray, value: np.ndarray) -> np.ndarray:
    """沿候选维取 g 最大者，并列时取靠前的候选"""
    idx = np.argmax(value, axis=1)[:, None]
    return np.take_along_axis(z, idx, axis=1)[:, 0]


def best_own_rates(params: ModelParams, m: int, v: np.ndarray, comp: np.ndarray,
                   cross: np.ndarray, leading: np.ndarray, q0, q1) -> np.ndarray:
    """
    分支内使 g^{m,k} 最大的自有支付率

    先在闭式候选中取最优，再用逐层缩小的局部网格细化；
    当前点排在每层网格首位，并列时保留当前点。最后用过三点的抛物线顶点修正，
    使结果不依赖网格的落点。

    Args:
        comp: (2 k, n, n) 对手做市商的自有支付率
        cross: (2 k, 2 j, n, n) 交易所 m 的交叉支付率
        leading: (2 k, n, n) own_branch 给出的分支

    Returns:
        (2 k, n, n)
    """
    z = _own_candidates(params, m, v, comp, q0, q1)
    best = _pick(z, own_rate_objective(params, m, z, comp, cross, v, q0, q1, leading))
    offsets = np.linspace(-1.0, 1.0, REFINE_POINTS)[:, None, None]
    width = REFINE_WIDTH
    for _ in range(REFINE_LEVELS):
        trial = np.concatenate([best[:, None], best[:, None] + width * offsets], axis=1)
        best = _pick(trial, own_rate_objective(params, m, trial, comp, cross, v, q0, q1, leading))
        width *= 2.0 / (REFINE_POINTS - 1)

    trial = np.stack([best - width, best, best + width], axis=1)
    lo, mid, hi = np.moveaxis(own_rate_objective(params, m, trial, comp, cross, v, q0, q1, leading), 1, 0)
    curvature = lo - 2.0 * mid + hi
    concave = np.isfinite(curvature) & (curvature < 0)
    shift = np.where(concave, 0.5 * width * (lo - hi) / np.where(concave, curvature, -1.0), 0.0)
    polished = best + np.clip(shift, -width, width)
    value = own_rate_objective(params, m, polished[:, None], comp, cross, v, q0, q1, leading)[:, 0]
    return np.where(value >= mid, polished, best)


def zeta_check_own(params: ModelParams, m: int, side: Side, v: np.ndarray,
                   q: InventoryPair, other_own: float) -> float:
    """
    合约交易所 m 给自家做市商的支付率 ζ̌^{m,k,m}

    情形判断（ζ̃ 下自家做市商是否领先）确定分支，分支内取使 g^{m,k} 最大的支付率。

    Args:
        params: 模型参数
        m: 交易所
        side: 方向 k
        v: 交易所 m 的值函数网格
        q: 库存对
        other_own: 对手做市商的自有支付率（两个方向相同）

    Raises:
        SolverError: 值函数在 q 或其邻点非负
    """
    i0, i1 = params.index(q)
    y, y1 = v[i0, i1], shifted(v, side, m)[i0, i1]
    if y >= 0 or y1 >= 0:
        raise SolverError(f"交易所 {m} 的值函数非负，无法取对数比", q=q)
    n = params.n_states
    q0, q1 = params.inventory_mesh()
    comp = np.full((2, n, n), float(other_own))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        leading = own_branch(params, m, v, comp, q0, q1)
        own = best_own_rates(params, m, v, comp, _cross_fields(params, m, v), leading, q0, q1)
    return float(own[int(side), i0, i1])


# ---------- 切片场 ----------

def _set_exchange_rates(params: ModelParams, m: int, own: np.ndarray, cross: np.ndarray,
                        Z: np.ndarray, ZS: np.ndarray, q_m) -> None:
    Z[m, :, m] = own[:, None]
    Z[m, :, 1 - m] = cross
    ZS[m] = zeta_check_0S(params, q_m, m)


def rate_fields(params: ModelParams, regime: Regime, V: np.ndarray) -> SliceFields:
    """
    由一对值函数网格构造整个格点上的支付率、Δ 与 ℋ

    双边签约时两个交易所同时对上一轮的对手支付率求最优（分支由 ζ̃ 对固定），
    至多 OWN_ROUNDS 轮。

    Args:
        V: 形状 (2, n, n) 的值函数
    """
    q0, q1 = params.inventory_mesh()
    q = (q0, q1)
    n = params.n_states
    Z = np.zeros((2, 2, 2, 2, n, n))
    ZS = np.zeros((2, n, n))
    if regime is Regime.NONE:
        for l in (0, 1):
            Z[l] = jump_differences(V[l])[:, :, None]
    elif regime is Regime.ONE:
        Z[1] = jump_differences(V[1])[:, :, None]
        comp = Z[1, :, 1, 0]
        cross = _cross_fields(params, 0, V[0])
        leading = own_branch(params, 0, V[0], comp, q0, q1)
        own = best_own_rates(params, 0, V[0], comp, cross, leading, q0, q1)
        _set_exchange_rates(params, 0, own, cross, Z, ZS, q0)
    else:
        cross = [_cross_fields(params, m, V[m]) for m in (0, 1)]
        own = [np.stack([zeta_tilde(params, m, V[m], k) for k in (0, 1)]) for m in (0, 1)]
        leading = [leading_mask(params, m, own[m], own[1 - m], q0, q1) for m in (0, 1)]
        for _ in range(OWN_ROUNDS):
            new = [best_own_rates(params, m, V[m], own[1 - m], cross[m], leading[m], q0, q1)
                   for m in (0, 1)]
            change = max(float(np.max(np.abs(new[m] - own[m]))) for m in (0, 1))
            own = new
            if change < 1e-12:
                break
        for m in (0, 1):
            _set_exchange_rates(params, m, own[m], cross[m], Z, ZS, q[m])
    delta, H = hamiltonian_arrays(params, Z, q0, q1)
    return SliceFields(Z, ZS, delta, H)


def slice_fields(result: SolveResult, index: int) -> SliceFields:
    """已存时间切片 index 上的 Z、Z^S、Δ、ℋ"""
    return rate_fields(result.params, result.regime, result.values[index])


def rate_load(params: ModelParams, delta: np.ndarray, q0, q1) -> np.ndarray:
    """每个状态上所有开放通道的强度之和 Σ_{k,i,j} 1{φ(k)qⁱ<q̄} Λʲ(Δ^{k,i})"""
    q = (q0, q1)
    total = 0.0
    for k in (0, 1):
        for i in (0, 1):
            lam = intensity(params, 0, delta[k, i]) + intensity(params, 1, delta[k, i])
            total = total + np.where(side_open(params, k, q[i]), lam, 0.0)
    return total


def _check_stability(params: ModelParams, delta, q0, q1, dt: float, t: float) -> None:
    load = rate_load(params, delta, q0, q1) * dt
    worst = np.unravel_index(int(np.argmax(load)), load.shape)
    if not load[worst] < STABILITY_LIMIT:
        q = (int(q0[worst]), int(q1[worst]))
        raise StabilityError(f"dt·ΣΛ = {load[worst]:.3g} ≥ {STABILITY_LIMIT}", t=t, q=q)


# ---------- 求解器 ----------

def _sources(params: ModelParams, regime: Regime, V: np.ndarray, f: SliceFields, q0, q1):
    q = (q0, q1)
    out = np.empty_like(V)
    for m in (0, 1):
        if m in regime.contracting():
            v = V[m]
            total = g0s_eval(params, f.ZS[m], q[m], m)
            for k in (0, 1):
                total = total + _g_side(params, m, k, f.Z[m, k, m], f.Z[m, k, 1 - m],
                                        f.delta[k], q0, q1, v,
                                        shifted(v, k, m), shifted(v, k, 1 - m))
            out[m] = total
        else:
            out[m] = f.H[m] - 0.5 * params.gamma[m] * params.sigma ** 2 * q[m] ** 2
    return out


def time_grid(params: ModelParams, dt: float) -> Tuple[float, np.ndarray]:
    """将 dt 调整为整除 T 的步长，返回 (dt, times)"""
    if not dt > 0:
        raise ConfigError(f"必须为正数，当前值 {dt}", key="dt")
    n_steps = max(1, int(math.ceil(params.T / dt - 1e-9)))
    return params.T / n_steps, np.linspace(0.0, params.T, n_steps + 1)


def solve(regime, params: ModelParams, dt: float = 1e-4,
          snapshots: Optional[Sequence[float]] = None) -> SolveResult:
    """
    从 T 向 0 做显式欧拉推进

    Args:
        regime: none / one / both
        params: 模型参数
        dt: 时间步长（会被调整为整除 T）
        snapshots: 导出 CSV 时使用的时刻

    Returns:
        保存全部时间切片的 SolveResult

    Raises:
        StabilityError: dt·max ΣΛ ≥ 0.5
        SolverError: 出现非有限值或交易所值函数非负
    """
    regime = Regime.parse(regime)
    dt, times = time_grid(params, dt)
    n_steps = len(times) - 1
    n = params.n_states
    q0, q1 = params.inventory_mesh()

    values = np.empty((n_steps + 1, 2, n, n))
    values[-1, 0], values[-1, 1] = regime.terminal
    log(f"开始求解 regime={regime.value}, dt={dt:.3g}, 步数={n_steps}, 状态数={n * n}")

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for step in range(n_steps, 0, -1):
            V = values[step]
            f = rate_fields(params, regime, V)
            _check_stability(params, f.delta, q0, q1, dt, times[step])
            values[step - 1] = V + dt * _sources(params, regime, V, f, q0, q1)
            ValueGrid(times[step - 1], values[step - 1], regime).check()

    result = SolveResult(regime, params, dt, times, values, snapshots)
    log(f"求解完成 regime={regime.value}, 值函数(0,(0,0)) = "
        f"({result.value(0, (0, 0)):.6g}, {result.value(1, (0, 0)):.6g})")
    return result


def solve_no_incentive(params: ModelParams, dt: float = 1e-4,
                       snapshots: Optional[Sequence[float]] = None) -> SolveResult:
    """无合约：ŵ₀、ŵ₁，终值 0"""
    return solve(Regime.NONE, params, dt, snapshots)


def solve_one_incentive(params: ModelParams, dt: float = 1e-4,
                        snapshots: Optional[Sequence[float]] = None) -> SolveResult:
    """交易所 0 签约、交易所 1 被动：v̂₀、v̂₁，终值 (−1, 0)"""
    return solve(Regime.ONE, params, dt, snapshots)


def solve_two_incentive(params: ModelParams, dt: float = 1e-4,
                        snapshots: Optional[Sequence[float]] = None) -> SolveResult:
    """两个交易所都签约：v₀、v₁，终值 (−1, −1)"""
    return solve(Regime.BOTH, params, dt, snapshots)


def solve_with_retry(regime, params: ModelParams, dt: float = 1e-4,
                     snapshots: Optional[Sequence[float]] = None,
                     max_halvings: int = MAX_HALVINGS) -> SolveResult:
    """
    失稳或发散时将 dt 减半重试

    Raises:
        SolverError: 减半 max_halvings 次后仍失败
    """
    for attempt in range(max_halvings + 1):
        try:
            return solve(regime, params, dt, snapshots)
        except SolverError as e:
            if attempt == max_halvings:
                raise
            warn(f"{e.message}，步长减半为 {dt / 2:.3g} 后重试")
            dt /= 2.0


# ---------- 派生量 ----------

def reservation_utility(result: SolveResult, maker: int, q0: InventoryPair = (0, 0)) -> float:
    """做市商 i 的保留效用 −exp(−γⁱŵᵢ(0, q₀))"""
    if result.regime is not Regime.NONE:
        raise MissingResultError("保留效用需要 none 情形的求解结果")
    return -math.exp(-result.params.gamma[maker] * result.value(maker, q0))


def solve_fee_value(result: SolveResult, exchange: int) -> np.ndarray:
    """
    被动交易所的手续费价值 u_m(0, ·)

    报价取自 result 所在情形的 Δ 曲面，u(T, ·) = −1。

    Returns:
        形状 (n, n) 的 t=0 网格
    """
    params = result.params
    m = exchange
    q0, q1 = params.inventory_mesh()
    q = (q0, q1)
    discount = math.exp(-params.eta[m] * params.c[m])
    u = -np.ones((params.n_states, params.n_states))
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(result.n_steps, 0, -1):
            delta = slice_fields(result, step).delta
            total = 0.0
            for k in (0, 1):
                for i in (0, 1):
                    target = shifted(u, k, i)
                    flow = sum(intensity(params, j, delta[k, i])
                               * ((discount if j == m else 1.0) * target - u) for j in (0, 1))
                    total = total + np.where(side_open(params, k, q[i]), flow, 0.0)
            u = u + result.dt * total
            if not np.all(np.isfinite(u)) or np.any(u >= 0):
                raise SolverError(f"交易所 {m} 的手续费价值失去负性", t=result.times[step - 1])
    return u


def exchange_value_grids(results: Dict[Regime, SolveResult]) -> Dict[Regime, np.ndarray]:
    """
    各情形下两个交易所在 t=0 的效用网格，形状 (2, n, n)

    签约交易所 m 报告 exp(ηᵐŵ_m(0,q))·v_m(0,q)（合约初值设为做市商的保留水平），
    被动交易所报告手续费价值 u_m(0,q)。

    Raises:
        MissingResultError: 缺少 none 情形的结果
    """
    baseline = results.get(Regime.NONE)
    if baseline is None:
        raise MissingResultError("计算交易所价值需要 none 情形的求解结果")
    out = {}
    for regime, result in results.items():
        grids = np.empty((2, result.params.n_states, result.params.n_states))
        for m in (0, 1):
            if m in regime.contracting():
                shift = np.exp(result.params.eta[m] * baseline.values[0, m])
                grids[m] = shift * result.values[0, m]
            else:
                grids[m] = solve_fee_value(result, m)
        out[regime] = grids
    return out


def exchange_values(results: Dict[Regime, SolveResult],
                    q: InventoryPair = (0, 0)) -> Dict[Regime, Tuple[float, float]]:
    """exchange_value_grids 在库存 q 处的取值"""
    grids = exchange_value_grids(results)
    out = {}
    for regime, grid in grids.items():
        i0, i1 = results[regime].params.index(q)
        out[regime] = (float(grid[0, i0, i1]), float(grid[1, i0, i1]))
    return out


def quote_surface(result: SolveResult, t: float = 0.0) -> Dict[InventoryPair, QuoteMatrix]:
    """t 时刻每个库存状态上的均衡报价"""
    params = result.params
    delta = slice_fields(result, result.slice_index(t)).delta
    return {
        q: QuoteMatrix(delta[:, :, q[0] + params.q_bar, q[1] + params.q_bar])
        for q in inventory_states(params.q_bar)
    }


# ---------- CSV 导出 ----------

def csv_columns(regime: Regime) -> List[str]:
    """固定的 CSV 表头顺序"""
    columns = ["t", "q0", "q1", *regime.value_names]
    for l in (0, 1):
        for k in SIDES:
            for i in (0, 1):
                for j in (0, 1):
                    columns.append(f"z{l}_{k.label}_{i}_{j}")
        columns.append(f"z{l}_S")
    for k in SIDES:
        for i in (0, 1):
            columns.append(f"delta_{k.label}_{i}")
    return columns


def result_rows(result: SolveResult) -> List[dict]:
    """快照时刻每个状态一行"""
    params = result.params
    names = result.regime.value_names
    rows = []
    for t in result.snapshots:
        index = result.slice_index(t)
        f = slice_fields(result, index)
        for q in inventory_states(params.q_bar):
            a, b = q[0] + params.q_bar, q[1] + params.q_bar
            row = {"t": float(result.times[index]), "q0": q[0], "q1": q[1],
                   names[0]: float(result.values[index, 0, a, b]),
                   names[1]: float(result.values[index, 1, a, b])}
            for l in (0, 1):
                for k in SIDES:
                    for i in (0, 1):
                        for j in (0, 1):
                            row[f"z{l}_{k.label}_{i}_{j}"] = float(f.Z[l, k, i, j, a, b])
                row[f"z{l}_S"] = float(f.ZS[l, a, b])
            for k in SIDES:
                for i in (0, 1):
                    row[f"delta_{k.label}_{i}"] = float(f.delta[k, i, a, b])
            rows.append(row)
    return rows


def export_csv(result: SolveResult, path: str) -> str:
    """将快照写入 CSV（原子替换），返回路径"""
    columns = csv_columns(result.regime)
    handler = CSVHandler(path, required_fields=columns[:5])
    handler.write_data(result_rows(result), headers=columns)
    log(f"已写入 {path}")
    return path
