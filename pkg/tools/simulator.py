"""
蒙特卡洛模拟
在均衡报价与合约下模拟价格、库存与成交，估计做市商和交易所的期望效用，
用于与 PDE 解交叉验证
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.base import BaseModel
from models.params import ModelParams, InventoryPair, PHI, in_bounds
from models.paths import McEstimate, PathRecord
from models.results import Regime, SolveResult
from utils.console import log
from utils.errors import MissingResultError, SimulationError
from .market import intensity, clamp_quote
from .pde_engine import SliceFields, slice_fields, solve_fee_value

THINNING_LIMIT = 0.1
BATCH_SIZE = 1000
Z_LIMIT = 3.0


class PathBatch(BaseModel):
    """
    一批路径的终值与检查点

    inventory (P, 2)、counts (P, 2, 2, 2)、pl (P, 2)、Y (P, 2)、fees (P, 2)、price (P,)；
    checkpoint_pl / checkpoint_Y 形状 (C, P, 2)，对应 checkpoints 中的时刻
    """

    def __init__(self, regime: Regime, params: ModelParams, seed: int, sim_dt: float,
                 q_start: InventoryPair, inventory, counts, pl, Y, fees, price,
                 checkpoints, checkpoint_pl, checkpoint_Y, max_abs_inventory: int):
        self.regime = regime
        self.params = params
        self.seed = seed
        self.sim_dt = float(sim_dt)
        self.q_start = tuple(int(v) for v in q_start)
        self.inventory = inventory
        self.counts = counts
        self.pl = pl
        self.Y = Y
        self.fees = fees
        self.price = price
        self.checkpoints = np.asarray(checkpoints, dtype=float)
        self.checkpoint_pl = checkpoint_pl
        self.checkpoint_Y = checkpoint_Y
        self.max_abs_inventory = int(max_abs_inventory)

    @property
    def n_paths(self) -> int:
        return int(self.pl.shape[0])

    def to_dict(self):
        return {"regime": self.regime.value, "seed": self.seed, "sim_dt": self.sim_dt,
                "q_start": list(self.q_start), "n_paths": self.n_paths,
                "max_abs_inventory": self.max_abs_inventory}


def _sim_grid(params: ModelParams, sim_dt: float) -> Tuple[float, int]:
    if not sim_dt > 0:
        raise SimulationError(f"sim_dt 必须为正数，当前值 {sim_dt}")
    n_steps = max(1, int(math.ceil(params.T / sim_dt - 1e-9)))
    return params.T / n_steps, n_steps


def _check_regime(regime, result: SolveResult) -> Regime:
    regime = Regime.parse(regime)
    if result.regime is not regime:
        raise MissingResultError(f"需要 {regime.value} 情形的求解结果，实际为 {result.regime.value}")
    return regime


def _run(result: SolveResult, rngs: List[np.random.Generator], sizes: List[int],
         sim_dt: float, q_start: InventoryPair, checkpoints: Sequence[float],
         quote_scale: Optional[Tuple[int, float]] = None, record: bool = False):
    """
    按时间步推进全部路径；每批路径使用自己的随机数发生器

    Returns:
        (终值字典, 检查点数组, 轨迹字典或 None)
    """
    params = result.params
    dt, n_steps = _sim_grid(params, sim_dt)
    P = int(sum(sizes))
    q_bar = params.q_bar
    sigma = params.sigma
    gamma = np.asarray(params.gamma)
    c = params.c

    Q = np.tile(np.asarray(q_start, dtype=int), (P, 1))
    S = np.full(P, params.S0)
    pl = Q * params.S0 * 1.0
    Y = np.zeros((P, 2))
    fees = np.zeros((P, 2))
    counts = np.zeros((P, 2, 2, 2), dtype=int)
    max_abs = int(np.abs(Q).max())

    check_steps = [min(n_steps, int(round(t / dt))) for t in checkpoints]
    cp_pl = np.empty((len(check_steps), P, 2))
    cp_Y = np.empty((len(check_steps), P, 2))
    trace = None
    if record:
        trace = {"price": [S.copy()], "inventory": [Q.copy()], "counts": [counts.copy()],
                 "pl": [pl.copy()], "Y": [Y.copy()], "fees": [fees.copy()]}

    def snapshot(step):
        for n, s in enumerate(check_steps):
            if s == step:
                cp_pl[n] = pl
                cp_Y[n] = Y

    snapshot(0)
    cached: Tuple[int, Optional[SliceFields]] = (-1, None)
    for step in range(n_steps):
        t = step * dt
        index = result.slice_index(t)
        if cached[0] != index:
            cached = (index, slice_fields(result, index))
        f = cached[1]
        a, b = Q[:, 0] + q_bar, Q[:, 1] + q_bar
        Zp = f.Z[..., a, b]
        ZSp = f.ZS[:, a, b]
        Hp = f.H[:, a, b]
        dp = f.delta[:, :, a, b].copy()
        if quote_scale is not None:
            maker, scale = quote_scale
            for k in (0, 1):
                open_ = PHI[k] * Q[:, maker] < q_bar
                dp[k, maker] = np.where(open_, clamp_quote(params, dp[k, maker] * scale),
                                        params.delta_inf)
        best = dp.min(axis=1)
        capture = dp - params.beta * (dp - best[:, None])

        lam = np.stack([intensity(params, j, dp) for j in (0, 1)], axis=2)
        gate = (PHI[:, None, None] * Q.T[None, :, :] < q_bar)[:, :, None, :]
        load = (lam * gate).sum(axis=(0, 1, 2)) * dt
        if load.max() > THINNING_LIMIT:
            worst = int(np.argmax(load))
            raise SimulationError(f"sim_dt 过大：λ·dt = {load[worst]:.3g} > {THINNING_LIMIT}",
                                  path=worst, t=t)

        dW = np.concatenate([rng.standard_normal(size) for rng, size in zip(rngs, sizes)])
        U = np.concatenate([rng.random((2, 2, 2, size)) for rng, size in zip(rngs, sizes)], axis=-1)
        dS = sigma * math.sqrt(dt) * dW

        Y += (ZSp * dS + (0.5 * gamma[:, None] * sigma ** 2 * (ZSp + Q.T) ** 2 - Hp) * dt).T
        pl += Q * dS[:, None]
        S += dS

        for k in (0, 1):
            for i in (0, 1):
                for j in (0, 1):
                    # 同一步内逐通道重新门控，库存不会越过上限
                    open_ = PHI[k] * Q[:, i] < q_bar
                    hit = open_ & (U[k, i, j] < lam[k, i, j] * dt)
                    if not hit.any():
                        continue
                    if np.any(capture[k, i][hit] < best[k][hit] - 1e-12):
                        raise SimulationError("单笔价差收益低于最优报价", t=t)
                    Q[hit, i] += PHI[k]
                    counts[hit, k, i, j] += 1
                    pl[hit, i] += capture[k, i][hit]
                    Y[hit] += Zp[:, k, i, j][:, hit].T
                    fees[hit, j] += c[j]

        max_abs = max(max_abs, int(np.abs(Q).max()))
        if max_abs > q_bar:
            raise SimulationError(f"库存越过上限 {q_bar}", t=t)
        snapshot(step + 1)
        if record:
            for key, value in (("price", S), ("inventory", Q), ("counts", counts),
                               ("pl", pl), ("Y", Y), ("fees", fees)):
                trace[key].append(value.copy())

    final = {"inventory": Q, "counts": counts, "pl": pl, "Y": Y, "fees": fees,
             "price": S, "max_abs_inventory": max_abs}
    times = np.arange(n_steps + 1) * dt
    return final, (cp_pl, cp_Y), (times, trace)


def simulate_paths(regime, result: SolveResult, n_paths: int, seed: int = 0,
                   sim_dt: float = 1e-4, q_start: InventoryPair = (0, 0),
                   checkpoints: Optional[Sequence[float]] = None,
                   quote_scale: Optional[Tuple[int, float]] = None,
                   batch_size: int = BATCH_SIZE) -> PathBatch:
    """
    模拟 n_paths 条路径

    每 batch_size 条路径使用 SeedSequence(seed).spawn 派生的独立发生器，
    同一 (seed, n_paths) 的结果逐位相同。

    Args:
        regime: 必须与 result 的情形一致
        result: 对应情形的求解结果
        n_paths: 路径数
        seed: 随机种子
        sim_dt: 模拟步长
        q_start: 初始库存
        checkpoints: 记录 PL 与 Y 的时刻，缺省为 [0, T]
        quote_scale: (做市商, 倍数)，将该做市商的报价乘以倍数（偏离均衡的对照实验）
        batch_size: 每个随机数发生器负责的路径数

    Raises:
        SimulationError: 参数不合法、强度过大或库存越界
    """
    regime = _check_regime(regime, result)
    params = result.params
    if n_paths <= 0:
        raise SimulationError(f"路径数必须为正，当前值 {n_paths}")
    if not in_bounds(q_start, params.q_bar):
        raise SimulationError(f"初始库存 {q_start} 超出上限")
    if checkpoints is None:
        checkpoints = [0.0, params.T]
    n_batches = -(-n_paths // batch_size)
    sizes = [min(batch_size, n_paths - b * batch_size) for b in range(n_batches)]
    rngs = [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n_batches)]

    log(f"开始模拟 regime={regime.value}, 路径数={n_paths}, 批数={n_batches}, sim_dt={sim_dt:.3g}")
    final, (cp_pl, cp_Y), _ = _run(result, rngs, sizes, sim_dt, q_start, checkpoints, quote_scale)
    log(f"模拟完成，最大库存绝对值 {final['max_abs_inventory']}")
    return PathBatch(regime, params, seed, _sim_grid(params, sim_dt)[0], q_start,
                     final["inventory"], final["counts"], final["pl"], final["Y"],
                     final["fees"], final["price"], checkpoints, cp_pl, cp_Y,
                     final["max_abs_inventory"])


def simulate_path(regime, result: SolveResult, seed: int = 0, sim_dt: float = 1e-4,
                  q_start: InventoryPair = (0, 0),
                  quote_scale: Optional[Tuple[int, float]] = None) -> PathRecord:
    """单条路径的完整轨迹"""
    _check_regime(regime, result)
    if not in_bounds(q_start, result.params.q_bar):
        raise SimulationError(f"初始库存 {q_start} 超出上限")
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    _, _, (times, trace) = _run(result, [rng], [1], sim_dt, q_start, [], quote_scale,
                                record=True)
    return PathRecord(
        times=times,
        price=np.array(trace["price"])[:, 0],
        inventory=np.array(trace["inventory"])[:, 0],
        counts=np.array(trace["counts"])[:, 0],
        pl=np.array(trace["pl"])[:, 0],
        Y=np.array(trace["Y"])[:, 0],
        fees=np.array(trace["fees"])[:, 0],
        seed=seed,
    )


# ---------- 估计量 ----------

def mm_utility(batch: PathBatch, maker: int, contract: Optional[bool] = None) -> McEstimate:
    """
    做市商 i 的期望效用 E[−exp(−γⁱ(PL_T + ξⁱ))]

    Args:
        contract: 是否计入合约 ξⁱ = Y_T^i；缺省按情形判断该做市商是否签约
    """
    if contract is None:
        contract = maker in batch.regime.contracting()
    xi = batch.Y[:, maker] if contract else 0.0
    # 以初始持仓市值为基准
    gain = batch.pl[:, maker] - batch.q_start[maker] * batch.params.S0 + xi
    return McEstimate.from_samples(-np.exp(-batch.params.gamma[maker] * gain), batch.seed)


def exchange_utility(batch: PathBatch, exchange: int,
                     contract: Optional[bool] = None) -> McEstimate:
    """
    交易所 m 的期望效用 E[−exp(−ηᵐ(手续费 − ξᵐ))]，Y₀ = 0

    手续费统计两位做市商在交易所 m 上的全部成交
    """
    if contract is None:
        contract = exchange in batch.regime.contracting()
    xi = batch.Y[:, exchange] if contract else 0.0
    samples = -np.exp(-batch.params.eta[exchange] * (batch.fees[:, exchange] - xi))
    return McEstimate.from_samples(samples, batch.seed)


def certainty_equivalent(est: McEstimate, a: float, z: float = 1.96) -> Tuple[float, float, float]:
    """
    确定性等价 −ln(−u)/a 及其 delta 方法置信区间

    Returns:
        (ce, low, high)

    Raises:
        SimulationError: 均值非负
    """
    if est.mean >= 0:
        raise SimulationError(f"效用均值 {est.mean} 非负，无法取确定性等价")
    ce = -math.log(-est.mean) / a
    half = z * est.se / (a * abs(est.mean))
    return ce, ce - half, ce + half


def martingale_check(batch: PathBatch, maker: int) -> Dict[str, object]:
    """
    最优报价下 exp(−γⁱ(PL_t − PL_0 + Y_tⁱ)) 的均值应在各检查点保持为 1

    Returns:
        times、means、ses、max_z（相对 1 的最大偏离，单位为标准误）与 drift（末点减首点）
    """
    g = batch.params.gamma[maker]
    base = batch.checkpoint_pl[0, :, maker]
    means, ses = [], []
    for n in range(len(batch.checkpoints)):
        values = np.exp(-g * (batch.checkpoint_pl[n, :, maker] - base
                              + batch.checkpoint_Y[n, :, maker]))
        est = McEstimate.from_samples(values)
        means.append(est.mean)
        ses.append(est.se if n > 0 else 0.0)
    z = [abs(m - 1.0) / s if s > 0 else 0.0 for m, s in zip(means, ses)]
    return {
        "times": batch.checkpoints.tolist(),
        "means": means,
        "ses": ses,
        "max_z": max(z),
        "drift": means[-1] - means[0],
    }


def summarize(batch: PathBatch, result: SolveResult,
              include_passive: bool = False) -> Dict[str, object]:
    """
    汇总估计、PDE 参考值、3 倍标准误判定

    签约做市商参考 −1；未签约做市商参考 −exp(−γ·V(0,q₀))；
    签约交易所参考 v_m(0,q₀)；被动交易所仅在 include_passive 时参考手续费价值。
    """
    regime = batch.regime
    q = batch.q_start
    entries = []

    def add(name, est, reference):
        z = est.z_score(reference) if reference is not None else None
        entries.append({
            "name": name, "mean": est.mean, "se": est.se, "reference": reference,
            "z": z, "pass": None if z is None else abs(z) <= Z_LIMIT,
        })

    for i in (0, 1):
        contract = i in regime.contracting()
        reference = -1.0 if contract else -math.exp(-result.params.gamma[i] * result.value(i, q))
        add(f"maker{i}", mm_utility(batch, i, contract), reference)
    for m in (0, 1):
        if m in regime.contracting():
            add(f"exchange{m}", exchange_utility(batch, m, True), result.value(m, q))
        else:
            reference = None
            if include_passive:
                u = solve_fee_value(result, m)
                reference = float(u[q[0] + result.params.q_bar, q[1] + result.params.q_bar])
            add(f"exchange{m}", exchange_utility(batch, m, False), reference)

    gated = [e["pass"] for e in entries if e["pass"] is not None]
    return {"run": batch.to_dict(), "estimates": entries, "all_pass": all(gated)}
