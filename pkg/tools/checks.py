"""
性质与验收检查
check 子命令逐项运行并输出判定表；gated 为 False 的项只报告不参与退出码
"""

import math
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from models.base import BaseModel
from models.params import ModelParams
from models.rates import RateVector
from models.results import Regime, SolveResult
from utils.config import RunConfig
from utils.console import log
from utils.errors import EngineError
from .equilibrium import (
    best_response_bruteforce, delta_fixed_point, gamma_quote, iterate_best_responses, oracle_tolerance,
)
from .pde_engine import (
    exchange_values, g0k_eval, g0s_eval, own_branch, shifted, slice_fields, solve, solve_with_retry,
    zeta_tilde,
)
from .simulator import exchange_utility, martingale_check, mm_utility, simulate_paths

REGIMES = (Regime.NONE, Regime.ONE, Regime.BOTH)


class CheckResult(BaseModel):
    """单项检查结果"""

    def __init__(self, name: str, passed: bool, gated: bool = True, message: str = "",
                 detail: Optional[Dict[str, object]] = None):
        self.name = name
        self.passed = bool(passed)
        self.gated = gated
        self.message = message
        self.detail = detail or {}


class CheckPlan(BaseModel):
    """检查规模：quick 模式使用缩小的桌面配置"""

    def __init__(self, params: ModelParams, dt: float, sim_dt: float, paths: int,
                 draws: int, mesh: float, seed: int, sweep: tuple):
        self.params = params
        self.dt = dt
        self.sim_dt = sim_dt
        self.paths = paths
        self.draws = draws
        self.mesh = mesh
        self.seed = seed
        self.sweep = sweep

    @classmethod
    def from_config(cls, config: RunConfig, quick: bool = False) -> "CheckPlan":
        if quick:
            return cls(config.params.replace(q_bar=3, T=0.2), 2.5e-4, 1e-4,
                       min(config.paths, 4000), 20, config.mesh, config.seed,
                       (config.params.gamma[0],))
        return cls(config.params, config.dt, config.sim_dt, config.paths, 200,
                   config.mesh, config.seed, config.gamma_sweep)


# ---------- 各项检查 ----------

def check_fixed_point(plan: CheckPlan) -> CheckResult:
    """Δ 与交替网格最优反应一致（容差见 oracle_tolerance）"""
    params = plan.params
    rng = np.random.default_rng(plan.seed)
    worst = 0.0
    worst_single = 0.0
    for _ in range(plan.draws):
        rates = (RateVector(rng.uniform(-1, 1, (2, 2, 2))), RateVector(rng.uniform(-1, 1, (2, 2, 2))))
        q = tuple(int(v) for v in rng.integers(-params.q_bar, params.q_bar + 1, 2))
        exact = delta_fixed_point(params, rates, q).delta
        # 固定对手为 Δ 时的单方最优反应
        for i in (0, 1):
            response = best_response_bruteforce(params, i, exact[:, 1 - i], rates[i], q, plan.mesh)
            worst_single = max(worst_single, float(np.max(np.abs(exact[:, i] - response))))
        oracle = iterate_best_responses(params, rates, q, plan.mesh).delta
        worst = max(worst, float(np.max(np.abs(exact - oracle))))
    tol = oracle_tolerance(params, plan.mesh)
    passed = worst_single <= plan.mesh * (1 + 1e-6) and worst <= tol * (1 + 1e-6)
    return CheckResult("fixed point vs mesh best responses", passed,
                       message=f"{plan.draws} 组抽样，单方偏差 {worst_single:.3g}，"
                               f"交替迭代偏差 {worst:.3g}（容差 {tol:.3g}）",
                       detail={"max_single_diff": worst_single, "max_abs_diff": worst,
                               "tolerance": tol})


def _mc_entry(name, est, reference):
    z = est.z_score(reference)
    return {"name": name, "mean": est.mean, "se": est.se, "reference": reference, "z": z}


def check_mc_one(plan: CheckPlan, result: SolveResult) -> CheckResult:
    """单边签约：交易所 0 与做市商 0 的 MC 效用与 PDE 一致"""
    batch = simulate_paths(Regime.ONE, result, plan.paths, plan.seed, plan.sim_dt)
    entries = [
        _mc_entry("exchange0", exchange_utility(batch, 0), result.value(0, (0, 0))),
        _mc_entry("maker0", mm_utility(batch, 0), -1.0),
    ]
    passed = all(abs(e["z"]) <= 3.0 for e in entries)
    return CheckResult("PDE/MC consistency (one)", passed,
                       message=", ".join(f"{e['name']} z={e['z']:.2f}" for e in entries),
                       detail={"estimates": entries})


def check_mc_none(plan: CheckPlan, result: SolveResult) -> CheckResult:
    """无合约：两位做市商的 MC 效用与 −exp(−γŵ) 一致"""
    batch = simulate_paths(Regime.NONE, result, plan.paths, plan.seed, plan.sim_dt)
    entries = [
        _mc_entry(f"maker{i}", mm_utility(batch, i),
                  -math.exp(-plan.params.gamma[i] * result.value(i, (0, 0))))
        for i in (0, 1)
    ]
    passed = all(abs(e["z"]) <= 3.0 for e in entries)
    return CheckResult("PDE/MC consistency (none)", passed,
                       message=", ".join(f"{e['name']} z={e['z']:.2f}" for e in entries),
                       detail={"estimates": entries})


def check_spillover(results: Dict[Regime, SolveResult]) -> List[CheckResult]:
    """交易所 1 的价值随签约情形的排序与差距比（均参与判定）"""
    values = exchange_values(results, (0, 0))
    v = [values[r][1] for r in REGIMES]
    ordered = v[0] < v[1] < v[2]
    first, second = v[1] - v[0], v[2] - v[1]
    ratio = first / second if second > 0 else float("inf")
    detail = {"exchange1": dict(zip((r.value for r in REGIMES), v)), "gap_ratio": ratio}
    return [
        CheckResult("spillover ordering", ordered,
                    message="V_none={:.4g} < V_one={:.4g} < V_both={:.4g}".format(*v), detail=detail),
        CheckResult("spillover gap ratio ≥ 5", ordered and ratio >= 5.0,
                    message=f"(V_one−V_none)/(V_both−V_one) = {ratio:.3g}", detail=detail),
    ]


def _zero_bid(result: SolveResult) -> np.ndarray:
    q_bar = result.params.q_bar
    return slice_fields(result, 0).delta[0, :, q_bar, q_bar]


def check_quote_compression(plan: CheckPlan) -> List[CheckResult]:
    """零库存买价：无合约 > 单边 > 双边；z=0 时的基本价差与闭式一致"""
    rows = []
    ok = True
    for g0 in plan.sweep:
        params = plan.params.replace(gamma=(g0, plan.params.gamma[1]))
        bids = {r: _zero_bid(solve_with_retry(r, params, plan.dt)) for r in REGIMES}
        for i in (0, 1):
            ok &= bool(bids[Regime.NONE][i] > bids[Regime.ONE][i] > bids[Regime.BOTH][i])
        rows.append({"gamma0": g0, **{f"bid{i}_{r.value}": float(bids[r][i])
                                      for r in REGIMES for i in (0, 1)}})
    params = plan.params
    g = params.gamma[0]
    closed = math.log1p(params.sigma * g / params.kappa) / g
    error = abs(gamma_quote(params, 0, 0, (0.0, 0.0), 0) - closed)
    return [
        CheckResult("quote compression", ok, message=f"{len(rows)} 个 γ⁰ 点",
                    detail={"rows": rows}),
        CheckResult("fundamental spread", error <= 1e-10,
                    message=f"|Γ − log(1+σγ/κ)/γ| = {error:.2e}"),
    ]


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


def check_symmetry(results: Dict[Regime, SolveResult], plan: CheckPlan) -> List[CheckResult]:
    """镜像 q→−q 与做市商互换对称性；欧拉收敛阶"""
    out = []
    symmetric = plan.params.A[0] == plan.params.A[1] and plan.params.c[0] == plan.params.c[1]
    for regime, result in results.items():
        mirror = _relative_gap(result.values, result.values[:, :, ::-1, ::-1])
        out.append(CheckResult(f"mirror symmetry ({regime.value})", mirror <= 1e-10,
                               message=f"相对偏差 {mirror:.2e}"))
        if regime is not Regime.ONE:
            swap = _relative_gap(result.values[:, 0], np.swapaxes(result.values[:, 1], 1, 2))
            fully = symmetric and plan.params.gamma[0] == plan.params.gamma[1] \
                and plan.params.eta[0] == plan.params.eta[1]
            out.append(CheckResult(f"maker swap symmetry ({regime.value})", swap <= 1e-10, gated=fully,
                                   message=f"相对偏差 {swap:.2e}"))

    params = plan.params.replace(T=min(plan.params.T, 0.2))
    base = 1e-3
    values = [solve(Regime.NONE, params, base / 2 ** n).values[0] for n in range(3)]
    e1 = float(np.max(np.abs(values[0] - values[1])))
    e2 = float(np.max(np.abs(values[1] - values[2])))
    order = math.log2(e1 / e2) if e2 > 0 else float("inf")
    out.append(CheckResult("Euler convergence order", order >= 0.8, message=f"经验阶 {order:.3f}",
                           detail={"errors": [e1, e2]}))
    return out


def _in_branch(params: ModelParams, m: int, k: int, z: float, z_comp: float,
               q, leading: bool) -> bool:
    own = gamma_quote(params, m, k, (z, z), q[m])
    other = gamma_quote(params, 1 - m, k, (z_comp, z_comp), q[1 - m])
    return (own <= other) == leading


def _certify_state(params: ModelParams, V: np.ndarray, f, m: int, a: int, b: int,
                   branch: np.ndarray, width: float = 0.5, points: int = 41) -> Dict[str, float]:
    """
    在 (a, b) 处比较引擎支付率与其邻域网格

    Args:
        branch: (2 k, n, n) 引擎为交易所 m 选定的自有支付率分支

    Returns:
        各类支付率的最大改进量（正数表示网格点优于引擎解）；
        own 只比较同一分支内的网格点，own_any 不限分支
    """
    q = (a - params.q_bar, b - params.q_bar)
    v = V[m]
    y = v[a, b]
    grid = np.linspace(-width, width, points)
    zS = f.ZS[m, a, b]
    # g^{m,S} 为凸函数，闭式解是最小点
    base_S = g0s_eval(params, zS, q[m], m)
    gain_S = float(base_S - np.min(g0s_eval(params, zS + grid, q[m], m)))
    gain_cross = 0.0
    gain_own = 0.0
    gain_any = 0.0
    for k in (0, 1):
        y1, y2 = shifted(v, k, m)[a, b], shifted(v, k, 1 - m)[a, b]
        z_own = f.Z[m, k, m, 0, a, b]
        z_cross = f.Z[m, k, 1 - m, :, a, b]
        z_comp = f.Z[1 - m, k, 1 - m, 0, a, b]
        base = g0k_eval(params, m, k, z_own, z_cross, z_comp, q, y, y1, y2)
        for j in (0, 1):
            for eps in grid:
                trial = z_cross.copy()
                trial[j] += eps
                value = g0k_eval(params, m, k, z_own, trial, z_comp, q, y, y1, y2)
                gain_cross = max(gain_cross, value - base)
        # 自有支付率改变时 Δ 随之改变
        leading = bool(branch[k, a, b])
        for eps in grid:
            value = g0k_eval(params, m, k, z_own + eps, z_cross, z_comp, q, y, y1, y2)
            gain_any = max(gain_any, value - base)
            if _in_branch(params, m, k, z_own + eps, z_comp, q, leading):
                gain_own = max(gain_own, value - base)
    return {"S": gain_S, "cross": gain_cross, "own": gain_own, "own_any": gain_any,
            "scale": abs(y)}


def _engine_branch(params: ModelParams, regime: Regime, V: np.ndarray, f, m: int) -> np.ndarray:
    """引擎的情形判断：对手参照为单边时做市商 1 的支付率、双边时对手的 ζ̃"""
    q0, q1 = params.inventory_mesh()
    if regime is Regime.ONE:
        reference = f.Z[1, :, 1, 0]
    else:
        reference = np.stack([zeta_tilde(params, 1 - m, V[1 - m], k) for k in (0, 1)])
    return own_branch(params, m, V[m], reference, q0, q1)


def check_optimizers(results: Dict[Regime, SolveResult], plan: CheckPlan,
                     states: int = 50) -> List[CheckResult]:
    """
    合约支付率的网格认证

    g^{m,S} 的闭式解不高于网格点，交叉支付率与分支内的自有支付率不低于网格点（参与判定）；
    跨分支的自有支付率改进（做市商改为跟报对手）只报告
    """
    rng = np.random.default_rng(plan.seed + 1)
    worst = {"S": 0.0, "cross": 0.0, "own": 0.0, "own_any": 0.0}
    for regime in (Regime.ONE, Regime.BOTH):
        result = results[regime]
        params = result.params
        for _ in range(states):
            index = int(rng.integers(0, result.n_steps))
            a, b = (int(v) for v in rng.integers(0, params.n_states, 2))
            V = result.values[index]
            f = slice_fields(result, index)
            for m in regime.contracting():
                branch = _engine_branch(params, regime, V, f, m)
                gains = _certify_state(params, V, f, m, a, b, branch)
                for key in worst:
                    worst[key] = max(worst[key], gains[key] / max(gains["scale"], 1e-12))
    tol = 1e-6
    return [
        CheckResult("optimal price-exposure rate", worst["S"] <= tol,
                    message=f"最大相对改进 {worst['S']:.2e}"),
        CheckResult("optimal cross rates", worst["cross"] <= tol,
                    message=f"最大相对改进 {worst['cross']:.2e}"),
        CheckResult("optimal own rate", worst["own"] <= tol,
                    message=f"分支内最大相对改进 {worst['own']:.2e}"),
        CheckResult("own rate across branches", worst["own_any"] <= tol, gated=False,
                    message=f"改为跟报对手的最大相对改进 {worst['own_any']:.2e}"),
    ]


def check_martingale(plan: CheckPlan, result: SolveResult) -> List[CheckResult]:
    """最优报价下效用过程的均值平稳；报价放大 20% 时向上漂移"""
    checkpoints = list(np.linspace(0.0, plan.params.T, 5))
    optimal = simulate_paths(Regime.NONE, result, plan.paths, plan.seed, plan.sim_dt,
                             checkpoints=checkpoints)
    flat = martingale_check(optimal, 0)
    perturbed = simulate_paths(Regime.NONE, result, plan.paths, plan.seed, plan.sim_dt,
                               checkpoints=checkpoints, quote_scale=(0, 1.2))
    drift = martingale_check(perturbed, 0)
    detectable = drift["drift"] > 3.0 * drift["ses"][-1]
    return [
        CheckResult("martingale flatness", flat["max_z"] <= 3.0,
                    message=f"最大偏离 {flat['max_z']:.2f} SE", detail=flat),
        CheckResult("perturbed quote drift", detectable,
                    message=f"漂移 {drift['drift']:.3g}（SE {drift['ses'][-1]:.2g}）", detail=drift),
    ]


# ---------- 汇总 ----------

def _guard(name: str, func: Callable[[], object]) -> List[CheckResult]:
    """单项异常不中断整体检查"""
    try:
        out = func()
        return out if isinstance(out, list) else [out]
    except EngineError as e:
        return [CheckResult(name, False, message=f"异常: {e.message}")]


def run_checks(config: RunConfig, quick: bool = False) -> List[CheckResult]:
    """
    运行全部检查

    Args:
        config: 运行配置（提供参数、步长、路径数与种子）
        quick: 使用 q̄=3、T=0.2 的缩小配置
    """
    plan = CheckPlan.from_config(config, quick)
    log(f"开始检查（{'quick' if quick else 'full'}）：q̄={plan.params.q_bar}, T={plan.params.T}, "
        f"dt={plan.dt:g}, 路径数={plan.paths}")
    checks: List[CheckResult] = []
    checks += _guard("fixed point vs mesh best responses", lambda: check_fixed_point(plan))
    results: Dict[Regime, SolveResult] = {}
    try:
        for regime in REGIMES:
            results[regime] = solve_with_retry(regime, plan.params, plan.dt)
    except EngineError as e:
        checks.append(CheckResult("solve", False, message=f"求解失败: {e.message}"))
        return checks
    checks += _guard("PDE/MC consistency (one)", lambda: check_mc_one(plan, results[Regime.ONE]))
    checks += _guard("PDE/MC consistency (none)", lambda: check_mc_none(plan, results[Regime.NONE]))
    checks += _guard("spillover ordering", lambda: check_spillover(results))
    checks += _guard("quote compression", lambda: check_quote_compression(plan))
    checks += _guard("symmetry", lambda: check_symmetry(results, plan))
    checks += _guard("closed-form rates", lambda: check_optimizers(results, plan))
    checks += _guard("martingale", lambda: check_martingale(plan, results[Regime.NONE]))
    return checks


def verdict_table(checks: List[CheckResult]) -> str:
    """判定表文本"""
    frame = pd.DataFrame([
        {"check": c.name, "verdict": "PASS" if c.passed else "FAIL",
         "gated": "yes" if c.gated else "info", "detail": c.message}
        for c in checks
    ])
    return frame.to_string(index=False)


def all_gated_pass(checks: List[CheckResult]) -> bool:
    return all(c.passed for c in checks if c.gated)
