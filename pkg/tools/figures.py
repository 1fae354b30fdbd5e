"""
图表生成
交易所价值（图 2）、报价随风险厌恶的变化（图 3）、报价随库存的变化（图 4），
每个面板输出一个 CSV 与一个由该 CSV 绘制的 SVG
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from models.params import ModelParams
from models.results import Regime, SolveResult
from utils.config import RunConfig
from utils.console import log, warn, set_quiet
from utils.csv_handler import CSVHandler
from utils.errors import EngineError
from .pde_engine import exchange_value_grids, slice_fields, solve_with_retry

REGIMES = (Regime.NONE, Regime.ONE, Regime.BOTH)

plt.rcParams.update({
    "svg.hashsalt": "sharedbook",
    "svg.fonttype": "path",
    "figure.figsize": (6.4, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.unicode_minus": False,
})


class FigureSpec(NamedTuple):
    title: str
    x: str
    xlabel: str
    ylabel: str
    # 画在右轴上的列（无合约时数量级不同）
    right: Tuple[str, ...] = ()


SPECS = {
    "fig2a": FigureSpec("Exchange 0 value vs q0 (q1 = 0)", "q0", "q0", "value", ("exchange0_none",)),
    "fig2b": FigureSpec("Exchange 1 value vs q1 (q0 = 0)", "q1", "q1", "value", ("exchange1_none",)),
    "fig2c": FigureSpec("Sum of exchange values vs q0 (q1 = 0)", "q0", "q0", "value", ("sum_none",)),
    "fig2d": FigureSpec("Exchange values vs common maker risk aversion", "gamma", "gamma", "value",
                        ("exchange0_none", "exchange1_none")),
    "fig3a": FigureSpec("Bid quotes at zero inventory vs gamma0", "gamma0", "gamma0", "bid quote ($)"),
    "fig3b": FigureSpec("Bid quotes at zero inventory vs common gamma", "gamma", "gamma", "bid quote ($)"),
    "fig4a": FigureSpec("Bid quotes vs q0 (q1 = 0)", "q0", "q0", "bid quote ($)"),
    "fig4b": FigureSpec("Bid quotes vs q1 (q0 = 0)", "q1", "q1", "bid quote ($)"),
}


def _to_ce(value: float, a: float) -> float:
    """效用 → 确定性等价 −ln(−u)/a"""
    return -math.log(-value) / a if value < 0 else float("nan")


def solve_all(params: ModelParams, dt: float) -> Dict[Regime, SolveResult]:
    """三种情形各求解一次"""
    return {regime: solve_with_retry(regime, params, dt) for regime in REGIMES}


def bid_quotes(result: SolveResult) -> np.ndarray:
    """t=0 时两位做市商的买价报价网格，形状 (2 i, n, n)"""
    return slice_fields(result, 0).delta[0]


def sweep_point(task: Tuple[ModelParams, float, Tuple[int, int]]) -> Dict[str, object]:
    """
    扫描中的单个参数点：求解三种情形，返回 q 处的交易所价值与买价

    出错时返回 error 字段而不抛出，调用方继续处理其余点。
    """
    params, dt, q = task
    try:
        results = solve_all(params, dt)
        grids = exchange_value_grids(results)
        a, b = params.index(q)
        point: Dict[str, object] = {}
        for regime in REGIMES:
            quotes = bid_quotes(results[regime])
            for m in (0, 1):
                point[f"exchange{m}_{regime.value}"] = float(grids[regime][m, a, b])
                point[f"bid{m}_{regime.value}"] = float(quotes[m, a, b])
        return point
    except EngineError as e:
        return {"error": e.message}


def _quiet_sweep_point(task) -> Dict[str, object]:
    set_quiet(True)
    return sweep_point(task)


def _run_sweep(tasks: List[tuple], workers: int) -> List[Dict[str, object]]:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_quiet_sweep_point, tasks))
    return [sweep_point(task) for task in tasks]


class FigureBuilder:
    """
    按配置构造各面板的数据表

    基准求解与扫描结果在一次运行中缓存，多个面板共享
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.params = config.params
        self._base: Optional[Dict[Regime, SolveResult]] = None
        self._grids: Optional[Dict[Regime, np.ndarray]] = None
        self._sweeps: Dict[str, List[Dict[str, object]]] = {}
        self.errors: List[str] = []

    # ---------- 缓存 ----------
    @property
    def base(self) -> Dict[Regime, SolveResult]:
        if self._base is None:
            self._base = solve_all(self.params, self.config.dt)
        return self._base

    @property
    def grids(self) -> Dict[Regime, np.ndarray]:
        if self._grids is None:
            self._grids = exchange_value_grids(self.base)
        return self._grids

    def _sweep(self, name: str) -> List[Dict[str, object]]:
        if name not in self._sweeps:
            gammas = getattr(self.config, name)
            if name == "gamma_sweep":
                param_list = [self.params.replace(gamma=(g, self.params.gamma[1])) for g in gammas]
            else:
                param_list = [self.params.replace(gamma=(g, g)) for g in gammas]
            log(f"参数扫描 {name}：{len(gammas)} 个点")
            tasks = [(p, self.config.dt, self.config.q_start) for p in param_list]
            points = _run_sweep(tasks, self.config.workers)
            for g, point in zip(gammas, points):
                if "error" in point:
                    message = f"{name} γ={g}: {point['error']}"
                    warn(f"扫描点失败，已跳过 {message}")
                    self.errors.append(message)
            self._sweeps[name] = points
        return self._sweeps[name]

    # ---------- 数值转换 ----------
    def _value(self, value: float, exchange: int) -> float:
        if self.config.ce:
            return _to_ce(value, self.params.eta[exchange])
        return value

    def _meta(self, frame: pd.DataFrame, params: Optional[ModelParams] = None) -> pd.DataFrame:
        params = params or self.params
        frame["beta"] = params.beta
        frame["q_bar"] = params.q_bar
        frame["units"] = "ce" if self.config.ce else "utility"
        return frame

    # ---------- 各面板 ----------
    def _inventory_table(self, axis: int, kind: str) -> pd.DataFrame:
        params = self.params
        q_axis = params.inventory_axis()
        index = [(q + params.q_bar, params.q_bar) if axis == 0 else (params.q_bar, q + params.q_bar)
                 for q in q_axis]
        frame = pd.DataFrame({f"q{axis}": q_axis})
        for regime in REGIMES:
            if kind == "quotes":
                quotes = bid_quotes(self.base[regime])
                for m in (0, 1):
                    frame[f"bid{m}_{regime.value}"] = [quotes[m][a, b] for a, b in index]
            else:
                grid = self.grids[regime]
                values = [[self._value(grid[m][a, b], m) for a, b in index] for m in (0, 1)]
                if kind == "sum":
                    frame[f"sum_{regime.value}"] = np.add(values[0], values[1])
                else:
                    frame[f"exchange{kind}_{regime.value}"] = values[int(kind)]
        frame["gamma0"] = params.gamma[0]
        frame["gamma1"] = params.gamma[1]
        return self._meta(frame)

    def _sweep_table(self, name: str, x: str, prefix: str) -> pd.DataFrame:
        gammas = getattr(self.config, name)
        points = self._sweep(name)
        rows = []
        for g, point in zip(gammas, points):
            row = {x: g}
            for regime in REGIMES:
                for m in (0, 1):
                    key = f"{prefix}{m}_{regime.value}"
                    value = point.get(key, float("nan"))
                    if prefix == "exchange" and not np.isnan(value):
                        value = self._value(value, m)
                    row[key] = value
            rows.append(row)
        frame = pd.DataFrame(rows)
        if x == "gamma0":
            frame["gamma1"] = self.params.gamma[1]
        frame["q0_start"], frame["q1_start"] = self.config.q_start
        return self._meta(frame)

    def table(self, figure: str) -> pd.DataFrame:
        """面板 figure 的数据表"""
        builders = {
            "fig2a": lambda: self._inventory_table(0, "0"),
            "fig2b": lambda: self._inventory_table(1, "1"),
            "fig2c": lambda: self._inventory_table(0, "sum"),
            "fig2d": lambda: self._sweep_table("common_gamma_sweep", "gamma", "exchange"),
            "fig3a": lambda: self._sweep_table("gamma_sweep", "gamma0", "bid"),
            "fig3b": lambda: self._sweep_table("common_gamma_sweep", "gamma", "bid"),
            "fig4a": lambda: self._inventory_table(0, "quotes"),
            "fig4b": lambda: self._inventory_table(1, "quotes"),
        }
        return builders[figure]()


def series_columns(frame: pd.DataFrame) -> List[str]:
    """以情形名结尾的数据列"""
    return [c for c in frame.columns if c.rsplit("_", 1)[-1] in {r.value for r in REGIMES}]


def render_svg(figure: str, csv_path: str, svg_path: str) -> str:
    """
    由 CSV 绘制 SVG（同一 CSV 得到同样的字节）

    Returns:
        SVG 路径
    """
    spec = SPECS[figure]
    frame = pd.read_csv(csv_path)
    fig, ax = plt.subplots()
    right_ax = ax.twinx() if spec.right else None
    for column in series_columns(frame):
        target = right_ax if column in spec.right else ax
        style = "--" if column in spec.right else "-"
        target.plot(frame[spec.x], frame[column], style, marker="o", markersize=3, label=column)
    ax.set_title(spec.title)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    handles, labels = ax.get_legend_handles_labels()
    if right_ax is not None:
        right_ax.set_ylabel(f"{spec.ylabel} (no contract)")
        more = right_ax.get_legend_handles_labels()
        handles, labels = handles + more[0], labels + more[1]
    ax.legend(handles, labels, fontsize=7, loc="best")
    fig.tight_layout()
    tmp = svg_path + ".tmp"
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, svg_path)
    return svg_path


def write_figure(figure: str, frame: pd.DataFrame, out_dir: str) -> Tuple[str, str]:
    """写出面板的 CSV 与 SVG"""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{figure}.csv")
    svg_path = os.path.join(out_dir, f"{figure}.svg")
    frame = frame.astype(object).where(frame.notna(), None)
    handler = CSVHandler(csv_path, required_fields=[SPECS[figure].x])
    handler.write_data(frame.to_dict("records"), headers=list(frame.columns))
    render_svg(figure, csv_path, svg_path)
    log(f"已写入 {csv_path} 与 {svg_path}")
    return csv_path, svg_path


def generate_figures(config: RunConfig, figures: Optional[Sequence[str]] = None) -> Dict[str, object]:
    """
    生成所选面板

    Returns:
        files（写出的文件）与 errors（失败的扫描点或面板）
    """
    builder = FigureBuilder(config)
    files: List[str] = []
    for figure in figures or config.figures:
        try:
            files.extend(write_figure(figure, builder.table(figure), config.out))
        except EngineError as e:
            warn(f"{figure} 生成失败: {e.message}")
            builder.errors.append(f"{figure}: {e.message}")
    return {"files": files, "errors": builder.errors}
