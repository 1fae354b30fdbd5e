#!/usr/bin/env python
"""
共享订单簿做市激励引擎入口
子命令：solve（求解 PDE）、simulate（蒙特卡洛）、figures（图 2–4）、check（性质与验收检查）
"""

import argparse
import json
import os
from typing import List, Optional

import dotenv

from models.results import Regime, SolveResult
from utils.config import RunConfig
from utils.console import log, error
from utils.csv_handler import CSVHandler
from utils.errors import EngineError, MissingResultError

# 加载 .env 中的 SHAREDBOOK_ 前缀变量
dotenv.load_dotenv()


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """解析命令行参数"""
    parser = argparse.ArgumentParser(description="共享订单簿做市激励引擎")
    parser.add_argument("command", choices=["solve", "simulate", "figures", "check"],
                        help="要执行的子命令")
    parser.add_argument("--config", help="key=value 配置文件路径")
    parser.add_argument("--regime", choices=[r.value for r in Regime], help="签约情形")
    parser.add_argument("--dt", type=float, help="PDE 时间步长（天）")
    parser.add_argument("--sim-dt", dest="sim_dt", type=float, help="模拟时间步长（天）")
    parser.add_argument("--paths", type=int, help="模拟路径数")
    parser.add_argument("--seed", type=int, help="随机种子")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--figure", action="append", dest="figures",
                        help="图表编号（fig2a…fig4b），可重复；缺省生成全部")
    parser.add_argument("--ce", action="store_true", default=None,
                        help="图 2 报告确定性等价而不是效用")
    parser.add_argument("--q-start", dest="q_start", help="初始库存，例如 0,0")
    parser.add_argument("--workers", type=int, help="参数扫描的进程数")
    parser.add_argument("--dump-paths", dest="dump_paths", type=int,
                        help="simulate 额外导出的单路径轨迹条数")
    parser.add_argument("--quick", action="store_true",
                        help="check 使用缩小配置（q̄=3, T=0.2）")
    return parser.parse_args(argv)


def load_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "regime": args.regime,
        "dt": args.dt,
        "sim_dt": args.sim_dt,
        "paths": args.paths,
        "seed": args.seed,
        "out": args.out,
        "figures": ",".join(args.figures) if args.figures else None,
        "ce": args.ce,
        "q_start": args.q_start,
        "workers": args.workers,
        "dump_paths": args.dump_paths,
    }
    return RunConfig.load(args.config, overrides)


def result_path(config: RunConfig, regime: Regime, ext: str) -> str:
    return os.path.join(config.out, f"solve_{regime.value}.{ext}")


def cmd_solve(config: RunConfig) -> int:
    """求解所选情形，写出 npz（全部切片）与 CSV（快照）"""
    from tools.pde_engine import export_csv, solve_with_retry

    result = solve_with_retry(config.regime, config.params, config.dt, config.snapshots)
    result.save_npz(result_path(config, config.regime, "npz"))
    export_csv(result, result_path(config, config.regime, "csv"))
    return 0


def cmd_simulate(config: RunConfig) -> int:
    """读取已求解结果并模拟，输出 JSON 汇总；全部判定通过时返回 0"""
    from tools.simulator import simulate_path, simulate_paths, summarize

    path = result_path(config, config.regime, "npz")
    if not os.path.exists(path):
        raise MissingResultError(f"未找到 {path}，请先运行 solve --regime {config.regime.value}")
    result = SolveResult.load_npz(path)
    batch = simulate_paths(config.regime, result, config.paths, config.seed,
                           config.sim_dt, config.q_start)
    summary = summarize(batch, result)
    text = json.dumps(summary, ensure_ascii=False, indent=2, default=float)
    print(text)
    summary_path = os.path.join(config.out, f"simulate_{config.regime.value}.json")
    with open(summary_path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    log(f"已写入 {summary_path}")

    for n in range(config.dump_paths):
        record = simulate_path(config.regime, result, config.seed + n, config.sim_dt,
                               config.q_start)
        rows = record.rows()
        dump = os.path.join(config.out, f"path_{config.regime.value}_{n}.csv")
        CSVHandler(dump, required_fields=["t"]).write_data(rows, headers=list(rows[0]))
        log(f"已写入 {dump}")
    return 0 if summary["all_pass"] else 1


def cmd_figures(config: RunConfig) -> int:
    """生成图 2–4 的 CSV 与 SVG；任一扫描点失败时返回 1"""
    from tools.figures import generate_figures

    report = generate_figures(config)
    for message in report["errors"]:
        error(message)
    return 0 if not report["errors"] else 1


def cmd_check(config: RunConfig, quick: bool) -> int:
    """运行检查并打印判定表"""
    from tools.checks import all_gated_pass, run_checks, verdict_table

    checks = run_checks(config, quick)
    print(verdict_table(checks))
    return 0 if all_gated_pass(checks) else 1


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    args = parse_args(argv)
    try:
        config = load_config(args)
        os.makedirs(config.out, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(config)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "figures":
            return cmd_figures(config)
        return cmd_check(config, args.quick)
    except EngineError as e:
        error(e.message)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
