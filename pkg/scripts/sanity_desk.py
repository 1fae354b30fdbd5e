#!/usr/bin/env python3
"""
最小验证脚本：在缩小桌面配置（q̄=3, T=0.2）上跑通 求解→交易所价值→模拟 闭环。

用法：
    python -m scripts.sanity_desk [--paths 2000] [--seed 7]

步骤：
1) 三种情形各求解一次
2) 打印零库存处做市商报价与交易所价值（溢出效应排序）
3) 对 one 情形做一次小规模蒙特卡洛，打印估计与 PDE 参考值
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime

from models.params import ModelParams, Side
from models.results import Regime
from tools.pde_engine import exchange_values, quote_surface, solve_with_retry
from tools.simulator import simulate_paths, summarize
from utils.console import set_quiet
from utils.errors import EngineError


def ts() -> str:
    return datetime.now().strftime("%Y-%m-%d %H:%M:%S")


def main() -> int:
    parser = argparse.ArgumentParser(description="共享订单簿引擎冒烟验证")
    parser.add_argument("--paths", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    set_quiet(True)
    params = ModelParams.baseline().replace(q_bar=3, T=0.2)
    print(f"[{ts()}] 参数: q̄={params.q_bar}, T={params.T}, β={params.beta}")

    try:
        # 1) 求解
        results = {}
        for regime in Regime:
            print(f"[{ts()}] 求解 {regime.value}…")
            results[regime] = solve_with_retry(regime, params, 2.5e-4)

        # 2) 报价与交易所价值
        for regime, result in results.items():
            quotes = quote_surface(result, 0.0)[(0, 0)]
            print(f"[{ts()}] {regime.value:>4}  bid0={quotes.get(Side.BID, 0):.4f}  "
                  f"bid1={quotes.get(Side.BID, 1):.4f}")
        values = exchange_values(results, (0, 0))
        for regime, (v0, v1) in values.items():
            print(f"[{ts()}] {regime.value:>4}  exchange0={v0:.6f}  exchange1={v1:.6f}")
        ordered = values[Regime.NONE][1] < values[Regime.ONE][1] < values[Regime.BOTH][1]
        print(f"[{ts()}] 交易所 1 价值排序 none < one < both: {'是' if ordered else '否'}")

        # 3) 蒙特卡洛
        print(f"[{ts()}] 模拟 {args.paths} 条路径…")
        batch = simulate_paths(Regime.ONE, results[Regime.ONE], args.paths, args.seed, 1e-4)
        summary = summarize(batch, results[Regime.ONE])
        for entry in summary["estimates"]:
            reference = entry["reference"]
            ref_text = "n/a" if reference is None else f"{reference:.6f}"
            print(f"[{ts()}] {entry['name']:>9}  mean={entry['mean']:.6f}  se={entry['se']:.2e}  "
                  f"ref={ref_text}")
    except EngineError as e:
        print(f"[{ts()}] 失败: {e.message}", file=sys.stderr)
        return 1

    print(f"[{ts()}] 验证完毕 {'✅' if summary['all_pass'] and ordered else '⚠️'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
