"""
共享订单簿引擎
均衡报价、PDE 求解、蒙特卡洛模拟与图表生成

按需从子模块显式导入，例如：
    from tools.pde_engine import solve_with_retry
"""

__all__ = ["market", "equilibrium", "pde_engine", "simulator", "figures", "checks"]
