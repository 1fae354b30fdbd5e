"""
引擎异常定义
所有异常都带有 message 属性以及定位问题所需的上下文字段
"""
from typing import Optional, Tuple


class EngineError(Exception):
    """引擎错误基类"""
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class ConfigError(EngineError):
    """配置或命令行参数不合法"""
    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class SolverError(EngineError):
    """PDE 求解失败：出现非有限值或违反符号不变量"""
    def __init__(self, message: str, t: Optional[float] = None,
                 q: Optional[Tuple[int, int]] = None):
        self.t = t
        self.q = q
        if t is not None:
            message = f"{message} (t={t:.6g}, q={q})"
        super().__init__(message)


class StabilityError(SolverError):
    """时间步长违反显式欧拉稳定性条件 dt·max ΣΛ < 0.5"""


class SimulationError(EngineError):
    """蒙特卡洛模拟错误"""
    def __init__(self, message: str, path: Optional[int] = None, t: Optional[float] = None):
        self.path = path
        self.t = t
        super().__init__(message)


class MissingResultError(EngineError):
    """引用的求解结果不存在"""
