"""
通用工具：配置、CSV、异常与控制台输出

此处不做包级导入，按需从子模块显式导入，例如：
    from utils.config import RunConfig
"""

__all__: list[str] = []
