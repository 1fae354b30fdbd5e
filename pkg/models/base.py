"""
基础数据模型
to_dict 的结果可直接 json.dumps（numpy 数组与标量会转换为 Python 类型）
"""
import inspect
import json
from enum import Enum
from typing import Any, Dict, Type, TypeVar

import numpy as np

T = TypeVar('T', bound='BaseModel')


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {(k.value if isinstance(k, Enum) else k): _plain(v) for k, v in value.items()}
    if isinstance(value, BaseModel):
        return value.to_dict()
    if isinstance(value, Enum):
        return value.value
    return value


class BaseModel:
    """数据模型基类：子类在 __init__ 中显式声明字段"""

    def __init__(self, **kwargs):
        for key, value in kwargs.items():
            setattr(self, key, value)

    @classmethod
    def from_dict(cls: Type[T], data: Dict[str, Any]) -> T:
        """
        从字典创建实例，忽略 __init__ 不接受的键

        Args:
            data: 通常来自 to_dict 或 JSON

        Returns:
            模型实例
        """
        accepted = inspect.signature(cls.__init__).parameters
        if any(p.kind is p.VAR_KEYWORD for p in accepted.values()):
            return cls(**data)
        return cls(**{k: v for k, v in data.items() if k in accepted})

    def to_dict(self) -> Dict[str, Any]:
        return {
            key: _plain(value)
            for key, value in self.__dict__.items()
            if not key.startswith('_')
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def __str__(self) -> str:
        return self.to_json()

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.to_dict()})"
