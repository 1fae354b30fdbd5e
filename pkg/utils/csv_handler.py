"""
CSV文件处理工具
固定表头写入（先写临时文件再原子替换）与数值解析读取
"""

import csv
import os
from typing import Any, Dict, List, Optional


def _parse(value: str) -> Any:
    """数值列解析为 int/float，空串为 None，其余保持字符串"""
    if value == '':
        return None
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


class CSVHandler:
    """按行字典读写 CSV，写入前校验必填列"""

    def __init__(self, file_path: str, required_fields: Optional[List[str]] = None):
        """
        Args:
            file_path: CSV文件路径（目录不存在时自动创建）
            required_fields: 每行都必须有值的列
        """
        self.file_path = file_path
        self.required_fields = list(required_fields or [])
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)

    def file_exists(self) -> bool:
        return os.path.exists(self.file_path)

    def read_data(self) -> List[Dict[str, Any]]:
        """读取全部行；文件不存在时返回空列表"""
        if not self.file_exists():
            return []
        with open(self.file_path, 'r', encoding='utf-8', newline='') as f:
            return [{key: _parse(value) for key, value in row.items()}
                    for row in csv.DictReader(f)]

    def write_data(self, data: List[Dict[str, Any]], headers: Optional[List[str]] = None) -> None:
        """
        写入全部行

        Args:
            data: 行字典列表
            headers: 表头顺序；缺省时必填列在前，其余按首次出现顺序

        Raises:
            ValueError: 必填列缺失、为空或不在表头中
        """
        self._validate_data(data)

        if headers is None:
            headers = list(self.required_fields)
            for item in data:
                headers.extend(key for key in item if key not in headers)
        missing = [name for name in self.required_fields if name not in headers]
        if missing:
            raise ValueError(f"必填字段 {missing} 不在表头中")

        tmp_path = self.file_path + '.tmp'
        with open(tmp_path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.DictWriter(f, fieldnames=headers, lineterminator='\n')
            writer.writeheader()
            for row in data:
                writer.writerow({key: '' if value is None else value
                                 for key, value in row.items()})
        os.replace(tmp_path, self.file_path)

    def _validate_data(self, data: List[Dict[str, Any]]) -> None:
        for i, item in enumerate(data):
            for name in self.required_fields:
                if name not in item:
                    raise ValueError(f"第 {i+1} 行数据缺少必填字段 '{name}'")
                if item[name] is None or item[name] == '':
                    raise ValueError(f"第 {i+1} 行数据的必填字段 '{name}' 为空")
