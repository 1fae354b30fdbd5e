"""
控制台输出工具
带时间戳的状态行，警告与错误写入 stderr
"""

import sys
from datetime import datetime

_quiet = False


def ts() -> str:
    return datetime.now().strftime("%Y-%m-%d %H:%M:%S")


def set_quiet(quiet: bool = True) -> None:
    """关闭/打开普通状态输出（测试与子进程中使用）"""
    global _quiet
    _quiet = quiet


def log(message: str) -> None:
    if not _quiet:
        print(f"[{ts()}] {message}")


def warn(message: str) -> None:
    print(f"[{ts()}] [WARN] {message}", file=sys.stderr)


def error(message: str) -> None:
    print(f"[{ts()}] [ERROR] {message}", file=sys.stderr)
