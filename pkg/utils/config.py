"""
运行配置
优先级：内置基准参数 < key=value 配置文件 < SHAREDBOOK_ 前缀的环境变量 < 命令行参数
"""

import os
from typing import Any, Dict, List, Mapping, Optional, Tuple

import dotenv

from models.base import BaseModel
from models.params import ModelParams, in_bounds
from models.results import Regime
from .errors import ConfigError

ENV_PREFIX = "SHAREDBOOK_"

FIGURE_IDS = ("fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "fig4a", "fig4b")

# 模型参数键 -> (ModelParams 字段, 分量下标)
PARAM_KEYS = {
    "sigma": ("sigma", None), "kappa": ("kappa", None),
    "A0": ("A", 0), "A1": ("A", 1), "c0": ("c", 0), "c1": ("c", 1),
    "gamma0": ("gamma", 0), "gamma1": ("gamma", 1),
    "eta0": ("eta", 0), "eta1": ("eta", 1),
    "beta": ("beta", None), "q_bar": ("q_bar", None), "delta_inf": ("delta_inf", None),
    "T": ("T", None), "S0": ("S0", None),
}

DEFAULTS: Dict[str, str] = {
    "regime": "none",
    "dt": "1e-4",
    "sim_dt": "1e-4",
    "paths": "20000",
    "seed": "0",
    "snapshots": "0",
    "out": "output",
    "figures": "all",
    "gamma_sweep": "0.005,0.01,0.02,0.05,0.1",
    "common_gamma_sweep": "0.005,0.01,0.02,0.05,0.1",
    "q_start": "0,0",
    "ce": "false",
    "dump_paths": "0",
    "workers": "1",
    "mesh": "1e-4",
}

KNOWN_KEYS = set(PARAM_KEYS) | set(DEFAULTS)


def _float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"需要数值，当前值 {raw!r}", key=key)


def _int(raw: str, key: str) -> int:
    value = _float(raw, key)
    if value != int(value):
        raise ConfigError(f"需要整数，当前值 {raw!r}", key=key)
    return int(value)


def _bool(raw: str, key: str) -> bool:
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"需要布尔值，当前值 {raw!r}", key=key)


def _floats(raw: str, key: str) -> List[float]:
    items = [item for item in str(raw).replace(";", ",").split(",") if item.strip()]
    if not items:
        raise ConfigError("列表为空", key=key)
    return [_float(item, key) for item in items]


def read_sources(path: Optional[str] = None,
                 environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """
    合并默认值、配置文件与环境变量（尚未应用命令行参数）

    Args:
        path: key=value 配置文件路径
        environ: 环境变量映射，缺省为 os.environ

    Raises:
        ConfigError: 配置文件不存在或包含未知键
    """
    raw: Dict[str, str] = dict(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"配置文件不存在: {path}", key="config")
        for key, value in dotenv.dotenv_values(path).items():
            if key not in KNOWN_KEYS:
                raise ConfigError(f"未知配置项（文件 {path}）", key=key)
            if value is not None:
                raw[key] = value
    environ = os.environ if environ is None else environ
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):]
            if key in KNOWN_KEYS:
                raw[key] = value
    return raw


class RunConfig(BaseModel):
    """一次运行的完整配置"""

    def __init__(
        self,
        params: ModelParams,
        regime: Regime = Regime.NONE,
        dt: float = 1e-4,
        sim_dt: float = 1e-4,
        paths: int = 20000,
        seed: int = 0,
        snapshots: Tuple[float, ...] = (0.0,),
        out: str = "output",
        figures: Tuple[str, ...] = FIGURE_IDS,
        gamma_sweep: Tuple[float, ...] = (0.005, 0.01, 0.02, 0.05, 0.1),
        common_gamma_sweep: Tuple[float, ...] = (0.005, 0.01, 0.02, 0.05, 0.1),
        q_start: Tuple[int, int] = (0, 0),
        ce: bool = False,
        dump_paths: int = 0,
        workers: int = 1,
        mesh: float = 1e-4,
    ):
        self.params = params
        self.regime = Regime.parse(regime)
        self.dt = float(dt)
        self.sim_dt = float(sim_dt)
        self.paths = int(paths)
        self.seed = int(seed)
        self.snapshots = tuple(float(t) for t in snapshots)
        self.out = out
        self.figures = tuple(figures)
        self.gamma_sweep = tuple(float(g) for g in gamma_sweep)
        self.common_gamma_sweep = tuple(float(g) for g in common_gamma_sweep)
        self.q_start = tuple(int(v) for v in q_start)
        self.ce = bool(ce)
        self.dump_paths = int(dump_paths)
        self.workers = int(workers)
        self.mesh = float(mesh)
        self.validate()

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
             environ: Optional[Mapping[str, str]] = None) -> "RunConfig":
        """
        按优先级读取并校验配置

        Args:
            path: 配置文件路径
            overrides: 命令行参数（值为 None 的项忽略）
            environ: 环境变量映射

        Raises:
            ConfigError: 任一键不合法
        """
        raw = read_sources(path, environ)
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key not in KNOWN_KEYS:
                raise ConfigError("未知参数", key=key)
            raw[key] = value if isinstance(value, str) else str(value)
        return cls.from_raw(raw)

    @classmethod
    def from_raw(cls, raw: Mapping[str, str]) -> "RunConfig":
        base = ModelParams.baseline().to_dict()
        values: Dict[str, Any] = {name: list(v) if isinstance(v, tuple) else v
                                  for name, v in base.items()}
        for key, (field, component) in PARAM_KEYS.items():
            if key not in raw:
                continue
            number = _float(raw[key], key)
            if component is None:
                values[field] = number
            else:
                values[field][component] = number
        params = ModelParams(**values)

        figures = str(raw["figures"]).strip()
        selected = FIGURE_IDS if figures in ("", "all") else tuple(
            f.strip() for f in figures.split(",") if f.strip())
        q_start = [_int(v, "q_start") for v in str(raw["q_start"]).split(",")]
        if len(q_start) != 2:
            raise ConfigError("需要两个整数，例如 0,0", key="q_start")

        return cls(
            params=params,
            regime=Regime.parse(raw["regime"]),
            dt=_float(raw["dt"], "dt"),
            sim_dt=_float(raw["sim_dt"], "sim_dt"),
            paths=_int(raw["paths"], "paths"),
            seed=_int(raw["seed"], "seed"),
            snapshots=_floats(raw["snapshots"], "snapshots"),
            out=str(raw["out"]),
            figures=selected,
            gamma_sweep=_floats(raw["gamma_sweep"], "gamma_sweep"),
            common_gamma_sweep=_floats(raw["common_gamma_sweep"], "common_gamma_sweep"),
            q_start=tuple(q_start),
            ce=_bool(raw["ce"], "ce"),
            dump_paths=_int(raw["dump_paths"], "dump_paths"),
            workers=_int(raw["workers"], "workers"),
            mesh=_float(raw["mesh"], "mesh"),
        )

    def validate(self) -> None:
        """
        校验运行参数（模型参数已在 ModelParams 中校验）

        Raises:
            ConfigError: 参数不合法
        """
        for key in ("dt", "sim_dt", "mesh"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"必须为正数，当前值 {getattr(self, key)}", key=key)
        if self.paths <= 0:
            raise ConfigError(f"必须为正整数，当前值 {self.paths}", key="paths")
        if self.seed < 0:
            raise ConfigError("种子必须非负", key="seed")
        if self.workers < 1:
            raise ConfigError("至少需要 1 个进程", key="workers")
        if self.dump_paths < 0:
            raise ConfigError("必须非负", key="dump_paths")
        if any(not 0.0 <= t <= self.params.T for t in self.snapshots):
            raise ConfigError(f"快照时刻必须位于 [0, {self.params.T}]", key="snapshots")
        for figure in self.figures:
            if figure not in FIGURE_IDS:
                raise ConfigError(f"未知图表 {figure!r}，可选 {', '.join(FIGURE_IDS)}", key="figures")
        for key in ("gamma_sweep", "common_gamma_sweep"):
            if any(g <= 0 for g in getattr(self, key)):
                raise ConfigError("风险厌恶必须为正", key=key)
        if not in_bounds(self.q_start, self.params.q_bar):
            raise ConfigError(f"初始库存 {self.q_start} 超出 ±{self.params.q_bar}", key="q_start")
