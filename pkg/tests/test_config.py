"""
配置加载：默认值 < 配置文件 < 环境变量 < 命令行
"""

import pytest

from models.results import Regime
from utils.config import FIGURE_IDS, RunConfig, read_sources
from utils.errors import ConfigError


def write_cfg(tmp_path, text: str) -> str:
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults_without_sources():
    config = RunConfig.load(None, environ={})
    assert config.regime is Regime.NONE
    assert config.params.q_bar == 5
    assert config.dt == 1e-4
    assert config.paths == 20000
    assert config.figures == FIGURE_IDS
    assert config.q_start == (0, 0)
    assert config.ce is False


def test_precedence(tmp_path):
    path = write_cfg(tmp_path, "regime=one\nseed=3\npaths=500\ngamma0=0.02\n")
    environ = {"SHAREDBOOK_seed": "4", "SHAREDBOOK_paths": "600", "OTHER": "x"}
    config = RunConfig.load(path, {"paths": 700, "dt": None}, environ)
    assert config.regime is Regime.ONE
    assert config.params.gamma == (0.02, 0.01)
    assert config.seed == 4
    assert config.paths == 700
    assert config.dt == 1e-4


def test_read_sources_ignores_unprefixed_environment(tmp_path):
    raw = read_sources(None, {"seed": "9", "SHAREDBOOK_unknown": "1"})
    assert raw["seed"] == "0"
    assert "unknown" not in raw


def test_lists_and_flags(tmp_path):
    path = write_cfg(tmp_path, "gamma_sweep=0.01;0.02\nfigures=fig2a, fig4b\nce=yes\n"
                               "q_start=1,-1\nsnapshots=0,0.5,1\n")
    config = RunConfig.load(path, environ={})
    assert config.gamma_sweep == (0.01, 0.02)
    assert config.figures == ("fig2a", "fig4b")
    assert config.ce is True
    assert config.q_start == (1, -1)
    assert config.snapshots == (0.0, 0.5, 1.0)


@pytest.mark.parametrize("text, key", [
    ("colour=red\n", "colour"),
    ("beta=1\n", "beta"),
    ("paths=0\n", "paths"),
    ("paths=2.5\n", "paths"),
    ("dt=abc\n", "dt"),
    ("regime=three\n", "regime"),
    ("figures=fig9\n", "figures"),
    ("q_start=6,0\n", "q_start"),
    ("q_start=1\n", "q_start"),
    ("snapshots=2\n", "snapshots"),
    ("ce=maybe\n", "ce"),
    ("workers=0\n", "workers"),
])
def test_invalid_config_names_key(tmp_path, text, key):
    path = write_cfg(tmp_path, text)
    with pytest.raises(ConfigError) as exc:
        RunConfig.load(path, environ={})
    assert exc.value.key == key


def test_missing_file_and_unknown_override(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(str(tmp_path / "absent.cfg"), environ={})
    with pytest.raises(ConfigError) as exc:
        RunConfig.load(None, {"colour": "red"}, environ={})
    assert exc.value.key == "colour"


def test_to_dict_is_plain():
    data = RunConfig.load(None, environ={}).to_dict()
    assert data["regime"] == "none"
    assert data["params"]["beta"] == 0.6
