"""
命令行入口冒烟测试
"""

import json
import os

import pytest

from main import main
from utils.csv_handler import CSVHandler


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "q_bar=2\nT=0.05\ndt=5e-4\nsim_dt=1e-4\npaths=200\nseed=1\n"
        f"snapshots=0,0.05\nout={tmp_path / 'out'}\n"
        "gamma_sweep=0.01,0.02\ncommon_gamma_sweep=0.01,0.02\n",
        encoding="utf-8",
    )
    return str(path)


def out_file(cfg_path, name):
    return os.path.join(os.path.dirname(cfg_path), "out", name)


def test_solve_then_simulate(cfg, capsys):
    assert main(["solve", "--config", cfg, "--regime", "one"]) == 0
    assert os.path.exists(out_file(cfg, "solve_one.npz"))
    rows = CSVHandler(out_file(cfg, "solve_one.csv")).read_data()
    assert len(rows) == 2 * 25
    assert {"v0", "v1", "z0_S", "delta_b_0"} <= set(rows[0])

    code = main(["simulate", "--config", cfg, "--regime", "one", "--dump-paths", "1"])
    assert code in (0, 1)
    with open(out_file(cfg, "simulate_one.json"), encoding="utf-8") as f:
        summary = json.load(f)
    assert summary["run"]["n_paths"] == 200
    assert code == (0 if summary["all_pass"] else 1)
    assert '"estimates"' in capsys.readouterr().out
    dump = CSVHandler(out_file(cfg, "path_one_0.csv")).read_data()
    assert dump[0]["t"] == 0.0 and "N_b_0_0" in dump[0]


def test_simulate_without_solve_fails(cfg, capsys):
    assert main(["simulate", "--config", cfg, "--regime", "both"]) == 2
    assert "solve --regime both" in capsys.readouterr().err


def test_bad_config_exits_with_2(cfg, capsys):
    assert main(["solve", "--config", cfg, "--q-start", "9,9"]) == 2
    assert "q_start" in capsys.readouterr().err


def test_figures_command(cfg):
    assert main(["figures", "--config", cfg, "--figure", "fig4a", "--figure", "fig2b"]) == 0
    for name in ("fig4a.csv", "fig4a.svg", "fig2b.csv", "fig2b.svg"):
        assert os.path.exists(out_file(cfg, name))
