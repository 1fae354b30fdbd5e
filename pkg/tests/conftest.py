"""
测试公共夹具
小网格参数（q̄=2, T=0.05）下的三种情形求解结果在整个会话中共享
"""

import os

import hypothesis
import pytest

from models.params import ModelParams
from models.results import Regime
from tools.pde_engine import solve
from utils.console import set_quiet

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))

SMALL_DT = 5e-4


@pytest.fixture(autouse=True, scope="session")
def quiet_console():
    set_quiet(True)
    yield
    set_quiet(False)


@pytest.fixture
def params() -> ModelParams:
    """基准参数"""
    return ModelParams.baseline()


@pytest.fixture(scope="session")
def small_params() -> ModelParams:
    return ModelParams.baseline().replace(q_bar=2, T=0.05)


@pytest.fixture(scope="session")
def small_results(small_params):
    """小网格上三种情形的求解结果"""
    return {regime: solve(regime, small_params, SMALL_DT, snapshots=[0.0, small_params.T])
            for regime in Regime}


@pytest.fixture(scope="session")
def desk_params() -> ModelParams:
    """缩小的桌面配置（慢测试使用）"""
    return ModelParams.baseline().replace(q_bar=3, T=0.2)
