"""
参数、报价矩阵与市场基础函数
"""

import math

import numpy as np
import pytest

from models.params import ModelParams, Side, in_bounds, inventory_states
from models.rates import QuoteMatrix, RateVector, own_rates, stack_rates
from tools.market import clamp_quote, effective_intensity, intensity, side_open
from utils.errors import ConfigError


def test_baseline_defaults(params):
    assert params.sigma == 1.2
    assert params.kappa == 8.0
    assert params.A == (100.0, 100.0)
    assert params.gamma == (0.01, 0.01)
    assert params.eta == (0.1, 0.1)
    assert params.beta == 0.6
    assert params.q_bar == 5
    assert params.n_states == 11


def test_params_are_read_only(params):
    with pytest.raises(AttributeError):
        params.sigma = 2.0
    changed = params.replace(sigma=2.0)
    assert changed.sigma == 2.0
    assert params.sigma == 1.2


@pytest.mark.parametrize("overrides, key", [
    ({"beta": 1.0}, "beta"),
    ({"beta": -0.1}, "beta"),
    ({"sigma": 0.0}, "sigma"),
    ({"gamma": (0.01, -1.0)}, "gamma"),
    ({"q_bar": 0}, "q_bar"),
    ({"q_bar": 2.5}, "q_bar"),
    ({"A": (1.0, 2.0, 3.0)}, "A"),
    ({"sigma": 1e155}, "sigma"),
])
def test_invalid_params_raise_config_error(overrides, key):
    with pytest.raises(ConfigError) as exc:
        ModelParams(**overrides)
    assert exc.value.key == key
    assert key in exc.value.message


def test_scalar_pair_is_broadcast():
    params = ModelParams(gamma=0.02)
    assert params.gamma == (0.02, 0.02)


def test_inventory_layout(params):
    q0, q1 = params.inventory_mesh()
    assert q0.shape == (11, 11)
    assert q0[0, 4] == -5 and q1[0, 4] == -1
    assert params.index((0, 0)) == (5, 5)
    assert params.index((-5, 5)) == (0, 10)
    with pytest.raises(ValueError):
        params.index((6, 0))
    states = list(inventory_states(1))
    assert states[0] == (-1, -1) and states[-1] == (1, 1) and len(states) == 9
    assert in_bounds((5, -5), 5) and not in_bounds((0, -6), 5)


def test_exposure_ratio(params):
    s = (1 - 0.6) * 1.2
    expected = s * s * 0.01 * 0.1 / ((8 + s * 0.01) * (8 + s * 0.1))
    assert params.exposure_ratio(0, 0.6) == pytest.approx(expected, rel=1e-14)
    assert 0 < params.exposure_ratio(0, 0.6) < params.exposure_ratio(0, 0.0) < 1


def test_side_phi_and_labels():
    assert Side.BID.phi == 1 and Side.ASK.phi == -1
    assert Side.BID.label == "b" and Side.ASK.label == "a"


def test_rate_vector_shapes_and_restriction():
    with pytest.raises(ValueError):
        RateVector(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        RateVector(zS=float("nan"))
    zN = np.zeros((2, 2, 2))
    zN[:, 0, :] = 0.3
    zN[0, 1, 0] = 1.0
    z = RateVector(zN, 0.1)
    assert z.is_restricted(0)
    assert not z.is_restricted(1)
    assert list(z.own_pair(Side.BID, 1)) == [1.0, 0.0]

    Z, ZS = stack_rates(z, RateVector.zeros())
    assert Z.shape == (2, 2, 2, 2) and list(ZS) == [0.1, 0.0]
    own = own_rates(Z)
    assert own.shape == (2, 2, 2)
    assert np.all(own[:, 0] == 0.3) and np.all(own[:, 1] == 0.0)


def test_quote_matrix_boundary_rule(params):
    quotes = QuoteMatrix([[0.1, 0.2], [0.3, 0.4]])
    assert quotes.best(Side.BID) == 0.1
    assert quotes.get(Side.ASK, 1) == 0.4
    assert quotes.is_admissible(params, (0, 0))
    # 做市商 0 库存在上限，买价必须为 δ∞
    problems = quotes.violations(params, (5, 0))
    assert len(problems) == 1 and "δ∞" in problems[0]
    capped = QuoteMatrix([[10.0, 0.2], [0.3, 0.4]])
    assert capped.is_admissible(params, (5, 0))
    assert not QuoteMatrix([[11.0, 0.2], [0.3, 0.4]]).is_admissible(params, (0, 0))


def test_intensity_values(params):
    at_zero = intensity(params, 0, 0.0)
    assert at_zero == pytest.approx(100 * math.exp(-(8 / 1.2) * 1e-5), rel=1e-14)
    d = np.linspace(-1, 1, 21)
    lam = intensity(params, 1, d)
    assert np.all(lam > 0)
    assert np.all(np.diff(lam) < 0)


def test_side_open_gates_cap(params):
    assert side_open(params, Side.BID, 4)
    assert not side_open(params, Side.BID, 5)
    assert side_open(params, Side.ASK, 5)
    assert not side_open(params, Side.ASK, -5)
    gate = side_open(params, np.array([0, 1]), np.array([5, 5]))
    assert gate.tolist() == [False, True]


def test_effective_intensity(params):
    quotes = QuoteMatrix([[10.0, 0.2], [0.3, 0.4]])
    assert effective_intensity(params, Side.BID, 0, 0, quotes, (5, 0)) == 0.0
    assert effective_intensity(params, Side.ASK, 0, 1, quotes, (5, 0)) == pytest.approx(
        intensity(params, 1, 0.3))
    with pytest.raises(ValueError):
        effective_intensity(params, Side.BID, 0, 0, QuoteMatrix([[0.1, 0.2], [0.3, 0.4]]), (5, 0))


def test_clamp_quote(params):
    assert clamp_quote(params, 12.0) == 10.0
    assert clamp_quote(params, -12.0) == -10.0
    assert clamp_quote(params, 0.5) == 0.5
