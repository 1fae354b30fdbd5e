"""
PDE 求解引擎：终值、闭式支付率、对称性、收敛阶与导出
"""

import math

import numpy as np
import pytest

from models.params import Side, inventory_states
from models.results import Regime, SolveResult
from tools.equilibrium import gamma_quote
from tools.market import intensity
from tools.pde_engine import (
    csv_columns, exchange_value_grids, exchange_values, export_csv, g0k_eval, g0s_eval,
    jump_differences, quote_surface, rate_fields, rate_load, reservation_utility, shifted,
    slice_fields, solve, solve_fee_value, solve_with_retry, time_grid, zeta_check_0S, zeta_check_cross,
    zeta_check_own, zeta_hat, zeta_tilde,
)
from utils.csv_handler import CSVHandler
from utils.errors import ConfigError, MissingResultError, SolverError, StabilityError

SMALL_STEP = 5e-4


def relative_gap(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


def test_terminal_values(small_results):
    for regime, result in small_results.items():
        last = result.values[-1]
        assert np.all(last[0] == regime.terminal[0])
        assert np.all(last[1] == regime.terminal[1])
        assert result.times[0] == 0.0 and result.times[-1] == pytest.approx(result.params.T)


def test_sign_invariant(small_results):
    assert np.all(small_results[Regime.ONE].values[:, 0] < 0)
    assert np.all(small_results[Regime.BOTH].values < 0)


def test_regime_none_values_grow_backwards(small_results):
    # 做市商在 T 之前持有正的期望收益
    result = small_results[Regime.NONE]
    assert result.value(0, (0, 0)) > 0
    assert result.value(0, (0, 0)) == pytest.approx(result.value(1, (0, 0)), rel=1e-10)


def test_shifted_clamps_at_boundary():
    f = np.arange(9.0).reshape(3, 3)
    bid_q0 = shifted(f, Side.BID, 0)
    assert bid_q0[0, 0] == f[1, 0]
    assert np.all(bid_q0[2] == f[2])
    ask_q1 = shifted(f, Side.ASK, 1)
    assert ask_q1[1, 2] == f[1, 1]
    assert np.all(ask_q1[:, 0] == f[:, 0])
    jumps = jump_differences(f)
    assert jumps.shape == (2, 2, 3, 3)
    assert jumps[0, 1, 0, 0] == 1.0
    assert jumps[1, 0, 1, 1] == -3.0


def test_zeta_hat_is_value_difference(small_results, small_params):
    w = small_results[Regime.NONE].values[0, 0]
    a, b = small_params.index((1, 0))
    assert zeta_hat(small_params, w, (1, 0), Side.BID, 0) == pytest.approx(w[a + 1, b] - w[a, b])
    assert zeta_hat(small_params, w, (1, 0), Side.ASK, 1) == pytest.approx(w[a, b - 1] - w[a, b])


def test_price_exposure_rate(params):
    assert zeta_check_0S(params, 5) == pytest.approx(-5.0 / 11.0, rel=1e-14)
    assert zeta_check_0S(params, 0) == 0.0
    g, e, s = params.gamma[0], params.eta[0], params.sigma
    for q in (-3, 1, 5):
        z = zeta_check_0S(params, q)
        closed = 0.5 * e * s ** 2 * g * e * q ** 2 / (g + e)
        assert g0s_eval(params, z, q) == pytest.approx(closed, rel=1e-12)
        # g^S 为凸函数，驻点是最小点
        for eps in (-0.1, 0.1):
            assert g0s_eval(params, z + eps, q) > g0s_eval(params, z, q)


def test_cross_rate_on_flat_grid(params):
    v = -np.ones((params.n_states, params.n_states))
    g, e, c = params.gamma[0], params.eta[0], params.c[0]
    assert zeta_check_cross(params, 0, Side.BID, 0, v, (0, 0)) == pytest.approx(e * c / (e + g))
    assert zeta_check_cross(params, 0, Side.ASK, 1, v, (0, 0)) == 0.0


def test_own_rate_on_flat_grid(params):
    v = -np.ones((params.n_states, params.n_states))
    la = (params.log_tilde_A(0), params.log_tilde_A(1))
    fee = math.log((math.exp(la[0]) + math.exp(la[1]))
                   / (math.exp(la[1]) + math.exp(la[0] - params.eta[0] * params.c[0])))
    tilde = (math.log1p(-params.exposure_ratio(0, 0.0)) + fee) / params.eta[0]
    grid = zeta_tilde(params, 0, v, Side.BID)
    assert np.allclose(grid, tilde, rtol=1e-12)
    # 对手支付率高得多时交易所 0 的做市商成为跟随者，跟随区间内的最优点是 ζ̃β
    tilde_beta = (math.log1p(-params.exposure_ratio(0, params.beta)) + fee) / params.eta[0]
    assert zeta_check_own(params, 0, Side.BID, v, (0, 0), 0.3) == pytest.approx(tilde_beta, abs=1e-6)


@pytest.mark.parametrize("other_own", [None, 0.3, -0.2])
def test_own_rate_maximizes_within_branch(params, other_own):
    v = -np.ones((params.n_states, params.n_states))
    tilde = float(zeta_tilde(params, 0, v, Side.BID)[0, 0])
    other = tilde if other_own is None else other_own
    cross = [zeta_check_cross(params, 0, Side.BID, j, v, (0, 0)) for j in (0, 1)]
    own = zeta_check_own(params, 0, Side.BID, v, (0, 0), other)

    def g(z):
        return g0k_eval(params, 0, Side.BID, z, cross, other, (0, 0), -1.0, -1.0, -1.0)

    def leads(z):
        return (gamma_quote(params, 0, Side.BID, (z, z), 0)
                <= gamma_quote(params, 1, Side.BID, (other, other), 0))

    branch = leads(tilde)
    assert leads(own) == branch
    best = g(own)
    for z in own + np.linspace(-0.3, 0.3, 121):
        if leads(z) == branch:
            assert g(z) <= best + 1e-10
    # 对手与自家取同一 ζ̃ 时为平局，按领先处理
    if other_own is None:
        assert branch and own >= tilde


def test_price_exposure_enters_additively(small_params):
    params = small_params.replace(T=SMALL_STEP)
    result = solve(Regime.ONE, params, SMALL_STEP)
    terminal = result.values[-1]
    f = rate_fields(params, Regime.ONE, terminal)
    for q in inventory_states(params.q_bar):
        a, b = params.index(q)
        v = terminal[0]
        source = float(g0s_eval(params, f.ZS[0, a, b], q[0]))
        for k in (0, 1):
            source += g0k_eval(params, 0, k, f.Z[0, k, 0, 0, a, b], f.Z[0, k, 1, :, a, b],
                               f.Z[1, k, 1, 0, a, b], q, v[a, b],
                               shifted(v, k, 0)[a, b], shifted(v, k, 1)[a, b])
        assert result.values[0, 0, a, b] == pytest.approx(-1.0 + SMALL_STEP * source, rel=1e-12)


def test_contract_rates_reject_nonnegative_values(params):
    v = -np.ones((params.n_states, params.n_states))
    v[5, 5] = 0.0
    with pytest.raises(SolverError):
        zeta_check_own(params, 0, Side.BID, v, (0, 0), 0.0)
    with pytest.raises(SolverError):
        zeta_check_cross(params, 0, Side.BID, 0, v, (0, 0))


def test_rate_fields_structure(small_results, small_params):
    n = small_params.n_states
    one = slice_fields(small_results[Regime.ONE], 0)
    assert one.Z.shape == (2, 2, 2, 2, n, n)
    assert one.delta.shape == (2, 2, n, n) and one.H.shape == (2, n, n)
    # 签约交易所对自家做市商在两个交易所的支付率相同
    assert np.array_equal(one.Z[0, :, 0, 0], one.Z[0, :, 0, 1])
    # 被动交易所不设价格暴露率
    assert np.all(one.ZS[1] == 0)
    q0, _ = small_params.inventory_mesh()
    assert np.allclose(one.ZS[0], zeta_check_0S(small_params, q0))

    none = rate_fields(small_params, Regime.NONE, small_results[Regime.NONE].values[0])
    assert np.all(none.ZS == 0)
    assert np.array_equal(none.Z[..., 0, :, :], none.Z[..., 1, :, :])


def test_boundary_quotes(small_results, small_params):
    surface = quote_surface(small_results[Regime.BOTH], 0.0)
    assert len(surface) == small_params.n_states ** 2
    for q, quotes in surface.items():
        assert quotes.is_admissible(small_params, q)


@pytest.mark.parametrize("regime", list(Regime))
def test_mirror_symmetry(small_results, regime):
    values = small_results[regime].values
    assert relative_gap(values, values[:, :, ::-1, ::-1]) <= 1e-10


@pytest.mark.parametrize("regime", [Regime.NONE, Regime.BOTH])
def test_maker_swap_symmetry(small_results, regime):
    values = small_results[regime].values
    assert relative_gap(values[:, 0], np.swapaxes(values[:, 1], 1, 2)) <= 1e-10


def test_euler_convergence_order(small_params):
    values = [solve(Regime.NONE, small_params, 1e-3 / 2 ** n).values[0] for n in range(3)]
    e1 = np.max(np.abs(values[0] - values[1]))
    e2 = np.max(np.abs(values[1] - values[2]))
    assert math.log2(e1 / e2) >= 0.8


def test_time_grid_divides_horizon(small_params):
    dt, times = time_grid(small_params, 0.003)
    assert len(times) == 18
    assert dt == pytest.approx(0.05 / 17)
    with pytest.raises(ConfigError):
        time_grid(small_params, 0.0)


def test_stability_guard_and_retry(small_params):
    with pytest.raises(StabilityError) as exc:
        solve(Regime.NONE, small_params, 0.01)
    assert exc.value.t is not None
    result = solve_with_retry(Regime.NONE, small_params, 0.01)
    assert result.dt < 0.01
    with pytest.raises(StabilityError):
        solve_with_retry(Regime.NONE, small_params, 0.01, max_halvings=0)


def test_load_below_limit(small_results, small_params):
    q0, q1 = small_params.inventory_mesh()
    f = slice_fields(small_results[Regime.BOTH], 0)
    assert np.max(rate_load(small_params, f.delta, q0, q1)) * small_results[Regime.BOTH].dt < 0.5


def test_reservation_utility(small_results, small_params):
    none = small_results[Regime.NONE]
    expected = -math.exp(-small_params.gamma[0] * none.value(0, (0, 0)))
    assert reservation_utility(none, 0) == pytest.approx(expected)
    with pytest.raises(MissingResultError):
        reservation_utility(small_results[Regime.ONE], 0)


def test_fee_value_is_negative_and_bounded(small_results):
    u = solve_fee_value(small_results[Regime.ONE], 1)
    assert np.all(u < 0)
    # 手续费收入只会让效用高于 −1
    assert np.all(u > -1.0)


def test_exchange_value_grids(small_results):
    grids = exchange_value_grids(small_results)
    assert set(grids) == set(Regime)
    for grid in grids.values():
        assert np.all(grid < 0)
    values = exchange_values(small_results, (0, 0))
    assert values[Regime.BOTH][0] == pytest.approx(values[Regime.BOTH][1], rel=1e-9)
    without_baseline = {Regime.ONE: small_results[Regime.ONE]}
    with pytest.raises(MissingResultError):
        exchange_value_grids(without_baseline)


def test_npz_round_trip(tmp_path, small_results):
    result = small_results[Regime.ONE]
    path = result.save_npz(str(tmp_path / "solve_one.npz"))
    loaded = SolveResult.load_npz(path)
    assert loaded.regime is Regime.ONE
    assert loaded.params.to_dict() == result.params.to_dict()
    assert np.array_equal(loaded.values, result.values)
    assert loaded.snapshots == result.snapshots


def test_export_csv(tmp_path, small_results, small_params):
    result = small_results[Regime.NONE]
    path = export_csv(result, str(tmp_path / "solve_none.csv"))
    columns = csv_columns(Regime.NONE)
    assert columns[:5] == ["t", "q0", "q1", "w0", "w1"]
    assert "z1_a_0_1" in columns and "z0_S" in columns and columns[-1] == "delta_a_1"
    rows = CSVHandler(path).read_data()
    assert len(rows) == 2 * small_params.n_states ** 2
    assert list(rows[0]) == columns
    first = rows[0]
    assert first["t"] == 0.0 and (first["q0"], first["q1"]) == (-2, -2)
    assert first["w0"] == pytest.approx(result.value(0, (-2, -2)))
    assert csv_columns(Regime.ONE)[3:5] == ["v0", "v1"]


def test_exchange_side_function_at_zero_rates(params):
    d = gamma_quote(params, 0, Side.BID, (0.0, 0.0), 0)
    g, e = params.gamma[0], params.eta[0]
    expected = 0.0
    for j in (0, 1):
        keep = math.exp(-e * params.c[0]) if j == 0 else 1.0
        lam = intensity(params, j, d)
        expected += lam * (1.0 - keep - e * math.expm1(-g * d) / g)
        expected += lam * (1.0 - keep)
    value = g0k_eval(params, 0, Side.BID, 0.0, (0.0, 0.0), 0.0, (0, 0), -1.0, -1.0, -1.0)
    assert value == pytest.approx(expected, rel=1e-12)
    # 做市商 0 在买方向已达上限时自有项被门控
    capped = g0k_eval(params, 0, Side.BID, 0.0, (0.0, 0.0), 0.0, (params.q_bar, 0), -1.0, -1.0, -1.0)
    d1 = gamma_quote(params, 1, Side.BID, (0.0, 0.0), 0)
    cross_only = sum(intensity(params, j, d1) * (1.0 - (math.exp(-e * params.c[0]) if j == 0 else 1.0))
                     for j in (0, 1))
    assert capped == pytest.approx(cross_only, rel=1e-12)
