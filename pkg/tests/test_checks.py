"""
检查套件：判定表、门控与各检查在小网格上的行为
"""

import pytest

from models.params import ModelParams, Side
from models.results import Regime
from tools.checks import (
    CheckPlan, CheckResult, _guard, all_gated_pass, check_fixed_point, check_optimizers,
    check_quote_compression, check_spillover, check_symmetry, run_checks, verdict_table,
)
from tools.pde_engine import quote_surface, solve_with_retry
from utils.config import RunConfig
from utils.errors import SolverError


@pytest.fixture
def small_plan(small_params):
    return CheckPlan(small_params, 5e-4, 1e-4, 200, 3, 1e-3, 0, (0.01,))


def test_quick_plan_shrinks_desk():
    config = RunConfig.load(None, environ={})
    plan = CheckPlan.from_config(config, quick=True)
    assert plan.params.q_bar == 3 and plan.params.T == 0.2
    assert plan.paths == 4000 and plan.draws == 20
    full = CheckPlan.from_config(config)
    assert full.draws == 200 and full.params.q_bar == 5


def test_fixed_point_check_passes():
    plan = CheckPlan(ModelParams.baseline(), 1e-4, 1e-4, 10, 3, 1e-3, 4, ())
    result = check_fixed_point(plan)
    assert result.passed, result.message
    assert result.detail["max_single_diff"] <= 1e-3 * (1 + 1e-6)


def test_fundamental_spread_check(small_plan):
    results = check_quote_compression(small_plan)
    assert [r.name for r in results] == ["quote compression", "fundamental spread"]
    assert results[0].gated and results[1].gated
    assert results[1].passed
    rows = results[0].detail["rows"]
    assert len(rows) == 1
    assert set(rows[0]) == {"gamma0"} | {f"bid{i}_{r.value}" for r in Regime for i in (0, 1)}


def test_symmetry_checks(small_results, small_plan):
    results = {r.name: r for r in check_symmetry(small_results, small_plan)}
    for regime in Regime:
        assert results[f"mirror symmetry ({regime.value})"].passed
    assert results["maker swap symmetry (none)"].gated
    assert results["maker swap symmetry (both)"].passed
    assert results["Euler convergence order"].passed


def test_spillover_gates_ordering_and_gap_ratio(small_results):
    ordering, ratio = check_spillover(small_results)
    assert ordering.gated and ratio.gated
    assert ratio.name == "spillover gap ratio ≥ 5"
    assert set(ordering.detail["exchange1"]) == {"none", "one", "both"}
    # 排序不成立时差距比不能单独通过
    if not ordering.passed:
        assert not ratio.passed


@pytest.mark.parametrize("one, passes", [(-0.4, True), (-0.44, False)])
def test_gap_ratio_gate(monkeypatch, one, passes):
    # none = -1, both = -0.3：one = -0.4 时比值为 6，one = -0.44 时比值为 4
    values = {Regime.NONE: (-2.0, -1.0), Regime.ONE: (-1.0, one), Regime.BOTH: (-1.0, -0.3)}
    monkeypatch.setattr("tools.checks.exchange_values", lambda results, q: values)
    ordering, ratio = check_spillover({})
    assert ordering.passed
    assert ratio.passed is passes
    assert ratio.detail["gap_ratio"] == pytest.approx(6.0 if passes else 4.0)


def test_closed_form_rates_are_not_beaten(small_results, small_plan):
    results = {r.name: r for r in check_optimizers(small_results, small_plan, states=5)}
    assert results["optimal price-exposure rate"].passed
    assert results["optimal cross rates"].passed
    assert len(results) == 4
    own = results["optimal own rate"]
    assert own.gated and own.passed, own.message
    assert not results["own rate across branches"].gated


def test_guard_turns_errors_into_failures():
    def boom():
        raise SolverError("发散", t=0.5, q=(1, 0))

    results = _guard("demo", boom)
    assert len(results) == 1 and not results[0].passed
    assert "发散" in results[0].message


def test_verdict_table_and_gating():
    checks = [
        CheckResult("a", True),
        CheckResult("b", False, gated=False, message="仅报告"),
    ]
    table = verdict_table(checks)
    assert "PASS" in table and "FAIL" in table and "info" in table
    assert all_gated_pass(checks)
    assert not all_gated_pass(checks + [CheckResult("c", False)])


@pytest.mark.slow
def test_quick_run_covers_every_check():
    config = RunConfig.load(None, {"paths": 2000}, environ={})
    checks = run_checks(config, quick=True)
    names = {c.name for c in checks}
    expected = {
        "fixed point vs mesh best responses", "PDE/MC consistency (one)",
        "PDE/MC consistency (none)", "spillover ordering", "quote compression",
        "Euler convergence order", "optimal cross rates", "martingale flatness",
    }
    assert expected <= names


@pytest.fixture(scope="module")
def desk_results(desk_params):
    return {regime: solve_with_retry(regime, desk_params, 2.5e-4) for regime in Regime}


@pytest.mark.slow
def test_contract_compresses_zero_inventory_bids(desk_results):
    bids = {regime: quote_surface(result)[(0, 0)] for regime, result in desk_results.items()}
    for i in (0, 1):
        none = bids[Regime.NONE].get(Side.BID, i)
        assert bids[Regime.ONE].get(Side.BID, i) < none
        assert bids[Regime.BOTH].get(Side.BID, i) < none


@pytest.mark.slow
def test_passive_exchange_gains_from_competitor_contract(desk_results):
    ordering, _ = check_spillover(desk_results)
    values = ordering.detail["exchange1"]
    assert values["one"] >= values["none"]
