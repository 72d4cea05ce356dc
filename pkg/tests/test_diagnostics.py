from dataclasses import replace

import numpy as np
import pytest

from thermovisco import constitutive as C
from thermovisco.diagnostics import (
    LEDGER_FIELDS,
    BalanceLedger,
    balance_residuals,
    cumulative,
    energy_report,
    time_derivative,
)
from thermovisco.grid import Grid
from thermovisco.solver import DtPolicy, HeatSource, Scenario, SimConfig, initial_state, run


def test_quiescent_uniform_state_is_silent():
    cfg = SimConfig(grid=Grid(8, 8), scenario=Scenario("shear-decay", amplitude=0.0))
    row, aux = energy_report(initial_state(cfg.scenario, cfg.grid, cfg.model), cfg)
    assert row.dissipation_rate == 0.0 and row.kinetic == 0.0 and row.entropy_production == 0.0
    assert row.mass == pytest.approx(1.0) and row.min_detF == 1.0 and row.curlF_norm == 0.0
    assert aux.cold_cells == 0


@pytest.mark.parametrize("n", [32, 64])
def test_single_mode_dissipation_matches_hand_quadrature(n):
    # v_x = A sin(k y): |e(v)|^2 = A^2 k^2 cos^2 / 2 and |grad^2 v|^4 = A^4 k^8 sin^4
    A, nu1, nu2 = 0.1, 0.05, 1e-6
    k = 2 * np.pi
    cfg = SimConfig(nu1=nu1, nu2=nu2, p=4, grid=Grid(n, n), scenario=Scenario("shear-decay", amplitude=A))
    row, _ = energy_report(initial_state(cfg.scenario, cfg.grid, cfg.model), cfg)
    exact = nu1 * A**2 * k**2 / 4 + nu2 * A**4 * k**8 * 3 / 8
    # the centered stencil sees k_eff = sin(k h)/h in place of k
    assert row.dissipation_rate == pytest.approx(exact, rel=12 * (k / n) ** 2)


def test_total_is_kinetic_plus_internal():
    cfg = SimConfig(grid=Grid(16, 16), scenario=Scenario("shear-decay", amplitude=0.2), t_end=0.02)
    _, ledger = run(cfg)
    np.testing.assert_array_equal(ledger.column("total"), ledger.column("kinetic") + ledger.column("internal"))


def test_ledger_is_deterministic():
    cfg = SimConfig(grid=Grid(16, 16), scenario=Scenario("compression-pulse", amplitude=0.05), t_end=0.02)
    a = run(cfg)[1].as_array()
    b = run(cfg)[1].as_array()
    assert a.tobytes() == b.tobytes()
    assert a.shape[1] == len(LEDGER_FIELDS)


def test_adiabatic_term_vanishes_without_thermal_stress():
    cfg = SimConfig(grid=Grid(16, 16), scenario=Scenario("compression-pulse", amplitude=0.05), t_end=0.02)
    _, ledger = run(cfg)
    np.testing.assert_array_equal(ledger.column("power_adiabatic"), 0.0)


def _expansion_run(n):
    cfg = SimConfig(
        model=C.ThermalExpansion(K_e=1.0, G_e=0.3, beta=0.2),
        nu1=0.01,
        nu2=1e-8,
        grid=Grid(n, n),
        scenario=Scenario("compression-pulse", amplitude=0.05, theta0=1.0),
        t_end=0.05,
        dt_policy=DtPolicy(dt_fixed=0.001 * 16 / n),
    )
    return cfg, run(cfg)[1]


def test_adiabatic_crosscheck_converges():
    errs = []
    for n in (16, 32, 64):
        cfg, ledger = _expansion_run(n)
        assert np.any(ledger.column("power_adiabatic") != 0.0)
        errs.append(np.max(balance_residuals(ledger, cfg)["adiabatic_crosscheck"]))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_mechanical_residual_with_thermal_stress_converges():
    errs = []
    for n in (16, 32, 64):
        cfg, ledger = _expansion_run(n)
        errs.append(np.max(np.abs(balance_residuals(ledger, cfg)["mechanical_residual"])))
    # 16^2 is pre-asymptotic; the ratio climbs towards 4
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert r2 > 3.5 and r2 > r1 > 2.5


def _forced_run(dt):
    cfg = SimConfig(
        grid=Grid(16, 16),
        scenario=Scenario("shear-decay", amplitude=0.1),
        gravity=(0.3, -0.2),
        heat_source=HeatSource("gaussian", 1.0, 0.15),
        k_damp=2.0,
        t_end=0.05,
        dt_policy=DtPolicy(dt_fixed=dt),
    )
    _, ledger = run(cfg)
    return ledger, balance_residuals(ledger, cfg)


def test_total_residual_accounts_for_forcing():
    # only the second-order d/dt of the ledger remains: it shrinks 4x per dt halving
    errs = []
    for dt in (0.002, 0.001):
        ledger, res = _forced_run(dt)
        scale = np.max(np.abs(ledger.column("power_source")))
        errs.append(np.max(np.abs(res["total_residual"][1:-1])) / scale)
    assert errs[0] < 1e-6
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert np.any(ledger.column("power_damping") > 0) and np.any(ledger.column("power_gravity") != 0)


def test_mechanical_residual_with_forcing_is_small():
    ledger, res = _forced_run(0.001)
    assert np.max(np.abs(res["mechanical_residual"])) < 1e-3 * np.max(ledger.column("dissipation_rate"))


def test_entropy_skips_cold_cells():
    cfg = SimConfig(grid=Grid(8, 8), scenario=Scenario("shear-decay", amplitude=0.1, theta0=0.0))
    row, aux = energy_report(initial_state(cfg.scenario, cfg.grid, cfg.model), cfg)
    assert aux.cold_cells == 64
    assert row.entropy_total == 0.0 and row.entropy_production == 0.0 and row.min_theta == 0.0


def test_entropy_violation_flags_decrease():
    cfg = SimConfig(grid=Grid(8, 8), t_end=0.0)
    _, ledger = run(cfg)
    row, aux = ledger.rows[0], ledger.aux[0]
    ledger.append((replace(row, t=1.0, entropy_total=row.entropy_total - 0.5), aux))
    res = balance_residuals(ledger)
    np.testing.assert_allclose(res["entropy_violation"], [0.0, 0.5])


def test_ledger_rejects_time_reversal():
    cfg = SimConfig(grid=Grid(8, 8), t_end=0.0)
    _, ledger = run(cfg)
    row, aux = ledger.rows[0], ledger.aux[0]
    with pytest.raises(ValueError):
        ledger.append((replace(row, t=-1.0), aux))


def test_residuals_need_two_rows():
    with pytest.raises(ValueError):
        balance_residuals(BalanceLedger())


def test_time_derivative_exact_for_quadratics():
    t = np.array([0.0, 0.1, 0.25, 0.3, 0.7])
    np.testing.assert_allclose(time_derivative(t, 3 * t**2 - t + 2), 6 * t - 1, atol=1e-12)
    np.testing.assert_allclose(time_derivative(t[:2], np.array([1.0, 2.0])), [10.0, 10.0])
    with pytest.raises(ValueError):
        time_derivative(t[:1], t[:1])


def test_cumulative_is_trapezoid():
    t = np.array([0.0, 1.0, 3.0])
    np.testing.assert_allclose(cumulative(t, 2 * t + 1), [0.0, 2.0, 12.0])
