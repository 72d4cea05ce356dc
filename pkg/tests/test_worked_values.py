"""Hand-evaluated point values of the constitutive closed forms."""

import math

import numpy as np
import pytest

from thermovisco import constitutive as C
from thermovisco import tensor as T
from thermovisco.grid import Grid
from thermovisco.solver import Scenario, initial_state, regularized_theta0

I2 = np.eye(2)


@pytest.fixture
def power():
    return C.NeoHookeanPower(K_e=1.0, G_e=1.0, c_v=1.0, theta_ref=1.0, alpha=0.5)


def test_tensor_small_cases():
    assert T.det(np.eye(3)) == 1.0
    assert T.det(np.diag([2.0, 3.0])) == 6.0
    a, b, c, d = 1.5, -0.3, 0.7, 2.0
    np.testing.assert_array_equal(T.cofactor(np.array([[a, b], [c, d]])), [[d, -c], [-b, a]])
    A = np.array([[0.0, 1.3], [-1.3, 0.0]])
    np.testing.assert_array_equal(T.sym(A), np.zeros((2, 2)))
    assert T.frobenius(I2) == pytest.approx(math.sqrt(2.0), rel=1e-15)


def test_power_entropy_heat_capacity_at_reference(power):
    # eta = c_v theta^alpha / alpha, c = c_v theta^alpha
    assert power.entropy(I2, 1.0) == pytest.approx(2.0, rel=1e-14)
    assert power.heat_capacity(I2, 1.0) == pytest.approx(1.0, rel=1e-14)


def test_power_internal_energy(power):
    # stored part at F = I is G_e d; thermal part c_v theta^(1+alpha) / (1 + alpha)
    assert power.internal_energy(I2, 0.0) == pytest.approx(2.0, rel=1e-14)
    assert power.internal_energy(I2, 1.0) == pytest.approx(8.0 / 3.0, rel=1e-14)
    assert power.thermal_energy(I2, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert C.invert_thermal_energy(power, I2, 2.0 / 3.0) == pytest.approx(1.0, rel=1e-12)


def test_bounded_heat_capacity_half_at_theta_r():
    m = C.BoundedHeatCapacity(c_v=1.0, theta_r=0.2)
    assert m.heat_capacity(I2, 0.2) == pytest.approx(0.5, rel=1e-14)


def test_log_entropy_zero_at_reference():
    m = C.NonphysicalLog(c_v=1.0, theta_ref=1.0)
    assert m.entropy(I2, 1.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("theta", [0.1, 1.0, 3.0])
def test_thermal_expansion_hydrostatic_T1(theta):
    m = C.ThermalExpansion(K_e=1.7, beta=0.3, theta_r=0.2)
    _, T1 = m.stress_split(I2, theta)
    expected = -m.beta * m.K_e * theta * theta / (theta + m.theta_r)
    np.testing.assert_allclose(T1, expected * I2, rtol=1e-12, atol=1e-15)


def test_regularized_initial_temperature():
    assert regularized_theta0(1.0, 0.1) == pytest.approx(1.0 / 1.1, rel=1e-15)
    grid = Grid(8, 8)
    model = C.NeoHookeanPower()
    state = initial_state(Scenario("quiescent-hotspot", theta0=1.0, bump_amplitude=0.0), grid, model, epsilon=0.1)
    theta = C.invert_thermal_energy(model, state.F, state.e - model.internal_energy(state.F, 0.0))
    np.testing.assert_allclose(theta, 1.0 / 1.1, rtol=1e-10)
