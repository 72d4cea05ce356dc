import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from thermovisco import constitutive as C
from thermovisco import tensor
from thermovisco.acceptance import derivative_errors, thermal_curves, thermal_only_models, catalogue_models, random_F

# -- independent symbolic oracle ---------------------------------------------------

_f = sp.symbols("f11 f12 f21 f22", real=True)
_th = sp.symbols("theta", positive=True)
_Fs = sp.Matrix(2, 2, _f)
_J = _Fs.det()


def _ref_energy(model):
    """Referential free energy written out directly in sympy (d = 2, theta > 0)."""
    tr = sum(x**2 for x in _f)
    if isinstance(model, C.BoundedHeatCapacity):
        r = model.theta_r
        thermal = -model.c_v * ((_th + r) * sp.log(1 + _th / r) - _th)
    elif isinstance(model, C.NonphysicalLog):
        thermal = -model.c_v * _th * (sp.log(_th / model.theta_ref) - 1)
    else:
        a = model.alpha
        thermal = -model.c_v * _th * (_th / model.theta_ref) ** a / (a * (1 + a))
    if isinstance(model, C.NeoHookeanLog):
        stored = model.K_e / 2 * (_J - 1 + model.K_0 / model.K_e) ** 2 - model.K_0 * sp.log(_J)
    else:
        stored = model.K_e / 2 * (_J - 1) ** 2
    stored += model.G_e * tr / _J
    if isinstance(model, C.ThermalExpansion):
        stored -= model.beta * model.K_e * _th**2 / (_th + model.theta_r) * sp.log(_J)
    return stored + thermal


def _oracle(model):
    psi = _ref_energy(model) / _J
    dpsi = sp.Matrix(2, 2, [sp.diff(psi, x) for x in _f])
    T = dpsi * _Fs.T + psi * sp.eye(2)
    eta = -sp.diff(psi, _th)
    c = -_th * sp.diff(psi, _th, 2)
    E = psi + _th * eta
    args = (*_f, _th)
    return {
        "psi": sp.lambdify(args, psi, "numpy"),
        "T": sp.lambdify(args, T, "numpy"),
        "eta": sp.lambdify(args, eta, "numpy"),
        "c": sp.lambdify(args, c, "numpy"),
        "E": sp.lambdify(args, E, "numpy"),
    }


SYMBOLIC_MODELS = [
    C.NeoHookeanPower(K_e=1.3, G_e=0.7, c_v=1.1, theta_ref=0.8, alpha=0.4),
    C.NeoHookeanLog(K_e=1.0, G_e=0.5, K_0=0.2),
    C.ThermalExpansion(K_e=2.0, G_e=0.4, beta=0.05, theta_r=0.3),
    C.BoundedHeatCapacity(K_e=1.0, G_e=1.0, c_v=2.0, theta_r=0.2),
    C.NonphysicalLog(K_e=1.0, G_e=0.3, c_v=1.5, theta_ref=0.5),
]


@pytest.mark.parametrize("model", SYMBOLIC_MODELS, ids=lambda m: m.model_id)
def test_matches_symbolic_oracle(rng, model):
    ora = _oracle(model)
    F = random_F(rng, 40, 2)
    theta = rng.uniform(0.01, 5.0, 40)
    for k in range(40):
        args = (*F[k].ravel(), theta[k])
        Fk, tk = F[k], theta[k]
        assert model.psi(Fk, tk) == pytest.approx(ora["psi"](*args), rel=1e-11, abs=1e-12)
        np.testing.assert_allclose(model.cauchy_stress(Fk, tk), np.array(ora["T"](*args), float), rtol=1e-10, atol=1e-11)
        assert model.entropy(Fk, tk) == pytest.approx(ora["eta"](*args), rel=1e-11, abs=1e-12)
        assert model.heat_capacity(Fk, tk) == pytest.approx(ora["c"](*args), rel=1e-10, abs=1e-12)
        assert model.internal_energy(Fk, tk) == pytest.approx(ora["E"](*args), rel=1e-11, abs=1e-12)


def test_softmin_matches_symbolic_oracle(rng):
    model = C.example_sma()
    psis = []
    for w in model.wells:
        Ai = sp.Matrix(w.F).inv()
        FA = _Fs * Ai
        a = model.alpha
        psis.append(
            w.K / 2 * (_J - 1) ** 2
            + w.G * sum(x**2 for x in FA) / _J
            - w.c * _th * (_th / model.theta_ref) ** a / (a * (1 + a))
        )
    k = model.varkappa
    psi = -k * sp.log(sum(sp.exp(-p / k) for p in psis)) / _J
    T = sp.Matrix(2, 2, [sp.diff(psi, x) for x in _f]) * _Fs.T + psi * sp.eye(2)
    c = -_th * sp.diff(psi, _th, 2)
    fpsi, fT, fc = (sp.lambdify((*_f, _th), e, "numpy") for e in (psi, T, c))
    F = random_F(rng, 20, 2, det_range=(0.7, 1.4))
    theta = rng.uniform(0.05, 3.0, 20)
    for Fk, tk in zip(F, theta):
        args = (*Fk.ravel(), tk)
        assert model.psi(Fk, tk) == pytest.approx(fpsi(*args), rel=1e-10)
        np.testing.assert_allclose(model.cauchy_stress(Fk, tk), np.array(fT(*args), float), rtol=1e-9, atol=1e-10)
        assert model.heat_capacity(Fk, tk) == pytest.approx(fc(*args), rel=1e-8, abs=1e-12)


# -- finite-difference and structural properties -----------------------------------


@pytest.mark.parametrize("model", catalogue_models(), ids=lambda m: f"{m.model_id}-d{m.d}")
def test_finite_difference_suite(rng, model):
    F = random_F(rng, 300, model.d)
    theta = rng.uniform(-1.0, 5.0, 300)
    errs = derivative_errors(model, F, theta)
    assert max(errs.values()) <= 1e-5, errs
    assert errs["gibbs"] <= 1e-12


@pytest.mark.parametrize("model", catalogue_models(), ids=lambda m: f"{m.model_id}-d{m.d}")
def test_frame_indifference_and_symmetry(rng, model):
    F = random_F(rng, 100, model.d)
    theta = rng.uniform(0.1, 3.0, 100)
    Q = tensor.random_rotations(rng, 100, model.d)
    np.testing.assert_allclose(model.psi(Q @ F, theta), model.psi(F, theta), rtol=1e-12, atol=1e-12)
    T = model.cauchy_stress(F, theta)
    TQ = model.cauchy_stress(Q @ F, theta)
    np.testing.assert_allclose(TQ, Q @ T @ tensor.transpose(Q), atol=1e-10 * (1 + np.abs(T).max()))
    np.testing.assert_allclose(T, tensor.transpose(T), atol=1e-11 * (1 + np.abs(T).max()))


@pytest.mark.parametrize("model", catalogue_models(), ids=lambda m: f"{m.model_id}-d{m.d}")
def test_negative_temperature_extension(rng, model):
    F = random_F(rng, 50, model.d)
    neg = -rng.uniform(0.0, 3.0, 50)
    zero = np.zeros(50)
    np.testing.assert_array_equal(model.internal_energy(F, neg), model.internal_energy(F, zero))
    np.testing.assert_array_equal(model.heat_capacity(F, neg), 0.0)
    np.testing.assert_array_equal(model.thermal_energy(F, neg), 0.0)
    np.testing.assert_allclose(model.psi(F, neg), model.stored_energy(F), rtol=1e-14)
    T0, T1 = model.stress_split(F, neg)
    np.testing.assert_array_equal(T1, 0.0)


@pytest.mark.parametrize("model", catalogue_models(), ids=lambda m: f"{m.model_id}-d{m.d}")
def test_stress_split_recombines(rng, model):
    F = random_F(rng, 50, model.d)
    theta = rng.uniform(0.0, 3.0, 50)
    T0, T1 = model.stress_split(F, theta)
    np.testing.assert_allclose(T0 + T1, model.cauchy_stress(F, theta), atol=1e-13)
    np.testing.assert_allclose(T0, model.cauchy_stress(F, zero := np.zeros(50)))
    assert zero.sum() == 0


def test_pure_power_model_has_no_thermal_stress(rng):
    model = C.NeoHookeanPower()
    F = random_F(rng, 30, 2)
    _, T1 = model.stress_split(F, rng.uniform(0.0, 4.0, 30))
    # psi_ref is additive, so T1 = psi_thermal_ref/J * (-I) + psi_thermal_ref/J * I vanishes
    np.testing.assert_allclose(T1, 0.0, atol=1e-14)


def test_heat_capacity_nonnegative_and_third_law(rng):
    for model in catalogue_models():
        F = random_F(rng, 200, model.d)
        theta = rng.uniform(0.0, 10.0, 200)
        assert np.all(model.heat_capacity(F, theta) >= 0.0)
        if not isinstance(model, C.NonphysicalLog):
            np.testing.assert_array_equal(model.entropy(F, np.zeros(200)), 0.0)


def test_nonphysical_log_entropy_undefined_at_zero():
    model = C.NonphysicalLog()
    with pytest.raises(C.ConstitutiveDomainError):
        model.entropy(np.eye(2), 0.0)
    # entropy diverges logarithmically as theta -> 0
    assert model.entropy(np.eye(2), 1e-12) < -20.0
    assert model.heat_capacity(np.eye(2), 1e-12) == 1.0


def test_negative_determinant_rejected():
    F = np.diag([1.0, -1.0])
    with pytest.raises(C.ConstitutiveDomainError, match="det F"):
        C.NeoHookeanPower().psi(F, 1.0)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        C.NeoHookeanPower().psi(np.eye(3), 1.0)


def test_softmin_bounds(rng):
    model = C.example_sma()
    F = random_F(rng, 200, 2, det_range=(0.5, 2.0))
    theta = rng.uniform(0.0, 3.0, 200)
    wells = model.well_energies(F, theta)
    psi_ref = model.psi(F, theta) * tensor.det(F)
    L = len(model.wells)
    assert np.all(psi_ref <= wells.min(axis=0) + 1e-12)
    assert np.all(psi_ref >= wells.min(axis=0) - model.varkappa * np.log(L) - 1e-12)


def test_sma_wells_are_stress_free_minimisers():
    model = C.example_sma(varkappa=1e-3)
    for w in model.wells[1:]:
        Fw = np.asarray(w.F)
        energies = model.well_energies(Fw, 0.0)
        assert np.argmin(energies) == model.wells.index(w)


@pytest.mark.parametrize(
    "kwargs",
    [dict(K_e=-1.0), dict(c_v=0.0), dict(alpha=1.0), dict(alpha=0.0), dict(theta_ref=-1.0)],
)
def test_parameter_validation(kwargs):
    with pytest.raises(ValueError):
        C.NeoHookeanPower(**kwargs)


def test_alpha_bound_is_dimension_dependent():
    C.NeoHookeanPower(d=2, alpha=0.7)
    with pytest.raises(ValueError):
        C.NeoHookeanPower(d=3, alpha=0.7)


def test_sma_well_validation():
    with pytest.raises(ValueError):
        C.MultiWellSMA(wells=())
    with pytest.raises(ValueError):
        C.MultiWellSMA(wells=({"F": [[1, 0], [0, 1]], "K": 1, "G": 1, "c": 1}, {"F": [[2, 0], [0, 1]], "K": 1, "G": 1, "c": 1}))


@pytest.mark.parametrize("model", catalogue_models(), ids=lambda m: f"{m.model_id}-d{m.d}")
def test_params_roundtrip(model):
    back = C.model_from_params(model.model_id, C.model_to_params(model))
    assert back == model


def test_unknown_model_lists_valid_ids():
    with pytest.raises(ValueError, match="neo_hookean_power"):
        C.model_from_params("nope", {})


# -- temperature recovery ---------------------------------------------------------


@pytest.mark.parametrize("model", catalogue_models(), ids=lambda m: f"{m.model_id}-d{m.d}")
def test_inversion_roundtrip(rng, model):
    theta = np.concatenate([[0.0, 1e-9, 1e-3], rng.uniform(0.0, 100.0 * model.theta_scale, 300)])
    F = random_F(rng, theta.size, model.d)
    back = C.invert_thermal_energy(model, F, model.thermal_energy(F, theta))
    np.testing.assert_allclose(back, theta, atol=1e-10, rtol=0)


@given(u=st.floats(-1e6, 0.0))
@settings(max_examples=40, deadline=None)
def test_nonpositive_energy_maps_to_zero(u):
    assert C.invert_thermal_energy(C.BoundedHeatCapacity(), np.eye(2), u) == 0.0


@given(theta=st.floats(1e-6, 1e3), guess=st.floats(1e-3, 1e3))
@settings(max_examples=60, deadline=None)
def test_inversion_with_any_guess(theta, guess):
    model = C.NeoHookeanPower(alpha=0.2)
    u = model.thermal_energy(np.eye(2), theta)
    back = C.invert_thermal_energy(model, np.eye(2), u, theta_guess=guess)
    assert back == pytest.approx(theta, rel=1e-12, abs=1e-12)


def test_inversion_rejects_nonfinite():
    with pytest.raises(C.InversionError):
        C.invert_thermal_energy(C.NeoHookeanPower(), np.eye(2), np.nan)


def test_inversion_error_carries_bracket():
    with pytest.raises(C.InversionError) as info:
        C.invert_thermal_energy(C.NeoHookeanPower(), np.eye(2), 1e300, max_iter=3)
    assert info.value.u is not None


# -- tabulation and the heat-capacity curves ---------------------------------------


def test_tabulate_reproduces_closed_forms():
    theta = np.linspace(-1.0, 5.0, 301)
    curves = thermal_curves(theta)
    for name, model in thermal_only_models().items():
        table = C.tabulate(model, np.eye(2), theta)
        psi, E, c = curves[name]
        np.testing.assert_allclose(table[:, 0], theta)
        np.testing.assert_allclose(table[:, 1], psi, atol=1e-12, rtol=0)
        np.testing.assert_allclose(table[:, 2], E, atol=1e-12, rtol=0)
        np.testing.assert_allclose(table[:, 4], c, atol=1e-12, rtol=0)


def test_bounded_energy_is_gibbs_consistent():
    # E = psi + theta eta with psi = -((t+r) ln(1+t/r) - t) gives E = t - r ln(1+t/r)
    model = C.BoundedHeatCapacity(K_e=0.0, G_e=0.0, theta_r=0.2)
    t = np.linspace(0.0, 5.0, 51)
    E = model.internal_energy(np.eye(2), t)
    np.testing.assert_allclose(E, t - 0.2 * np.log1p(t / 0.2), atol=1e-14)
    # E is the antiderivative of c = t/(t+r)
    t = np.linspace(0.0, 5.0, 5001)
    E = model.internal_energy(np.eye(2), t)
    mid = 0.5 * (t[1:] + t[:-1])
    np.testing.assert_allclose(np.diff(E) / np.diff(t), mid / (mid + 0.2), atol=1e-5)


def test_heat_capacity_curves_cross():
    # bounded c exceeds t^0.05 nowhere on (0, 5] but power c is steeper near zero
    t = np.linspace(1e-4, 5.0, 500)
    c_pow = t**0.05
    c_bd = t / (t + 0.2)
    assert np.all(c_pow[t < 0.2] > c_bd[t < 0.2])
    assert c_bd[-1] < 1.0 and c_pow[-1] > 1.0
