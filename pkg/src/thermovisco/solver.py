"""Method-of-lines solver for the regularized thermo-visco-elastodynamic system.

Unknowns per cell: density ``rho``, velocity ``v``, deformation gradient ``F``
and the actual internal energy density ``e``.  Temperature is recovered from
``e - E(F, 0)`` with the modified inverse of the thermal energy.

The semi-discretization is chosen so that, on the periodic grid, mass,
momentum and total energy are conserved exactly up to time-integration
error:

* mass in conservative form ``rho_t = -div(rho v)``;
* momentum advection in the skew-symmetric form
  ``1/2 [div(rho v (x) v) + (rho v . grad) v - v div(rho v)]``;
* internal-energy advection as ``v . grad e + e div v``, whose cell sum
  vanishes identically;
* the stress power ``T : grad v`` and the dissipation use the same discrete
  gradient as the momentum divergence, so they cancel by summation by parts.

Time stepping is classical RK4 with an adaptive step bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import SimpleNamespace

import numpy as np

from . import tensor
from .constitutive import FreeEnergyModel, InversionError, NeoHookeanPower, invert_thermal_energy
from .grid import Grid

SCENARIOS = ("quiescent-hotspot", "shear-decay", "compression-pulse")
HEAT_SOURCES = ("none", "uniform", "gaussian")


class SimulationBlowup(RuntimeError):
    """The discrete state left the admissible set (or temperature recovery failed)."""

    def __init__(self, message, t=None, cell=None, trajectory=None, ledger=None):
        super().__init__(message)
        self.t = t
        self.cell = cell
        self.trajectory = trajectory
        self.ledger = ledger


@dataclass(frozen=True)
class Scenario:
    id: str = "shear-decay"
    amplitude: float = 0.01  # shear velocity or dilatation amplitude
    theta0: float = 1.0
    rho_R: float = 1.0
    bump_amplitude: float = 0.5
    bump_width: float = 0.1
    mode: int = 1

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.id!r}; valid: {', '.join(SCENARIOS)}")
        if not self.rho_R > 0:
            raise ValueError("rho_R must be > 0")
        if not self.theta0 >= 0:
            raise ValueError("theta0 must be >= 0")
        if not self.bump_width > 0:
            raise ValueError("bump_width must be > 0")
        if self.mode < 1:
            raise ValueError("mode must be >= 1")
        if self.id == "compression-pulse" and not abs(self.amplitude) < 1:
            raise ValueError("compression-pulse amplitude must satisfy |a| < 1")


@dataclass(frozen=True)
class HeatSource:
    kind: str = "none"
    amplitude: float = 0.0
    width: float = 0.1

    def __post_init__(self):
        if self.kind not in HEAT_SOURCES:
            raise ValueError(f"unknown heat source {self.kind!r}; valid: {', '.join(HEAT_SOURCES)}")
        if not self.width > 0:
            raise ValueError("heat source width must be > 0")

    def field(self, grid: Grid) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(grid.shape)
        if self.kind == "uniform":
            return np.full(grid.shape, float(self.amplitude))
        return self.amplitude * _periodic_gaussian(grid, self.width)


@dataclass(frozen=True)
class DtPolicy:
    cfl_advect: float = 0.4
    cfl_visc: float = 0.4
    cfl_hyper: float = 0.1
    cfl_thermal: float = 0.4
    c_floor: float = 1e-3  # heat-capacity floor in the thermal bound
    hyper_floor: float = 1e-8  # floor on |grad^2 v| in the hyperviscous bound
    dt_fixed: float = 0.0  # > 0 overrides the adaptive bound

    def __post_init__(self):
        for name in ("cfl_advect", "cfl_visc", "cfl_hyper", "cfl_thermal", "c_floor", "hyper_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.dt_fixed >= 0:
            raise ValueError("dt_fixed must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    model: FreeEnergyModel = field(default_factory=NeoHookeanPower)
    nu1: float = 0.01
    nu2: float = 1e-6
    p: float = 4.0
    kappa0: float = 0.01
    epsilon: float = 0.0
    k_damp: float = math.inf
    gravity: tuple[float, float] = (0.0, 0.0)
    heat_source: HeatSource = field(default_factory=HeatSource)
    grid: Grid = field(default_factory=lambda: Grid(32, 32))
    scenario: Scenario = field(default_factory=Scenario)
    dt_policy: DtPolicy = field(default_factory=DtPolicy)
    t_end: float = 0.1
    dump_every: float = math.inf
    seed: int = 0

    def __post_init__(self):
        if self.model.d != 2:
            raise ValueError("the solver runs in two dimensions; model.d must be 2")
        if not (self.nu1 > 0 and self.nu2 > 0):
            raise ValueError("nu1 and nu2 must be > 0")
        if not self.p > 2:
            raise ValueError(f"p must exceed the dimension 2, got {self.p}")
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be > 0")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not self.k_damp > 0:
            raise ValueError("k_damp must be > 0 (inf disables damping)")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if not self.dump_every > 0:
            raise ValueError("dump_every must be > 0")
        if len(self.gravity) != 2:
            raise ValueError("gravity must have two components")


@dataclass
class SimState:
    t: float
    rho: np.ndarray
    v: np.ndarray
    F: np.ndarray
    e: np.ndarray
    theta: np.ndarray | None = None  # cache of the last recovered temperature

    def copy(self) -> "SimState":
        return SimState(
            self.t,
            self.rho.copy(),
            self.v.copy(),
            self.F.copy(),
            self.e.copy(),
            None if self.theta is None else self.theta.copy(),
        )


def _periodic_gaussian(grid: Grid, width: float, center=(0.5, 0.5)) -> np.ndarray:
    X, Y = grid.coords()
    dx = X - center[0] * grid.Lx
    dy = Y - center[1] * grid.Ly
    dx -= grid.Lx * np.round(dx / grid.Lx)
    dy -= grid.Ly * np.round(dy / grid.Ly)
    return np.exp(-(dx * dx + dy * dy) / (2.0 * width * width))


def regularized_theta0(theta0, epsilon: float):
    theta0 = np.asarray(theta0, dtype=float)
    return theta0 / (1.0 + epsilon * theta0)


def initial_state(scenario: Scenario, grid: Grid, model: FreeEnergyModel, epsilon: float = 0.0) -> SimState:
    X, Y = grid.coords()
    F = tensor.identity(2, grid.shape)
    v = np.zeros(grid.shape + (2,))
    theta0 = np.full(grid.shape, float(scenario.theta0))
    kx = 2.0 * np.pi * scenario.mode / grid.Lx
    ky = 2.0 * np.pi * scenario.mode / grid.Ly
    if scenario.id == "quiescent-hotspot":
        theta0 = theta0 + scenario.bump_amplitude * _periodic_gaussian(grid, scenario.bump_width)
    elif scenario.id == "shear-decay":
        v[..., 0] = scenario.amplitude * np.sin(ky * Y)
    else:
        # F^{-1} is diagonal with entries depending on one coordinate each, so
        # its rows are curl free: a genuine deformation gradient.
        F[..., 0, 0] += scenario.amplitude * np.cos(kx * X)
        F[..., 1, 1] += scenario.amplitude * np.cos(ky * Y)
    theta_eps = regularized_theta0(theta0, epsilon)
    e = model.internal_energy(F, theta_eps)
    rho = scenario.rho_R / tensor.det(F)
    return SimState(0.0, rho, v, F, e, theta_eps)


# -- right-hand side -----------------------------------------------------------------


def _check_state(state: SimState, model: FreeEnergyModel):
    for name in ("rho", "v", "F", "e"):
        arr = getattr(state, name)
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0][:2]
            raise SimulationBlowup(f"non-finite {name} at cell {tuple(bad)}, t={state.t}", state.t, tuple(bad))
    if state.rho.min() <= 0:
        cell = np.unravel_index(np.argmin(state.rho), state.rho.shape)
        raise SimulationBlowup(f"rho <= 0 at cell {cell}, t={state.t}", state.t, cell)
    J = tensor.det(state.F)
    if J.min() <= 0:
        cell = np.unravel_index(np.argmin(J), J.shape)
        raise SimulationBlowup(f"det F <= 0 at cell {cell}, t={state.t}", state.t, cell)
    return J


def evaluate(state: SimState, config: SimConfig) -> SimpleNamespace:
    """All intermediate fields of the right-hand side at ``state``."""
    g, model = config.grid, config.model
    J = _check_state(state, model)
    E0 = model.internal_energy(state.F, 0.0)
    u = state.e - E0
    tol = 1e-9 * (1.0 + np.abs(E0))
    if np.any(u < -tol):
        cell = np.unravel_index(np.argmin(u + tol), u.shape)
        raise SimulationBlowup(
            f"internal energy below E(F,0) at cell {cell}, t={state.t}", state.t, cell
        )
    try:
        theta = invert_thermal_energy(model, state.F, u, theta_guess=state.theta)
    except InversionError as exc:
        raise SimulationBlowup(f"temperature recovery failed at t={state.t}: {exc}", state.t) from exc
    T = model.cauchy_stress(state.F, theta)
    L = g.grad(state.v)  # L[i, j] = d_j v_i
    S = tensor.sym(L)
    G2 = g.second_grad(state.v)
    s2 = np.sum(S * S, axis=(-2, -1))
    g2 = tensor.frobenius(G2, rank=3)
    gp = g2**config.p
    hyper = config.nu2 * (g2 ** (config.p - 2.0))[..., None, None, None] * G2
    xi = config.nu1 * s2 + config.nu2 * gp
    eps = config.epsilon
    xi_eps = xi / (1.0 + eps * s2 + eps * gp) if eps > 0 else xi
    src = config.heat_source.field(g)
    src_eps = src / (1.0 + eps * src) if eps > 0 else src
    return SimpleNamespace(
        J=J, E0=E0, u=u, theta=theta, T=T, L=L, S=S, G2=G2, hyper=hyper,
        xi=xi, xi_eps=xi_eps, src=src, src_eps=src_eps,
    )


def rhs(state: SimState, config: SimConfig, ev: SimpleNamespace | None = None):
    """Time derivatives ``(drho, dv, dF, de)`` of the semi-discrete system."""
    if ev is None:
        ev = evaluate(state, config)
    g = config.grid
    rho, v, F, e = state.rho, state.v, state.F, state.e
    m = rho[..., None] * v
    div_m = g.div(m)
    drho = -div_m

    force = g.div(ev.T) + config.nu1 * g.div(ev.S) - g.div_div(ev.hyper)
    gx, gy = config.gravity
    if gx or gy:
        force = force + rho[..., None] * np.array([gx, gy])
    if math.isfinite(config.k_damp):
        force = force - v / config.k_damp
    flux = v[..., :, None] * m[..., None, :]  # (v_i m_k)
    adv = 0.5 * (g.div(flux) + g.advect(v, m) - v * div_m[..., None])
    dv = (force - adv) / rho[..., None]

    dF = ev.L @ F - g.advect(F, v)

    div_v = np.trace(ev.L, axis1=-2, axis2=-1)
    de = (
        -(g.advect(e, v) + e * div_v)
        + g.div(config.kappa0 * g.grad(ev.theta))
        + ev.xi_eps
        + tensor.ddot(ev.T, ev.L)
        + ev.src_eps
    )
    return drho, dv, dF, de


# -- time step -----------------------------------------------------------------------


def wave_speed(state: SimState, config: SimConfig, theta) -> float:
    """Upper estimate of the elastic wave speed from a finite-difference stress probe."""
    model, F = config.model, state.F
    T = model.cauchy_stress(F, theta)
    h = 1e-6
    worst = np.zeros(F.shape[:-2])
    for i in range(2):
        for j in range(2):
            H = np.zeros((2, 2))
            H[i, j] = 1.0
            dT = (model.cauchy_stress(F + h * (H @ F), theta) - T) / h
            worst = np.maximum(worst, tensor.frobenius(dT))
    return float(np.sqrt(np.max(worst / state.rho)))


def dt_bounds(state: SimState, config: SimConfig, ev: SimpleNamespace | None = None) -> dict:
    """The individual safety-factored step bounds (seconds)."""
    if ev is None:
        ev = evaluate(state, config)
    pol, g = config.dt_policy, config.grid
    h = min(g.dx, g.dy)
    rho_min = float(state.rho.min())
    vmax = float(np.max(np.abs(state.v)))
    c_wave = wave_speed(state, config, ev.theta)
    bounds = {
        "advect": pol.cfl_advect * h / (vmax + c_wave) if vmax + c_wave > 0 else math.inf,
        "visc": pol.cfl_visc * rho_min * h * h / config.nu1,
    }
    g2max = max(float(np.max(tensor.frobenius(ev.G2, rank=3))), pol.hyper_floor)
    bounds["hyper"] = pol.cfl_hyper * rho_min * h**4 / (config.nu2 * g2max ** (config.p - 2.0))
    c = np.maximum(config.model.heat_capacity(state.F, ev.theta), pol.c_floor)
    bounds["thermal"] = pol.cfl_thermal * h * h * float(np.min(c)) / config.kappa0
    bounds["dump"] = config.dump_every
    return bounds


def stable_dt(state: SimState, config: SimConfig, ev: SimpleNamespace | None = None) -> float:
    if config.dt_policy.dt_fixed > 0:
        return min(config.dt_policy.dt_fixed, config.dump_every)
    return min(dt_bounds(state, config, ev).values())


def _axpy(state: SimState, k, a: float) -> SimState:
    drho, dv, dF, de = k
    return SimState(state.t, state.rho + a * drho, state.v + a * dv, state.F + a * dF, state.e + a * de, state.theta)


def step(state: SimState, config: SimConfig, dt: float | None = None, ev=None) -> SimState:
    """One classical RK4 step (size ``stable_dt`` unless ``dt`` is given)."""
    if ev is None:
        ev = evaluate(state, config)
    if dt is None:
        dt = stable_dt(state, config, ev)
    k1 = rhs(state, config, ev)
    s2 = _axpy(state, k1, 0.5 * dt)
    s2.t = state.t + 0.5 * dt
    k2 = rhs(s2, config)
    s3 = _axpy(state, k2, 0.5 * dt)
    s3.t = s2.t
    k3 = rhs(s3, config)
    s4 = _axpy(state, k3, dt)
    s4.t = state.t + dt
    k4 = rhs(s4, config)
    w = dt / 6.0
    new = SimState(
        state.t + dt,
        state.rho + w * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        state.v + w * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        state.F + w * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
        state.e + w * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
        ev.theta,
    )
    _check_state(new, config.model)
    return new


def run(config: SimConfig, state: SimState | None = None, on_step=None):
    """Integrate to ``t_end``.

    Returns ``(trajectory, ledger)``; the trajectory holds the initial state,
    one state per dump time and the final state.  On blowup the partial
    trajectory and ledger are attached to the raised exception.
    """
    from .diagnostics import BalanceLedger, energy_report

    if state is None:
        state = initial_state(config.scenario, config.grid, config.model, config.epsilon)
    ledger = BalanceLedger()
    trajectory = [state.copy()]
    next_dump = config.dump_every
    t_end = config.t_end
    try:
        while True:
            ev = evaluate(state, config)
            state.theta = ev.theta
            ledger.append(energy_report(state, config, ev))
            if on_step is not None:
                on_step(state, ledger)
            if state.t >= t_end * (1 - 1e-14) - 1e-300:
                break
            dt = stable_dt(state, config, ev)
            target = min(t_end, next_dump)
            if state.t + dt >= target * (1 - 1e-12):
                dt = target - state.t
            state = step(state, config, dt, ev)
            if state.t >= target * (1 - 1e-12):
                state.t = target
                if target == next_dump and target < t_end:
                    trajectory.append(state.copy())
                    next_dump += config.dump_every
    except SimulationBlowup as exc:
        exc.trajectory, exc.ledger = trajectory, ledger
        raise
    if trajectory[-1].t != state.t:
        trajectory.append(state.copy())
    return trajectory, ledger


def with_updates(config: SimConfig, **changes) -> SimConfig:
    return replace(config, **changes)
