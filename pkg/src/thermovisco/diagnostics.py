"""Conservation ledgers and discrete balance residuals."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import tensor

LEDGER_FIELDS = (
    "t",
    "mass",
    "momentum_x",
    "momentum_y",
    "kinetic",
    "internal",
    "total",
    "stored",
    "dissipation_rate",
    "power_gravity",
    "power_source",
    "entropy_total",
    "entropy_production",
    "min_detF",
    "min_rho",
    "min_theta",
    "curlF_norm",
)

RESIDUAL_FIELDS = ("t", "mechanical_residual", "total_residual", "entropy_violation", "adiabatic_crosscheck")


@dataclass(frozen=True)
class LedgerRow:
    t: float
    mass: float
    momentum_x: float
    momentum_y: float
    kinetic: float
    internal: float
    total: float
    stored: float
    dissipation_rate: float
    power_gravity: float
    power_source: float
    entropy_total: float
    entropy_production: float
    min_detF: float
    min_rho: float
    min_theta: float
    curlF_norm: float

    def values(self) -> tuple:
        return astuple(self)


@dataclass(frozen=True)
class AuxRow:
    """Powers needed by the residuals that are not part of the ledger CSV."""

    power_stress: float  # integral of T : grad v
    power_adiabatic: float  # integral of T1 : grad v
    power_damping: float  # integral of |v|^2 / k_damp
    cold_cells: int  # cells below the temperature floor, excluded from entropy production


assert tuple(f.name for f in fields(LedgerRow)) == LEDGER_FIELDS


class BalanceLedger:
    def __init__(self):
        self.rows: list[LedgerRow] = []
        self.aux: list[AuxRow] = []

    def append(self, entry):
        row, aux = entry
        if self.rows and row.t < self.rows[-1].t:
            raise ValueError("ledger rows must be time ordered")
        self.rows.append(row)
        self.aux.append(aux)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name in LEDGER_FIELDS:
            return np.array([getattr(r, name) for r in self.rows], dtype=float)
        return np.array([getattr(a, name) for a in self.aux], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([r.values() for r in self.rows], dtype=float).reshape(-1, len(LEDGER_FIELDS))


def energy_report(state, config, ev=None):
    """One ledger row (plus auxiliary powers) for ``state``."""
    from .solver import evaluate

    if ev is None:
        ev = evaluate(state, config)
    g, model = config.grid, config.model
    rho, v, F = state.rho, state.v, state.F
    vv = np.sum(v * v, axis=-1)
    kinetic = g.integrate(0.5 * rho * vv)
    internal = g.integrate(state.e)
    momentum = g.integrate(rho[..., None] * v)
    stored = g.integrate(model.psi(F, 0.0))
    gvec = np.asarray(config.gravity, dtype=float)
    power_gravity = g.integrate(rho * (v @ gvec))
    power_source = g.integrate(ev.src_eps)

    theta = ev.theta
    theta_floor = 1e-12 * getattr(model, "theta_ref", 1.0)
    warm = theta > theta_floor
    safe = np.where(warm, theta, 1.0)
    eta = np.where(warm, model.entropy(F, safe), 0.0)
    grad_theta = g.grad(theta)
    prod = np.where(
        warm, (ev.xi_eps + config.kappa0 * np.sum(grad_theta**2, axis=-1) / safe) / safe, 0.0
    )
    _, T1 = model.stress_split(F, theta)
    damping = g.integrate(vv / config.k_damp) if math.isfinite(config.k_damp) else 0.0
    curl = g.curl_rows(F)
    row = LedgerRow(
        t=float(state.t),
        mass=float(g.integrate(rho)),
        momentum_x=float(momentum[0]),
        momentum_y=float(momentum[1]),
        kinetic=float(kinetic),
        internal=float(internal),
        total=float(kinetic + internal),
        stored=float(stored),
        dissipation_rate=float(g.integrate(ev.xi)),
        power_gravity=float(power_gravity),
        power_source=float(power_source),
        entropy_total=float(g.integrate(eta)),
        entropy_production=float(g.integrate(prod)),
        min_detF=float(np.min(ev.J)),
        min_rho=float(np.min(rho)),
        min_theta=float(np.min(theta)),
        curlF_norm=float(np.sqrt(g.integrate(np.sum(curl * curl, axis=-1)))),
    )
    aux = AuxRow(
        power_stress=float(g.integrate(tensor.ddot(ev.T, ev.L))),
        power_adiabatic=float(g.integrate(tensor.ddot(T1, ev.L))),
        power_damping=float(damping),
        cold_cells=int(np.count_nonzero(~warm)),
    )
    return row, aux


def time_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Centred differences on (possibly non-uniform) rows, one-sided at the ends."""
    if t.size < 2:
        raise ValueError("need at least two ledger rows for a time derivative")
    if t.size == 2:
        slope = (y[1] - y[0]) / (t[1] - t[0])
        return np.array([slope, slope])
    return np.gradient(y, t, edge_order=2)


def balance_residuals(ledger: BalanceLedger, config=None) -> dict[str, np.ndarray]:
    """Residual series of the mechanical, total-energy and entropy balances."""
    if len(ledger) < 2:
        raise ValueError("balance residuals need a ledger with at least two rows")
    col = ledger.column
    t = col("t")
    mech = (
        time_derivative(t, col("kinetic") + col("stored"))
        + col("dissipation_rate")
        + col("power_damping")
        - col("power_gravity")
        + col("power_adiabatic")
    )
    # the damping force -v/k removes energy from the system without heating it
    total = time_derivative(t, col("total")) - col("power_gravity") - col("power_source") + col("power_damping")
    ent = col("entropy_total")
    violation = np.concatenate([[0.0], np.maximum(0.0, -np.diff(ent))])
    adiabatic = np.abs(col("power_stress") - time_derivative(t, col("stored")) - col("power_adiabatic"))
    return {
        "t": t,
        "mechanical_residual": mech,
        "total_residual": total,
        "entropy_violation": violation,
        "adiabatic_crosscheck": adiabatic,
    }


def cumulative(t: np.ndarray, rate: np.ndarray) -> np.ndarray:
    """Trapezoidal running integral of a residual series."""
    out = np.zeros_like(rate)
    out[1:] = np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))
    return out
