"""Free-energy models and the thermodynamic quantities derived from them.

Each model is written in terms of its *referential* free energy (per unit
reference volume) and its partial derivatives.  The base class converts
those to the actual, per-current-volume quantities used by the Eulerian
solver::

    psi = psi_ref / det F
    T   = d(psi_ref)/dF F^T / det F  ( = dpsi/dF F^T + psi I )
    eta = -d(psi)/d(theta),  c = -theta d2(psi)/d(theta)2,  E = psi + theta eta

All evaluations broadcast over leading axes: ``F`` has shape ``(..., d, d)``
and ``theta`` any shape broadcastable to ``F.shape[:-2]``.

Temperatures below zero are allowed.  Every physical model is extended so
that the thermal part of the energy is frozen at its zero-temperature value,
i.e. ``E(F, theta) = E(F, 0)`` and ``c = 0`` for ``theta <= 0``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import ClassVar

import numpy as np

from . import tensor

__all__ = [
    "ConstitutiveDomainError",
    "InversionError",
    "FreeEnergyModel",
    "NeoHookeanPower",
    "NeoHookeanLog",
    "ThermalExpansion",
    "BoundedHeatCapacity",
    "Well",
    "MultiWellSMA",
    "NonphysicalLog",
    "MODELS",
    "model_from_params",
    "model_to_params",
    "invert_thermal_energy",
    "tabulate",
    "example_sma",
    "TABULATE_HEADER",
]


class ConstitutiveDomainError(ValueError):
    """Evaluation outside the model's domain (det F <= 0, or theta <= 0 for log models)."""


class InversionError(RuntimeError):
    """Temperature recovery from thermal energy did not converge."""

    def __init__(self, message, lo=None, hi=None, u=None):
        super().__init__(message)
        self.lo, self.hi, self.u = lo, hi, u


def _broadcast(F, theta):
    F = np.asarray(F, dtype=float)
    theta = np.asarray(theta, dtype=float)
    shape = np.broadcast_shapes(F.shape[:-2], theta.shape)
    d = F.shape[-1]
    return np.broadcast_to(F, (*shape, d, d)), np.broadcast_to(theta, shape)


def _pos(theta):
    """Positive part and a mask of strictly positive entries."""
    mask = theta > 0.0
    return np.where(mask, theta, 0.0), mask


# -- stored-energy building blocks -------------------------------------------


def _shear(F, J, G, d, A=None):
    """``G |F A|^2 / J^(2/d)`` and its F-derivative (A = I if omitted)."""
    FA = F if A is None else F @ A
    sq = np.sum(FA * FA, axis=(-2, -1))
    Jm = J ** (-2.0 / d)
    grad_sq = 2.0 * (FA if A is None else FA @ np.swapaxes(A, -1, -2))
    val = G * sq * Jm
    dval = G * Jm[..., None, None] * (
        grad_sq - (2.0 / d) * (sq / J)[..., None, None] * tensor.cofactor(F)
    )
    return val, dval


def _volumetric(F, J, K, shift=0.0):
    """``K/2 (J - 1 + shift)^2`` and its F-derivative."""
    s = J - 1.0 + shift
    return 0.5 * K * s * s, (K * s)[..., None, None] * tensor.cofactor(F)


# -- thermal building blocks (referential, functions of theta only) -----------


def _power_thermal(theta, c_v, theta_ref, alpha):
    """Returns (psi, psi_t, psi_tt, heat capacity, thermal energy) of the power law."""
    tp, pos = _pos(theta)
    r = tp / theta_ref
    ra = r**alpha
    psi = -c_v * tp * ra / (alpha * (1.0 + alpha))
    psi_t = -c_v * ra / alpha
    safe = np.where(pos, tp, 1.0)
    psi_tt = np.where(pos, -c_v * (safe / theta_ref) ** alpha / safe, 0.0)
    cap = c_v * ra
    U = c_v * tp * ra / (1.0 + alpha)
    return psi, psi_t, psi_tt, cap, U


def _bounded_thermal(theta, c_v, theta_r):
    tp, pos = _pos(theta)
    lg = np.log1p(tp / theta_r)
    psi = -c_v * ((tp + theta_r) * lg - tp)
    psi_t = -c_v * lg
    psi_tt = np.where(pos, -c_v / (tp + theta_r), 0.0)
    cap = c_v * tp / (tp + theta_r)
    U = c_v * (tp - theta_r * lg)
    return psi, psi_t, psi_tt, cap, U


# -- base class ---------------------------------------------------------------


@dataclass(frozen=True, kw_only=True)
class FreeEnergyModel:
    """Base class.  Subclasses provide the referential energy and derivatives."""

    d: int = 2

    model_id: ClassVar[str] = ""
    alpha_growth: ClassVar[float] = 0.0  # exponent of the (theta+)^(1+alpha) growth of E

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"d must be 2 or 3, got {self.d}")

    # referential interface, per subclass -------------------------------------
    def ref_psi(self, F, theta, J):
        raise NotImplementedError

    def ref_dpsi_dF(self, F, theta, J):
        raise NotImplementedError

    def ref_dpsi_dtheta(self, F, theta, J):
        raise NotImplementedError

    def ref_d2psi_dtheta2(self, F, theta, J):
        raise NotImplementedError

    def ref_d2psi_dFdtheta(self, F, theta, J):
        raise NotImplementedError

    def ref_heat_capacity(self, F, theta, J):
        theta = np.asarray(theta)
        return np.where(theta > 0.0, -theta * self.ref_d2psi_dtheta2(F, theta, J), 0.0)

    def ref_internal_energy(self, F, theta, J):
        return self.ref_psi(F, theta, J) - theta * self.ref_dpsi_dtheta(F, theta, J)

    def ref_thermal_energy(self, F, theta, J):
        return self.ref_internal_energy(F, theta, J) - self.ref_internal_energy(
            F, np.zeros_like(theta), J
        )

    @property
    def theta_scale(self) -> float:
        """Characteristic temperature used for brackets and floors."""
        return 1.0

    # helpers -------------------------------------------------------------------
    def _prepare(self, F, theta):
        F, theta = _broadcast(F, theta)
        if F.shape[-1] != self.d:
            raise ValueError(f"model has d={self.d} but F has shape {F.shape}")
        J = tensor.det(F)
        bad = ~(J > 0.0)
        if np.any(bad):
            idx = tuple(np.argwhere(np.atleast_1d(bad))[0])
            raise ConstitutiveDomainError(
                f"det F <= 0 (det F = {np.atleast_1d(J)[idx]!r}) at index {idx}"
            )
        return F, theta, J

    # actual quantities --------------------------------------------------------
    def psi(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        return self.ref_psi(F, theta, J) / J

    def dpsi_dF(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        P = self.ref_dpsi_dF(F, theta, J)
        psi_r = self.ref_psi(F, theta, J)
        return P / J[..., None, None] - (psi_r / J**2)[..., None, None] * tensor.cofactor(F)

    def dpsi_dtheta(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        return self.ref_dpsi_dtheta(F, theta, J) / J

    def d2psi_dtheta2(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        return self.ref_d2psi_dtheta2(F, theta, J) / J

    def d2psi_dFdtheta(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        P = self.ref_d2psi_dFdtheta(F, theta, J)
        eta_r = self.ref_dpsi_dtheta(F, theta, J)
        return P / J[..., None, None] - (eta_r / J**2)[..., None, None] * tensor.cofactor(F)

    def cauchy_stress(self, F, theta):
        """Conservative Cauchy stress ``dpsi/dF F^T + psi I``."""
        F, theta, J = self._prepare(F, theta)
        P = self.ref_dpsi_dF(F, theta, J)
        return (P @ tensor.transpose(F)) / J[..., None, None]

    def kirchhoff_stress(self, F, theta):
        """Referential ``d(psi_ref)/dF F^T``."""
        F, theta, J = self._prepare(F, theta)
        return self.ref_dpsi_dF(F, theta, J) @ tensor.transpose(F)

    def entropy(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        return -self.ref_dpsi_dtheta(F, theta, J) / J

    def heat_capacity(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        return self.ref_heat_capacity(F, theta, J) / J

    def internal_energy(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        return self.ref_internal_energy(F, theta, J) / J

    def referential_internal_energy(self, F, theta):
        F, theta, J = self._prepare(F, theta)
        return self.ref_internal_energy(F, theta, J)

    def thermal_energy(self, F, theta):
        """``U = E(F, theta) - E(F, 0)``; zero for theta <= 0."""
        F, theta, J = self._prepare(F, theta)
        return self.ref_thermal_energy(F, theta, J) / J

    def stored_energy(self, F):
        """Temperature-independent part ``psi(F, 0) = E(F, 0)``."""
        F = np.asarray(F, dtype=float)
        return self.psi(F, np.zeros(F.shape[:-2]))

    def stress_split(self, F, theta):
        """``(T0, T1)`` with ``T0 = T(F, 0)`` and ``T1 = T - T0``."""
        F, theta = _broadcast(F, theta)
        T = self.cauchy_stress(F, theta)
        T0 = self.cauchy_stress(F, np.zeros_like(theta))
        T1 = np.where((theta > 0.0)[..., None, None], T - T0, 0.0)
        return T0, T1


# -- neo-Hookean family -------------------------------------------------------


def _check_positive(obj, *names, allow_zero=()):
    for name in names:
        val = getattr(obj, name)
        if name in allow_zero:
            if not val >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {val}")
        elif not val > 0.0:
            raise ValueError(f"{name} must be > 0, got {val}")


def _check_alpha(alpha, d):
    bound = 1.0 if d == 2 else 0.5
    if not 0.0 < alpha < bound:
        raise ValueError(f"alpha must lie in (0, {bound}) for d={d}, got {alpha}")


@dataclass(frozen=True, kw_only=True)
class NeoHookeanPower(FreeEnergyModel):
    """Neo-Hookean stored energy with a power-law thermal part.

    ``psi_ref = K/2 (J-1)^2 + G tr(F F^T)/J^(2/d) - c_v theta (theta+/theta_ref)^alpha / (alpha(1+alpha))``
    """

    K_e: float = 1.0
    G_e: float = 1.0
    c_v: float = 1.0
    theta_ref: float = 1.0
    alpha: float = 0.5

    model_id: ClassVar[str] = "neo_hookean_power"

    def __post_init__(self):
        super().__post_init__()
        _check_positive(self, "K_e", "G_e", "c_v", "theta_ref", allow_zero=("K_e", "G_e"))
        _check_alpha(self.alpha, self.d)

    @property
    def alpha_growth(self):
        return self.alpha

    @property
    def theta_scale(self):
        return self.theta_ref

    def _stored(self, F, J):
        v, dv = _volumetric(F, J, self.K_e)
        s, ds = _shear(F, J, self.G_e, self.d)
        return v + s, dv + ds

    def _thermal(self, F, theta, J):
        return _power_thermal(theta, self.c_v, self.theta_ref, self.alpha)

    def ref_psi(self, F, theta, J):
        return self._stored(F, J)[0] + self._thermal(F, theta, J)[0]

    def ref_dpsi_dF(self, F, theta, J):
        return self._stored(F, J)[1]

    def ref_dpsi_dtheta(self, F, theta, J):
        return self._thermal(F, theta, J)[1]

    def ref_d2psi_dtheta2(self, F, theta, J):
        return self._thermal(F, theta, J)[2]

    def ref_d2psi_dFdtheta(self, F, theta, J):
        return np.zeros(F.shape)

    def ref_heat_capacity(self, F, theta, J):
        return self._thermal(F, theta, J)[3]

    def ref_thermal_energy(self, F, theta, J):
        return self._thermal(F, theta, J)[4]

    def ref_internal_energy(self, F, theta, J):
        return self._stored(F, J)[0] + self.ref_thermal_energy(F, theta, J)


@dataclass(frozen=True, kw_only=True)
class NeoHookeanLog(NeoHookeanPower):
    """Adds ``-K_0 ln J`` and shifts the volumetric well by ``K_0/K_e``."""

    K_0: float = 0.1

    model_id: ClassVar[str] = "neo_hookean_log"

    def __post_init__(self):
        super().__post_init__()
        _check_positive(self, "K_e", "K_0")

    def _stored(self, F, J):
        v, dv = _volumetric(F, J, self.K_e, shift=self.K_0 / self.K_e)
        s, ds = _shear(F, J, self.G_e, self.d)
        logJ = -self.K_0 * np.log(J)
        dlog = -(self.K_0 / J)[..., None, None] * tensor.cofactor(F)
        return v + s + logJ, dv + ds + dlog


@dataclass(frozen=True, kw_only=True)
class ThermalExpansion(NeoHookeanPower):
    """Adds ``-beta K_e (theta+)^2/(theta+ + theta_r) ln J`` (smooth volumetric expansion)."""

    beta: float = 0.01
    theta_r: float = 0.2

    model_id: ClassVar[str] = "thermal_expansion"

    def __post_init__(self):
        super().__post_init__()
        _check_positive(self, "beta", "theta_r")

    def _g(self, theta):
        tp, pos = _pos(theta)
        s = tp + self.theta_r
        g = tp * tp / s
        g1 = tp * (tp + 2.0 * self.theta_r) / s**2
        g2 = np.where(pos, 2.0 * self.theta_r**2 / s**3, 0.0)
        return g, g1, g2, tp

    def ref_psi(self, F, theta, J):
        g = self._g(theta)[0]
        return super().ref_psi(F, theta, J) - self.beta * self.K_e * g * np.log(J)

    def ref_dpsi_dF(self, F, theta, J):
        g = self._g(theta)[0]
        extra = (self.beta * self.K_e * g / J)[..., None, None] * tensor.cofactor(F)
        return super().ref_dpsi_dF(F, theta, J) - extra

    def ref_dpsi_dtheta(self, F, theta, J):
        g1 = self._g(theta)[1]
        return super().ref_dpsi_dtheta(F, theta, J) - self.beta * self.K_e * g1 * np.log(J)

    def ref_d2psi_dtheta2(self, F, theta, J):
        g2 = self._g(theta)[2]
        return super().ref_d2psi_dtheta2(F, theta, J) - self.beta * self.K_e * g2 * np.log(J)

    def ref_d2psi_dFdtheta(self, F, theta, J):
        g1 = self._g(theta)[1]
        return -(self.beta * self.K_e * g1 / J)[..., None, None] * tensor.cofactor(F)

    def ref_heat_capacity(self, F, theta, J):
        g2, tp = self._g(theta)[2:]
        return super().ref_heat_capacity(F, theta, J) + self.beta * self.K_e * tp * g2 * np.log(J)

    def ref_thermal_energy(self, F, theta, J):
        tp = _pos(theta)[0]
        extra = self.beta * self.K_e * self.theta_r * np.log(J) * (tp / (tp + self.theta_r)) ** 2
        return super().ref_thermal_energy(F, theta, J) + extra


@dataclass(frozen=True, kw_only=True)
class BoundedHeatCapacity(NeoHookeanPower):
    """Thermal part with heat capacity ``c_v theta+/(theta+ + theta_r)``, bounded by c_v."""

    theta_r: float = 0.2
    alpha: float = 0.0
    theta_ref: float = 1.0

    model_id: ClassVar[str] = "bounded_heat_capacity"

    def __post_init__(self):
        FreeEnergyModel.__post_init__(self)
        _check_positive(self, "K_e", "G_e", "c_v", "theta_r", allow_zero=("K_e", "G_e"))
        if self.alpha != 0.0:
            raise ValueError("bounded_heat_capacity has alpha = 0")

    @property
    def theta_scale(self):
        return self.theta_r

    def _thermal(self, F, theta, J):
        return _bounded_thermal(theta, self.c_v, self.theta_r)


@dataclass(frozen=True, kw_only=True)
class NonphysicalLog(NeoHookeanPower):
    """Constant heat capacity, ``-c_v theta (ln(theta/theta_ref) - 1)``.

    Its entropy ``c_v ln(theta/theta_ref)/J`` diverges at zero temperature,
    so entropy and the second theta-derivative are only defined for theta > 0.
    Energy and heat capacity keep the frozen extension for theta <= 0.
    """

    alpha: float = 0.0

    model_id: ClassVar[str] = "nonphysical_log"

    def __post_init__(self):
        FreeEnergyModel.__post_init__(self)
        _check_positive(self, "K_e", "G_e", "c_v", "theta_ref", allow_zero=("K_e", "G_e"))
        if self.alpha != 0.0:
            raise ValueError("nonphysical_log has alpha = 0")

    def _require_positive(self, theta):
        if np.any(~(np.asarray(theta) > 0.0)):
            raise ConstitutiveDomainError("nonphysical_log entropy is undefined for theta <= 0")

    def _thermal(self, F, theta, J):
        tp, pos = _pos(theta)
        safe = np.where(pos, tp, 1.0)
        lg = np.log(safe / self.theta_ref)
        psi = np.where(pos, -self.c_v * tp * (lg - 1.0), 0.0)
        psi_t = -self.c_v * lg
        psi_tt = -self.c_v / safe
        cap = np.where(pos, self.c_v, 0.0)
        U = self.c_v * tp
        return psi, psi_t, psi_tt, cap, U

    def ref_dpsi_dtheta(self, F, theta, J):
        self._require_positive(theta)
        return super().ref_dpsi_dtheta(F, theta, J)

    def ref_d2psi_dtheta2(self, F, theta, J):
        self._require_positive(theta)
        return super().ref_d2psi_dtheta2(F, theta, J)


# -- multi-well shape-memory model -----------------------------------------------


@dataclass(frozen=True)
class Well:
    """One phase: stress-free distortion ``F_ell`` with its moduli and heat capacity."""

    F: tuple
    K: float
    G: float
    c: float

    def __post_init__(self):
        object.__setattr__(self, "F", tuple(tuple(float(x) for x in row) for row in self.F))


@dataclass(frozen=True, kw_only=True)
class MultiWellSMA(FreeEnergyModel):
    """Soft minimum over neo-Hookean wells, ``-varkappa ln sum exp(-psi_ell/varkappa)``.

    Well ell uses ``K/2 (J-1)^2 + G |F F_ell^{-1}|^2 / J^(2/d)`` so that it is
    minimised on ``SO(d) F_ell`` and stays frame-indifferent.
    """

    wells: tuple = ()
    varkappa: float = 0.05
    theta_ref: float = 1.0
    alpha: float = 0.5

    model_id: ClassVar[str] = "multiwell_sma"
    _inv: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        wells = tuple(w if isinstance(w, Well) else Well(**w) for w in self.wells)
        object.__setattr__(self, "wells", wells)
        if not wells:
            raise ValueError("multiwell_sma needs at least one well")
        d = len(wells[0].F)
        object.__setattr__(self, "d", d)
        super().__post_init__()
        _check_positive(self, "varkappa", "theta_ref")
        _check_alpha(self.alpha, d)
        invs = []
        for ell, w in enumerate(wells):
            Fl = np.asarray(w.F, dtype=float)
            if Fl.shape != (d, d):
                raise ValueError(f"well {ell} has shape {Fl.shape}, expected {(d, d)}")
            Jl = tensor.det(Fl)
            if not Jl > 0.0:
                raise ValueError(f"well {ell}: det F_ell must be > 0")
            if ell >= 1 and abs(Jl - 1.0) > 1e-9:
                raise ValueError(f"well {ell}: martensite wells must be isochoric (det = 1)")
            if not (w.K >= 0 and w.G >= 0 and w.c > 0):
                raise ValueError(f"well {ell}: need K, G >= 0 and c > 0")
            invs.append(tensor.inverse(Fl))
        object.__setattr__(self, "_inv", tuple(invs))

    @property
    def alpha_growth(self):
        return self.alpha

    @property
    def theta_scale(self):
        return self.theta_ref

    def _wells(self, F, theta, J):
        """Per-well stored energy/derivative and thermal quantities, stacked on axis 0."""
        phi, dphi, th = [], [], []
        for w, A in zip(self.wells, self._inv):
            v, dv = _volumetric(F, J, w.K)
            s, ds = _shear(F, J, w.G, self.d, A)
            phi.append(v + s)
            dphi.append(dv + ds)
            th.append(_power_thermal(theta, w.c, self.theta_ref, self.alpha))
        phi, dphi = np.stack(phi), np.stack(dphi)
        th = [np.stack([t[i] for t in th]) for i in range(5)]
        return phi, dphi, th

    def _mix(self, F, theta, J):
        phi, dphi, (tpsi, tpsi_t, tpsi_tt, _, _) = self._wells(F, theta, J)
        psi_l = phi + tpsi
        m = psi_l.min(axis=0)
        z = np.exp(-(psi_l - m) / self.varkappa)
        S = z.sum(axis=0)
        w = z / S
        psi = m - self.varkappa * np.log(S)
        return psi, w, dphi, tpsi_t, tpsi_tt, psi_l

    def well_energies(self, F, theta):
        """Referential energies of the individual wells, shape ``(L+1, ...)``."""
        F, theta, J = self._prepare(F, theta)
        return self._mix(F, theta, J)[5]

    def ref_psi(self, F, theta, J):
        return self._mix(F, theta, J)[0]

    def ref_dpsi_dF(self, F, theta, J):
        _, w, dphi, *_ = self._mix(F, theta, J)
        return np.sum(w[..., None, None] * dphi, axis=0)

    def ref_dpsi_dtheta(self, F, theta, J):
        _, w, _, pt, _, _ = self._mix(F, theta, J)
        return np.sum(w * pt, axis=0)

    def _variance_t(self, w, pt):
        mean = np.sum(w * pt, axis=0)
        return np.sum(w * (pt - mean) ** 2, axis=0), mean

    def ref_d2psi_dtheta2(self, F, theta, J):
        _, w, _, pt, ptt, _ = self._mix(F, theta, J)
        var, _ = self._variance_t(w, pt)
        return np.sum(w * ptt, axis=0) - var / self.varkappa

    def ref_d2psi_dFdtheta(self, F, theta, J):
        _, w, dphi, pt, _, _ = self._mix(F, theta, J)
        mean = np.sum(w * pt, axis=0)
        dw = -(w / self.varkappa) * (pt - mean)
        return np.sum(dw[..., None, None] * dphi, axis=0)

    def ref_heat_capacity(self, F, theta, J):
        _, w, _, pt, _, _ = self._mix(F, theta, J)
        tp, pos = _pos(theta)
        caps = np.stack([_power_thermal(theta, wl.c, self.theta_ref, self.alpha)[3] for wl in self.wells])
        var, _ = self._variance_t(w, pt)
        return np.where(pos, np.sum(w * caps, axis=0) + tp * var / self.varkappa, 0.0)


def example_sma(d: int = 2, shear: float = 0.1, varkappa: float = 0.05, alpha: float = 0.3) -> MultiWellSMA:
    """Austenite at ``I`` plus two isochoric simple-shear martensite variants."""
    I = np.eye(d)
    A1, A2 = I.copy(), I.copy()
    A1[0, 1], A2[0, 1] = shear, -shear
    wells = (
        Well(F=I, K=1.0, G=1.0, c=1.0),
        Well(F=A1, K=1.0, G=0.8, c=0.8),
        Well(F=A2, K=1.0, G=0.8, c=0.8),
    )
    return MultiWellSMA(wells=wells, varkappa=varkappa, alpha=alpha)


MODELS: dict[str, type[FreeEnergyModel]] = {
    cls.model_id: cls
    for cls in (
        NeoHookeanPower,
        NeoHookeanLog,
        ThermalExpansion,
        BoundedHeatCapacity,
        MultiWellSMA,
        NonphysicalLog,
    )
}


def model_from_params(model_id: str, params: dict) -> FreeEnergyModel:
    try:
        cls = MODELS[model_id]
    except KeyError:
        raise ValueError(
            f"unknown model id {model_id!r}; valid ids: {', '.join(sorted(MODELS))}"
        ) from None
    return cls(**params)


def model_to_params(model: FreeEnergyModel) -> dict:
    params = asdict(model)
    params.pop("_inv", None)
    if isinstance(model, MultiWellSMA):
        params.pop("d")
        params["wells"] = [
            {"F": [list(r) for r in w.F], "K": w.K, "G": w.G, "c": w.c} for w in model.wells
        ]
    return params


# -- temperature recovery ---------------------------------------------------------


def invert_thermal_energy(model: FreeEnergyModel, F, u, *, theta_guess=None, max_iter: int = 200):
    """Modified inverse of ``theta -> U(F, theta)``.

    Returns the unique ``theta > 0`` with ``U(F, theta) = u`` where ``u > 0``
    and 0 where ``u <= 0``.  Safeguarded Newton inside a bisection bracket;
    Newton is used only where the heat capacity exceeds 1e-8, since it
    vanishes at zero temperature for most models.
    """
    F, u = _broadcast(F, u)
    if np.any(~np.isfinite(u)):
        raise InversionError("non-finite thermal energy", u=u)
    out = np.zeros(u.shape)
    active = np.flatnonzero(u.reshape(-1) > 0.0)
    if active.size == 0:
        return out
    d = F.shape[-1]
    Ff = F.reshape(-1, d, d)[active]
    uf = u.reshape(-1)[active]
    U = lambda th, idx: model.thermal_energy(Ff[idx], th)  # noqa: E731

    scale = model.theta_scale
    if theta_guess is not None:
        g = np.broadcast_to(np.asarray(theta_guess, dtype=float), u.shape).reshape(-1)[active]
        hi = np.where(g > 0.0, 1.25 * g, scale)
    else:
        hi = np.full(uf.shape, scale)
    lo = np.zeros_like(hi)
    all_idx = np.arange(uf.size)
    for _ in range(max_iter):
        need = U(hi, all_idx) < uf
        if not need.any():
            break
        lo = np.where(need, hi, lo)
        hi = np.where(need, 2.0 * hi, hi)
    else:
        raise InversionError("could not bracket thermal energy", lo=lo, hi=hi, u=uf)

    theta = hi.copy()
    todo = all_idx
    tol_u = 1e-12 * (1.0 + np.abs(uf))
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        th = theta[todo]
        r = U(th, todo) - uf[todo]
        lo[todo] = np.where(r < 0.0, th, lo[todo])
        hi[todo] = np.where(r > 0.0, th, hi[todo])
        c = model.heat_capacity(Ff[todo], th)
        newton = c > 1e-8
        trial = th - r / np.where(newton, c, 1.0)
        ok = newton & (trial >= lo[todo]) & (trial <= hi[todo])
        new = np.where(r == 0.0, th, np.where(ok, trial, 0.5 * (lo[todo] + hi[todo])))
        tiny = 4.0 * eps * np.maximum(th, 1e-300)
        done = (r == 0.0) | (hi[todo] - lo[todo] <= tiny)
        # quadratic convergence: a Newton correction this small is the error
        done |= ok & (np.abs(new - th) <= 1e-13 * th) & (np.abs(r) <= tol_u[todo])
        theta[todo] = new
        todo = todo[~done]
        if todo.size == 0:
            break
    else:
        resid = np.abs(U(theta[todo], todo) - uf[todo])
        if np.any(resid > tol_u[todo]):
            k = todo[np.argmax(resid - tol_u[todo])]
            raise InversionError(
                f"temperature inversion did not converge in {max_iter} iterations "
                f"(bracket [{lo[k]!r}, {hi[k]!r}], u={uf[k]!r})",
                lo=lo[k],
                hi=hi[k],
                u=uf[k],
            )
    out.reshape(-1)[active] = theta
    return out


# -- tabulation --------------------------------------------------------------------

TABULATE_HEADER = ("theta", "psi", "E", "eta", "c")


def tabulate(model: FreeEnergyModel, F, thetas) -> np.ndarray:
    """Rows ``(theta, psi, E, eta, c)`` at fixed ``F``; shape ``(n, 5)``."""
    thetas = np.asarray(thetas, dtype=float).reshape(-1)
    F = np.asarray(F, dtype=float)
    Fb = np.broadcast_to(F, (thetas.size, *F.shape))
    return np.column_stack(
        [
            thetas,
            model.psi(Fb, thetas),
            model.internal_energy(Fb, thetas),
            model.entropy(Fb, thetas),
            model.heat_capacity(Fb, thetas),
        ]
    )
