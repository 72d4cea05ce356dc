"""Sampling audit of the structural assumptions a free-energy model must satisfy.

Checks (ids are stable and appear in reports):

* ``stress_control``     sup |T| / (1 + E) is finite and does not grow when
  the determinant range is pushed towards zero;
* ``kirchhoff_control``  the same for the referential Kirchhoff stress;
* ``frame_indifference`` psi(QF, theta) = psi(F, theta) for random rotations;
* ``monotonicity``       dE/dtheta > 0 for theta > 0 (finite differences);
* ``third_law``          entropy vanishes at zero temperature;
* ``extension``          E(F, theta) = E(F, 0) and c = 0 for theta < 0;
* ``coercivity``         log-log slope of U(F, theta) at large theta lies in
  [1, 1 + alpha + 0.05].

A numerical audit cannot prove a supremum; "finite" is operationalized as
stability under extending the determinant range (factor 10).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor
from .constitutive import ConstitutiveDomainError, FreeEnergyModel

CHECK_IDS = (
    "stress_control",
    "kirchhoff_control",
    "frame_indifference",
    "monotonicity",
    "third_law",
    "extension",
    "coercivity",
)

FRAME_TOL = 1e-10
THIRD_LAW_TOL = 1e-12
GROWTH_FACTOR = 10.0
FD_REL_STEP = 1e-6
SLOPE_TOL = 1e-9  # round-off allowance on the fitted exponent


@dataclass(frozen=True)
class AuditSpec:
    detF_range: tuple[float, float] = (0.05, 20.0)
    anisotropy_range: tuple[float, float] = (1.0, 5.0)
    theta_range: tuple[float, float] = (1e-3, 10.0)
    n_samples: int = 10_000
    seed: int = 0
    checks: tuple[str, ...] = CHECK_IDS
    control_detF: tuple[float, float] = (0.1, 1e-3)  # reference and extended determinant

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        lo, hi = self.detF_range
        if not 0 < lo <= hi:
            raise ValueError(f"detF_range must satisfy 0 < lo <= hi, got {self.detF_range}")
        a, b = self.anisotropy_range
        if not 1 <= a <= b:
            raise ValueError(f"anisotropy_range must satisfy 1 <= lo <= hi, got {self.anisotropy_range}")
        t0, t1 = self.theta_range
        if not 0 < t0 <= t1:
            raise ValueError(f"theta_range must satisfy 0 < lo <= hi, got {self.theta_range}")
        unknown = set(self.checks) - set(CHECK_IDS)
        if unknown:
            raise ValueError(f"unknown checks {sorted(unknown)}; valid: {', '.join(CHECK_IDS)}")
        if not all(x > 0 for x in self.control_detF):
            raise ValueError("control_detF entries must be > 0")


@dataclass
class CheckRecord:
    check_id: str
    passed: bool
    measured_constant: float
    witness: dict
    samples_used: int
    detail: str = ""


@dataclass
class AuditReport:
    model_id: str
    spec: dict
    checks: list[CheckRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, check_id: str) -> CheckRecord:
        for c in self.checks:
            if c.check_id == check_id:
                return c
        raise KeyError(check_id)

    def failed_ids(self) -> list[str]:
        return [c.check_id for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "passed": self.passed,
            "spec": self.spec,
            "checks": [asdict(c) for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


# -- sampling --------------------------------------------------------------------


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=size))


def sample_F(rng: np.random.Generator, n: int, d: int, detF, anisotropy_range) -> np.ndarray:
    """``F = Q1 diag(s) Q2^T`` with ``prod(s) = detF`` and log-uniform anisotropy.

    In 2-D the singular-value ratio lies in ``anisotropy_range``; in 3-D two
    stretch factors are drawn from it and the third is their reciprocal product.
    """
    detF = np.broadcast_to(np.asarray(detF, dtype=float), (n,))
    a_lo, a_hi = anisotropy_range
    if d == 2:
        a = _log_uniform(rng, a_lo, a_hi, n) if a_hi > a_lo else np.full(n, a_lo)
        s = np.stack([np.sqrt(detF * a), np.sqrt(detF / a)], axis=-1)
    else:
        a = _log_uniform(rng, a_lo, a_hi, (n, 2)) if a_hi > a_lo else np.full((n, 2), a_lo)
        base = np.stack([a[:, 0], a[:, 1], 1.0 / (a[:, 0] * a[:, 1])], axis=-1)
        s = base * np.cbrt(detF)[:, None]
    Q1 = tensor.random_rotations(rng, n, d)
    Q2 = tensor.random_rotations(rng, n, d)
    D = np.zeros((n, d, d))
    idx = np.arange(d)
    D[:, idx, idx] = s
    return Q1 @ D @ tensor.transpose(Q2)


def sample_theta(rng: np.random.Generator, n: int, theta_range, theta_scale: float) -> np.ndarray:
    """Log-uniform positive temperatures plus explicit zero and negative samples."""
    lo, hi = theta_range
    theta = _log_uniform(rng, lo * theta_scale, hi * theta_scale, n)
    kind = rng.uniform(size=n)
    theta = np.where(kind < 0.1, -rng.uniform(0.0, hi * theta_scale, n), theta)
    theta = np.where((kind >= 0.1) & (kind < 0.15), 0.0, theta)
    return theta


def _samples(model, spec: AuditSpec, rng):
    n, d = spec.n_samples, model.d
    detF = _log_uniform(rng, *spec.detF_range, n)
    F = sample_F(rng, n, d, detF, spec.anisotropy_range)
    theta = sample_theta(rng, n, spec.theta_range, model.theta_scale)
    return F, theta


def _witness(F, theta, **extra) -> dict:
    w = {"F": np.asarray(F, dtype=float).tolist(), "theta": float(theta)}
    w.update(extra)
    return w


# -- pointwise measures (also used to re-evaluate witnesses) -------------------------


def stress_ratio(model, F, theta):
    T = model.cauchy_stress(F, theta)
    return tensor.frobenius(T) / (1.0 + model.internal_energy(F, theta))


def kirchhoff_ratio(model, F, theta):
    K = model.kirchhoff_stress(F, theta)
    return tensor.frobenius(K) / (1.0 + model.referential_internal_energy(F, theta))


def frame_defect(model, F, theta, Q):
    psi = model.psi(F, theta)
    return np.abs(model.psi(Q @ F, theta) - psi) / (1.0 + np.abs(psi))


def energy_slope(model, F, theta):
    h = FD_REL_STEP * np.maximum(np.abs(theta), 1e-300)
    h = np.minimum(h, 0.5 * np.abs(theta))
    return (model.internal_energy(F, theta + h) - model.internal_energy(F, theta - h)) / (2.0 * h)


def extension_defect(model, F, theta):
    dE = np.abs(model.internal_energy(F, theta) - model.internal_energy(F, np.zeros_like(theta)))
    return np.maximum(dE, np.abs(model.heat_capacity(F, theta)))


def coercivity_slope(model, F, n_theta: int = 32) -> float:
    """Least-squares slope of ``log U`` against ``log theta`` on [10, 1000] theta_ref."""
    ref = getattr(model, "theta_ref", model.theta_scale)
    th = np.geomspace(10.0 * ref, 1000.0 * ref, n_theta)
    U = model.thermal_energy(np.broadcast_to(F, (n_theta, *np.shape(F))), th)
    return float(np.polyfit(np.log(th), np.log(U), 1)[0])


def witness_value(model: FreeEnergyModel, record: CheckRecord) -> float:
    """Re-evaluate a check's measured constant at its stored witness."""
    w = record.witness
    F = np.asarray(w["F"], dtype=float)
    theta = float(w["theta"])
    cid = record.check_id
    if cid == "stress_control":
        return float(stress_ratio(model, F, theta))
    if cid == "kirchhoff_control":
        return float(kirchhoff_ratio(model, F, theta))
    if cid == "frame_indifference":
        return float(frame_defect(model, F, theta, np.asarray(w["Q"], dtype=float)))
    if cid == "monotonicity":
        return float(energy_slope(model, F, theta))
    if cid == "third_law":
        return float(np.abs(model.entropy(F, theta)))
    if cid == "extension":
        return float(extension_defect(model, F, theta))
    if cid == "coercivity":
        return coercivity_slope(model, F)
    raise KeyError(cid)


# -- individual checks ---------------------------------------------------------------


def _first_failure(fn, F, theta):
    """Index and message of the first sample on which ``fn`` raises."""
    for i in range(len(theta)):
        try:
            fn(F[i], theta[i])
        except (ConstitutiveDomainError, ValueError, FloatingPointError) as exc:
            return i, str(exc)
    return 0, "evaluation failed"


def _guarded(check_id, fn, F, theta):
    """Vectorized evaluation; domain errors become a failing record with a witness."""
    try:
        return fn(F, theta), None
    except (ConstitutiveDomainError, ValueError, FloatingPointError) as exc:
        i, msg = _first_failure(fn, F, theta)
        rec = CheckRecord(check_id, False, float("nan"), _witness(F[i], theta[i]), len(theta), f"domain error: {msg or exc}")
        return None, rec


def estimate_stress_control_constant(
    model: FreeEnergyModel,
    detF_grid,
    *,
    n: int = 2000,
    seed: int = 0,
    anisotropy_range=(1.0, 5.0),
    theta_range=(1e-3, 10.0),
    kirchhoff: bool = False,
):
    """``[(detF, sup ratio)]`` from a randomized shear / temperature sweep at each determinant."""
    out = []
    ratio = kirchhoff_ratio if kirchhoff else stress_ratio
    for k, J in enumerate(detF_grid):
        if not J > 0:
            raise ValueError(f"detF_grid entries must be > 0, got {J}")
        rng = np.random.default_rng([seed, k])
        F = sample_F(rng, n, model.d, J, anisotropy_range)
        theta = sample_theta(rng, n, theta_range, model.theta_scale)
        out.append((float(J), float(np.max(ratio(model, F, theta)))))
    return out


def _control_check(check_id, model, spec, F, theta, kirchhoff):
    ratio = kirchhoff_ratio if kirchhoff else stress_ratio
    vals, failed = _guarded(check_id, lambda f, t: ratio(model, f, t), F, theta)
    if failed:
        return failed
    i = int(np.argmax(vals))
    (J_ref, s_ref), (J_ext, s_ext) = estimate_stress_control_constant(
        model,
        spec.control_detF,
        n=max(200, spec.n_samples // 10),
        seed=spec.seed,
        anisotropy_range=spec.anisotropy_range,
        theta_range=spec.theta_range,
        kirchhoff=kirchhoff,
    )
    finite = np.all(np.isfinite(vals)) and np.isfinite(s_ref) and np.isfinite(s_ext)
    stable = s_ext <= GROWTH_FACTOR * max(s_ref, 1e-300) or s_ext <= 1e-12
    detail = f"sup at detF={J_ref:g}: {s_ref:.6g}; at detF={J_ext:g}: {s_ext:.6g}"
    return CheckRecord(check_id, bool(finite and stable), float(vals[i]), _witness(F[i], theta[i]), len(theta), detail)


def _frame_check(model, spec, F, theta, rng):
    Q = tensor.random_rotations(rng, len(theta), model.d)
    vals, failed = _guarded("frame_indifference", lambda f, t: frame_defect(model, f, t, Q), F, theta)
    if failed:
        return failed
    i = int(np.argmax(vals))
    return CheckRecord(
        "frame_indifference",
        bool(vals[i] < FRAME_TOL),
        float(vals[i]),
        _witness(F[i], theta[i], Q=Q[i].tolist()),
        len(theta),
        f"tolerance {FRAME_TOL:g} relative",
    )


def _monotonicity_check(model, F, theta):
    pos = theta > 0
    Fp, tp = F[pos], theta[pos]
    vals, failed = _guarded("monotonicity", lambda f, t: energy_slope(model, f, t), Fp, tp)
    if failed:
        return failed
    i = int(np.argmin(vals))
    return CheckRecord("monotonicity", bool(vals[i] > 0), float(vals[i]), _witness(Fp[i], tp[i]), len(tp), "min dE/dtheta over theta > 0")


def _third_law_check(model, F):
    n = len(F)
    zero = np.zeros(n)
    try:
        eta = np.abs(model.entropy(F, zero))
        probe = 0.0
        note = "max |eta(F, 0)|"
    except ConstitutiveDomainError:
        # undefined at zero: report how it behaves just above
        probe = 1e-12 * model.theta_scale
        eta = np.abs(model.entropy(F, np.full(n, probe)))
        note = f"entropy undefined at theta = 0; |eta| at theta = {probe:g}"
    i = int(np.argmax(eta))
    ok = bool(probe == 0.0 and eta[i] < THIRD_LAW_TOL)
    return CheckRecord("third_law", ok, float(eta[i]), _witness(F[i], probe), n, note)


def _extension_check(model, F, theta):
    neg = theta < 0
    Fn, tn = F[neg], theta[neg]
    if tn.size == 0:
        return CheckRecord("extension", True, 0.0, _witness(F[0], -1.0), 0, "no negative samples")
    vals, failed = _guarded("extension", lambda f, t: extension_defect(model, f, t), Fn, tn)
    if failed:
        return failed
    i = int(np.argmax(vals))
    return CheckRecord("extension", bool(vals[i] == 0.0), float(vals[i]), _witness(Fn[i], tn[i]), len(tn), "max of |E - E(F,0)| and |c| for theta < 0")


def _coercivity_check(model, F):
    m = min(len(F), 64)
    alpha = float(getattr(model, "alpha_growth", 0.0))
    hi = 1.0 + alpha + 0.05
    slopes = np.array([coercivity_slope(model, F[i]) for i in range(m)])
    bad = np.maximum(1.0 - slopes, slopes - hi)
    i = int(np.argmax(bad))
    return CheckRecord(
        "coercivity",
        bool(bad[i] <= SLOPE_TOL),
        float(slopes[i]),
        _witness(F[i], 1000.0 * getattr(model, "theta_ref", model.theta_scale)),
        m,
        f"allowed slope range [1, {hi:g}]",
    )


def audit(model: FreeEnergyModel, spec: AuditSpec | None = None) -> AuditReport:
    spec = AuditSpec() if spec is None else spec
    rng = np.random.default_rng(spec.seed)
    F, theta = _samples(model, spec, rng)
    frame_rng = np.random.default_rng([spec.seed, 1])
    runners = {
        "stress_control": lambda: _control_check("stress_control", model, spec, F, theta, False),
        "kirchhoff_control": lambda: _control_check("kirchhoff_control", model, spec, F, theta, True),
        "frame_indifference": lambda: _frame_check(model, spec, F, theta, frame_rng),
        "monotonicity": lambda: _monotonicity_check(model, F, theta),
        "third_law": lambda: _third_law_check(model, F),
        "extension": lambda: _extension_check(model, F, theta),
        "coercivity": lambda: _coercivity_check(model, F),
    }
    spec_dict = asdict(spec)
    report = AuditReport(model.model_id, spec_dict)
    with np.errstate(all="raise", under="ignore"):
        for cid in CHECK_IDS:
            if cid in spec.checks:
                report.checks.append(runners[cid]())
    return report
