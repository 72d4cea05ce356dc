"""The acceptance suite: twelve property- and oracle-based criteria.

``run_all()`` returns one :class:`CriterionResult` per criterion; ``quick=True``
shrinks grids and step counts for a fast smoke pass (tolerances unchanged).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import constitutive as C
from . import tensor
from .auditor import AuditSpec, audit
from .diagnostics import balance_residuals, cumulative
from .grid import Grid
from .solver import DtPolicy, Scenario, SimConfig, initial_state, run, stable_dt


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} [{self.number:2d}] {self.name}: {self.summary} ({self.seconds:.1f} s)"


# -- model catalogue -------------------------------------------------------------------


def catalogue_models(include_3d: bool = True) -> list:
    """Every built-in model at default parameters, plus 3-D variants."""
    models = [
        C.NeoHookeanPower(),
        C.NeoHookeanLog(),
        C.ThermalExpansion(),
        C.BoundedHeatCapacity(),
        C.example_sma(),
        C.NonphysicalLog(),
    ]
    if include_3d:
        models += [C.NeoHookeanPower(d=3, alpha=0.3), C.example_sma(d=3)]
    return models


def random_F(rng, n, d, det_range=(0.3, 3.0)):
    """Random deformation gradients with log-uniform determinant in ``det_range``."""
    A = np.eye(d) + 0.3 * rng.standard_normal((n, d, d))
    J = tensor.det(A)
    A[J < 0, 0, :] *= -1.0
    J = np.abs(J)
    target = np.exp(rng.uniform(np.log(det_range[0]), np.log(det_range[1]), n))
    return A * ((target / J) ** (1.0 / d))[:, None, None]


# -- criterion 1: finite-difference derivative suite ------------------------------------


def _fd_F(fun, F, theta, h):
    d = F.shape[-1]
    out = np.zeros(F.shape)
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d))
            E[i, j] = h
            out[..., i, j] = (fun(F + E, theta) - fun(F - E, theta)) / (2.0 * h)
    return out


def _rel(a, b, rank=0):
    a, b = np.asarray(a), np.asarray(b)
    axes = tuple(range(a.ndim - rank, a.ndim))
    diff = np.sqrt(np.sum((a - b) ** 2, axis=axes)) if rank else np.abs(a - b)
    ref = np.sqrt(np.sum(b * b, axis=axes)) if rank else np.abs(b)
    return diff / np.maximum(ref, 1.0)


def derivative_errors(model, F, theta, h: float = 1e-6) -> dict:
    """Max relative deviation of each analytic derivative from central differences.

    The relative error uses ``max(|reference|, 1)`` as denominator, i.e. it is
    absolute for quantities below the unit material scale.
    """
    errs = {}
    P_fd = _fd_F(model.psi, F, theta, h)
    errs["dpsi_dF"] = _rel(model.dpsi_dF(F, theta), P_fd, 2).max()
    psi = model.psi(F, theta)
    T_fd = P_fd @ tensor.transpose(F) + psi[..., None, None] * np.eye(F.shape[-1])
    T = model.cauchy_stress(F, theta)
    errs["cauchy_stress"] = _rel(T, T_fd, 2).max()
    errs["stress_symmetry"] = (tensor.frobenius(T - tensor.transpose(T)) / (1 + tensor.frobenius(T))).max()

    # theta-derivatives away from the kink at 0 (and, for log models, from theta <= 0)
    mask = np.abs(theta) > 2 * h
    if isinstance(model, C.NonphysicalLog):
        mask &= theta > 2 * h
    Fm, tm = F[mask], theta[mask]
    s_fd = (model.psi(Fm, tm + h) - model.psi(Fm, tm - h)) / (2 * h)
    errs["dpsi_dtheta"] = _rel(model.dpsi_dtheta(Fm, tm), s_fd).max()
    errs["entropy"] = _rel(model.entropy(Fm, tm), -s_fd).max()
    st_fd = (model.dpsi_dtheta(Fm, tm + h) - model.dpsi_dtheta(Fm, tm - h)) / (2 * h)
    errs["d2psi_dtheta2"] = _rel(model.d2psi_dtheta2(Fm, tm), st_fd).max()
    errs["heat_capacity"] = _rel(model.heat_capacity(Fm, tm), -np.maximum(tm, 0) * st_fd).max()
    dE_fd = (model.internal_energy(Fm, tm + h) - model.internal_energy(Fm, tm - h)) / (2 * h)
    errs["dE_dtheta"] = _rel(model.heat_capacity(Fm, tm), dE_fd).max()
    errs["d2psi_dFdtheta"] = _rel(model.d2psi_dFdtheta(Fm, tm), _fd_F(model.dpsi_dtheta, Fm, tm, h), 2).max()
    gibbs = model.psi(Fm, tm) + tm * model.entropy(Fm, tm)
    E = model.internal_energy(Fm, tm)
    errs["gibbs"] = (np.abs(E - gibbs) / np.maximum(np.abs(E), 1.0)).max()
    return errs


def criterion_1(quick=False, ctx=None):
    rng = np.random.default_rng(1)
    n = 1000
    worst, where = 0.0, ""
    for model in catalogue_models():
        F = random_F(rng, n, model.d)
        theta = rng.uniform(-1.0, 5.0, n)
        for key, err in derivative_errors(model, F, theta).items():
            if err > worst:
                worst, where = err, f"{model.model_id}(d={model.d}).{key}"
    return worst <= 1e-5, f"max relative error {worst:.2e} at {where} over {n} points per model (tol 1e-5)"


# -- criterion 2: assumption audit -------------------------------------------------------


def criterion_2(quick=False, ctx=None):
    spec = AuditSpec(n_samples=2000 if quick else 10_000)
    ok, parts = True, []
    for model in catalogue_models(include_3d=False):
        rep = audit(model, spec)
        failed = rep.failed_ids()
        expected = ["third_law"] if isinstance(model, C.NonphysicalLog) else []
        ok &= failed == expected
        parts.append(f"{model.model_id}:{','.join(failed) or 'ok'}")
    return ok, "; ".join(parts)


# -- criterion 3: inversion round trip ------------------------------------------------


def criterion_3(quick=False, ctx=None):
    rng = np.random.default_rng(3)
    worst, ok_neg = 0.0, True
    for model in catalogue_models():
        ref = getattr(model, "theta_ref", model.theta_scale)
        theta = np.concatenate([[0.0], np.linspace(0.0, 100.0 * ref, 400), 100.0 * ref * rng.uniform(size=400)])
        F = random_F(rng, theta.size, model.d)
        u = model.thermal_energy(F, theta)
        back = C.invert_thermal_energy(model, F, u)
        worst = max(worst, float(np.max(np.abs(back - theta))))
        neg = C.invert_thermal_energy(model, F[:50], -rng.uniform(0.0, 10.0, 50))
        ok_neg &= bool(np.all(neg == 0.0))
    return worst <= 1e-10 and ok_neg, f"max |theta - inverse(U(theta))| = {worst:.2e} (tol 1e-10); u < 0 -> 0 exactly: {ok_neg}"


# -- shared simulation runs -------------------------------------------------------------


def shear_config(quick=False) -> SimConfig:
    n = 32 if quick else 64
    return SimConfig(
        model=C.NeoHookeanPower(K_e=1.0, G_e=0.005, c_v=1.0, alpha=0.5),
        nu1=0.05,
        nu2=1e-8,
        kappa0=0.01,
        grid=Grid(n, n),
        scenario=Scenario(id="shear-decay", amplitude=0.1, mode=2, theta0=1.0),
        t_end=0.8,
    )


def _with_steps(cfg: SimConfig, n_steps: int) -> SimConfig:
    return replace(cfg, dt_policy=replace(cfg.dt_policy, dt_fixed=cfg.t_end / n_steps))


def _base_steps(cfg: SimConfig) -> int:
    s0 = initial_state(cfg.scenario, cfg.grid, cfg.model, cfg.epsilon)
    return int(math.ceil(cfg.t_end / stable_dt(s0, cfg) / 50.0) * 50)


def _shear_runs(ctx: dict, quick: bool):
    if "shear" not in ctx:
        t0 = time.perf_counter()
        cfg = shear_config(quick)
        # the fine run doubles as the 1000-step mass-conservation run
        n = _base_steps(cfg) if quick else max(_base_steps(cfg), 500)
        coarse = run(_with_steps(cfg, n))
        fine = run(_with_steps(cfg, 2 * n))
        ctx["shear"] = (cfg, n, coarse, fine)
        ctx["shear_seconds"] = time.perf_counter() - t0
    return ctx["shear"]


def _rel_drift(ledger):
    tot = ledger.column("total")
    return abs(tot[-1] - tot[0]) / abs(tot[0])


def criterion_4(quick=False, ctx=None):
    cfg, n, _, (traj, ledger) = _shear_runs(ctx, quick)
    mass = ledger.column("mass")
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    steps = len(ledger) - 1
    return drift < 1e-12 and (steps >= 1000 or quick), f"relative mass drift {drift:.2e} over {steps} steps on {cfg.grid.nx}^2 (tol 1e-12)"


def criterion_5(quick=False, ctx=None):
    cfg, n, (_, coarse), (_, fine) = _shear_runs(ctx, quick)
    d1, d2 = _rel_drift(coarse), _rel_drift(fine)
    ke = coarse.column("kinetic")
    decay = 1.0 - ke[-1] / ke[0]
    ratio = d1 / d2 if d2 > 0 else math.inf
    ok = d1 < 1e-6 and ratio >= 8.0 and decay >= 0.9
    return ok, f"drift {d1:.2e} (dt) / {d2:.2e} (dt/2), ratio {ratio:.1f} (>= 8); kinetic decay {100 * decay:.2f}%"


def criterion_6(quick=False, ctx=None):
    cfg, n, (_, ledger), _ = _shear_runs(ctx, quick)
    res = balance_residuals(ledger, cfg)
    S = ledger.column("entropy_total")
    scale = float(np.max(np.abs(S)))
    viol = float(np.max(res["entropy_violation"]))
    active = ledger.column("dissipation_rate")[:-1] > 0
    increasing = bool(np.all(np.diff(S)[active] > 0))
    min_theta = float(np.min(ledger.column("min_theta")))
    ok = viol <= 1e-10 * scale and increasing and min_theta > 0
    return ok, f"max entropy violation {viol:.2e} (tol {1e-10 * scale:.2e}); strictly increasing: {increasing}; min theta {min_theta:.3f}"


def criterion_7(quick=False, ctx=None):
    cfg, n, (_, ref_ledger), _ = _shear_runs(ctx, quick)
    reg = replace(_with_steps(cfg, n), epsilon=0.5)
    _, ledger = run(reg)
    res = balance_residuals(ledger, reg)
    t = ledger.column("t")
    cum = cumulative(t, res["total_residual"])
    tot = ledger.column("total")
    scale = abs(tot[0])
    worst = float(np.max(cum))
    below_ref = tot[-1] < ref_ledger.column("total")[-1]
    lost = tot[-1] - tot[0]
    ok = worst <= 1e-8 * scale and below_ref and lost < 0
    return ok, (
        f"max cumulative total residual {worst:.2e} (tol {1e-8 * scale:.2e}); energy change {lost:.3e}; "
        f"final total below eps=0 run: {bool(below_ref)}"
    )


# -- criteria 8, 9: refinement ladder ----------------------------------------------------


def pulse_config(n: int) -> SimConfig:
    return SimConfig(
        model=C.NeoHookeanPower(K_e=1.0, G_e=0.3, c_v=1.0, alpha=0.5),
        nu1=0.01,
        nu2=1e-8,
        kappa0=0.01,
        grid=Grid(n, n),
        scenario=Scenario(id="compression-pulse", amplitude=0.05, theta0=1.0),
        t_end=0.2,
        dt_policy=DtPolicy(dt_fixed=0.002 * 32 / n),
    )


def _ladder(ctx: dict, quick: bool):
    if "ladder" not in ctx:
        sizes = (16, 32, 64) if quick else (32, 64, 128)
        out = []
        for n in sizes:
            cfg = pulse_config(n)
            traj, ledger = run(cfg)
            res = balance_residuals(ledger, cfg)
            last = traj[-1]
            dens = float(np.max(np.abs(last.rho - cfg.scenario.rho_R / tensor.det(last.F))))
            out.append((n, float(np.max(np.abs(res["mechanical_residual"]))), dens))
        ctx["ladder"] = out
    return ctx["ladder"]


def _order_summary(values):
    ratios = [values[i] / values[i + 1] for i in range(len(values) - 1)]
    return ratios, all(r >= 3.5 for r in ratios)


def criterion_8(quick=False, ctx=None):
    ladder = _ladder(ctx, quick)
    errs = [m for _, m, _ in ladder]
    ratios, ok = _order_summary(errs)
    sizes = "->".join(str(n) for n, _, _ in ladder)
    return ok, f"max |mechanical residual| {', '.join(f'{e:.2e}' for e in errs)} on {sizes}; ratios {', '.join(f'{r:.2f}' for r in ratios)} (>= 3.5)"


def criterion_9(quick=False, ctx=None):
    ladder = _ladder(ctx, quick)
    errs = [d for _, _, d in ladder]
    ratios, ok = _order_summary(errs)
    return ok, f"max |rho - rho_R/det F| {', '.join(f'{e:.2e}' for e in errs)}; ratios {', '.join(f'{r:.2f}' for r in ratios)} (>= 3.5)"


# -- criterion 10: dissipative heating ----------------------------------------------


def hotspot_config(quick=False) -> SimConfig:
    n = 32 if quick else 64
    return SimConfig(
        model=C.NeoHookeanPower(K_e=1.0, G_e=0.3, c_v=1.0, alpha=0.5),
        nu1=0.05,
        nu2=1e-8,
        kappa0=0.01,
        grid=Grid(n, n),
        scenario=Scenario(id="quiescent-hotspot", theta0=1.0, bump_amplitude=0.5, bump_width=0.1),
        t_end=0.5,
    )


def criterion_10(quick=False, ctx=None):
    cfg = hotspot_config(quick)
    peaks, speeds = [], []

    def watch(state, ledger):
        peaks.append(float(np.max(state.theta)))
        speeds.append(float(np.max(np.abs(state.v))))

    _, ledger = run(cfg, on_step=watch)
    internal = ledger.column("internal")
    e_drift = float(abs(internal[-1] - internal[0]) / abs(internal[0]))
    monotone = bool(np.all(np.diff(peaks) <= 0) and peaks[-1] < peaks[0])
    still = max(speeds) == 0.0

    _, _, (_, shear), _ = _shear_runs(ctx, quick)
    dE = shear.column("internal")[-1] - shear.column("internal")[0]
    dK = shear.column("kinetic")[0] - shear.column("kinetic")[-1]
    match = float(abs(dE - dK) / abs(dK))
    ok = monotone and still and e_drift < 1e-6 and match <= 1e-6
    return ok, (
        f"hotspot: max theta {peaks[0]:.4f} -> {peaks[-1]:.4f} monotone={monotone}, v stays 0: {still}, "
        f"internal drift {e_drift:.2e}; shear: internal gain vs kinetic loss mismatch {match:.2e} (tol 1e-6)"
    )


# -- criterion 11: closed-form thermal curves ---------------------------------------


def thermal_curves(theta):
    """Closed-form (psi, E, c) for the thermal parts with c_v = 1 and no stored energy."""
    tp = np.maximum(theta, 0.0)
    curves = {}
    for a in (0.05, 0.2):
        curves[f"power alpha={a}"] = (
            -(tp ** (1 + a)) / (a * (1 + a)),
            tp ** (1 + a) / (1 + a),
            tp**a,
        )
    r = 0.2
    curves["bounded theta_r=0.2"] = (
        r * np.log(r) - (tp + r) * np.log(tp + r) + tp * (1 + np.log(r)),
        tp - r * np.log1p(tp / r),
        tp / (tp + r),
    )
    return curves


def thermal_only_models():
    return {
        "power alpha=0.05": C.NeoHookeanPower(K_e=0.0, G_e=0.0, c_v=1.0, theta_ref=1.0, alpha=0.05),
        "power alpha=0.2": C.NeoHookeanPower(K_e=0.0, G_e=0.0, c_v=1.0, theta_ref=1.0, alpha=0.2),
        "bounded theta_r=0.2": C.BoundedHeatCapacity(K_e=0.0, G_e=0.0, c_v=1.0, theta_r=0.2),
    }


def criterion_11(quick=False, ctx=None):
    theta = np.linspace(-1.0, 5.0, 601)
    curves = thermal_curves(theta)
    worst = 0.0
    for name, model in thermal_only_models().items():
        table = C.tabulate(model, np.eye(2), theta)
        psi, E, c = curves[name]
        worst = max(worst, *(float(np.max(np.abs(table[:, k] - ref))) for k, ref in ((1, psi), (2, E), (4, c))))
    return worst <= 1e-12, f"max pointwise deviation of psi, E, c from closed forms {worst:.2e} (tol 1e-12)"


# -- criterion 12: grid operators ------------------------------------------------------


def grid_operator_errors(n: int):
    g = Grid(n, n, 1.0, 2.0)
    X, Y = g.coords()
    kx, ky = 2 * np.pi / g.Lx, 2 * np.pi / g.Ly
    s = np.sin(kx * X) * np.cos(ky * Y)
    grad_exact = np.stack([kx * np.cos(kx * X) * np.cos(ky * Y), -ky * np.sin(kx * X) * np.sin(ky * Y)], -1)
    w = np.stack([np.sin(kx * X), np.cos(ky * Y)], -1)
    div_exact = kx * np.cos(kx * X) - ky * np.sin(ky * Y)
    lap_exact = -(kx**2 + ky**2) * s
    return (
        float(np.max(np.abs(g.grad(s) - grad_exact))),
        float(np.max(np.abs(g.div(w) - div_exact))),
        float(np.max(np.abs(g.laplacian(s) - lap_exact))),
    )


def sbp_defect(rng, n: int = 32) -> float:
    g = Grid(n, n + 4, 1.3, 0.7)
    s = rng.standard_normal(g.shape)
    w = rng.standard_normal(g.shape + (2,))
    lhs = g.integrate(np.sum(g.grad(s) * w, axis=-1))
    rhs = -g.integrate(s * g.div(w))
    scale = g.integrate(np.abs(s)) * np.max(np.abs(w)) / min(g.dx, g.dy)
    return float(abs(lhs - rhs) / scale)


def criterion_12(quick=False, ctx=None):
    rng = np.random.default_rng(12)
    sbp = max(sbp_defect(rng) for _ in range(5))
    errs = [grid_operator_errors(n) for n in (32, 64, 128)]
    ratios = [e0 / e1 for a, b in zip(errs, errs[1:]) for e0, e1 in zip(a, b)]
    ok = sbp <= 1e-12 and all(3.5 <= r <= 4.5 for r in ratios)
    return ok, f"SBP defect {sbp:.1e} (tol 1e-12); grad/div/laplacian ratios {', '.join(f'{r:.3f}' for r in ratios)} (4 +- 0.5)"


CRITERIA = {
    1: ("constitutive derivative suite", criterion_1, 10.0),
    2: ("assumption audit", criterion_2, 30.0),
    3: ("inversion round trip", criterion_3, None),
    4: ("mass conservation", criterion_4, None),
    5: ("first law, energy drift", criterion_5, 300.0),
    6: ("second law, entropy growth", criterion_6, None),
    7: ("regularization inequality", criterion_7, None),
    8: ("mechanical-energy balance order", criterion_8, None),
    9: ("density consistency order", criterion_9, None),
    10: ("dissipative heating", criterion_10, None),
    11: ("closed-form thermal curves", criterion_11, None),
    12: ("grid operator suite", criterion_12, 5.0),
}


def run_criterion(number: int, quick: bool = False, ctx: dict | None = None) -> CriterionResult:
    ctx = {} if ctx is None else ctx
    name, fn, budget = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        ok, summary = fn(quick, ctx)
    except Exception as exc:  # a crash is a failure, reported not raised
        ok, summary = False, f"error: {type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - t0
    if number == 5:
        # the budget covers both dt levels of the shared run
        elapsed = ctx.get("shear_seconds", elapsed)
    if budget is not None and elapsed > budget:
        ok = False
        summary += f"; runtime {elapsed:.1f} s exceeds {budget:.0f} s"
    return CriterionResult(number, name, bool(ok), summary, elapsed)


def run_all(quick: bool = False, only=None, echo=None) -> list[CriterionResult]:
    ctx: dict = {}
    out = []
    for number in sorted(CRITERIA):
        if only is not None and number not in only:
            continue
        res = run_criterion(number, quick, ctx)
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out
