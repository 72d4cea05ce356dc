"""Command line: ``thermovisco {simulate,audit,tabulate,verify}``.

Exit codes: 0 success, 1 usage or config error, 2 audit or verification failure,
3 simulation blowup.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, load_config

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_BLOWUP = 0, 1, 2, 3

SNAPSHOT_FIELDS = ("rho", "v", "F", "e", "theta")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; ours is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_F(values) -> np.ndarray:
    if len(values) == 4:
        return np.array(values, dtype=float).reshape(2, 2)
    if len(values) == 9:
        return np.array(values, dtype=float).reshape(3, 3)
    raise ValueError(f"--F needs 4 (2x2) or 9 (3x3) row-major numbers, got {len(values)}")


def _parse_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--theta-range must be a:b:n, got {text!r}")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError("--theta-range needs n >= 1")
    return np.linspace(a, b, n)


def write_snapshots(out: Path, k: int, grid, state, theta) -> None:
    for name in SNAPSHOT_FIELDS:
        field = theta if name == "theta" else getattr(state, name)
        io.write_snapshot(out / f"snap_{k:04d}_{name}.bin", name, field, state.t)


def _write_run(out: Path, cfg, trajectory, ledger) -> None:
    from . import plotting
    from .config import dump_config
    from .diagnostics import balance_residuals
    from .solver import evaluate

    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.toml")
    sim = cfg.sim
    io.write_ledger(out / "ledger.csv", ledger)
    thetas = [evaluate(s, sim).theta for s in trajectory]
    for k, (state, theta) in enumerate(zip(trajectory, thetas)):
        write_snapshots(out, k, sim.grid, state, theta)
    io.write_slice_csv(out / "theta_slice.csv", sim.grid, thetas[-1])
    plotting.plot_energy_history(ledger, out / "energy.png")
    plotting.plot_fields(sim.grid, trajectory[-1], thetas[-1], out / "fields.png")
    if len(ledger) >= 2:
        res = balance_residuals(ledger, sim)
        io.write_residuals(out / "residuals.csv", res)
        plotting.plot_residuals(res, out / "residuals.png")


def cmd_simulate(args) -> int:
    from .solver import SimulationBlowup, run

    cfg = load_config(args.config, "simulate")
    out = Path(args.out)
    try:
        trajectory, ledger = run(cfg.sim)
    except SimulationBlowup as exc:
        print(f"simulation blowup: {exc}", file=sys.stderr)
        if exc.trajectory is not None:
            _write_run(out, cfg, exc.trajectory, exc.ledger)
        return EXIT_BLOWUP
    _write_run(out, cfg, trajectory, ledger)
    last = ledger.rows[-1]
    print(f"t = {last.t:.6g} after {len(ledger) - 1} steps; total energy {last.total:.10g}; output in {out}")
    return EXIT_OK


def cmd_audit(args) -> int:
    from dataclasses import replace

    from .auditor import audit

    cfg = load_config(args.config, "audit")
    spec = cfg.audit if args.seed is None else replace(cfg.audit, seed=args.seed)
    report = audit(cfg.model, spec)
    for rec in report.checks:
        status = "PASS" if rec.passed else "FAIL"
        print(f"{status} {rec.check_id}: measured {rec.measured_constant:.6g}")
    if args.out:
        io.write_report(args.out, report.to_json())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_tabulate(args) -> int:
    from .constitutive import TABULATE_HEADER, tabulate

    cfg = load_config(args.config, "tabulate")
    F = _parse_F(args.F)
    if F.shape[0] != cfg.model.d:
        raise ValueError(f"--F is {F.shape[0]}x{F.shape[0]} but the model has d = {cfg.model.d}")
    table = tabulate(cfg.model, F, _parse_range(args.theta_range))
    if args.out:
        from .plotting import plot_table

        path = Path(args.out)
        io.write_table(path, TABULATE_HEADER, table)
        plot_table(table, path.with_suffix(".png"), title=cfg.model.model_id)
    else:
        print(",".join(TABULATE_HEADER))
        for row in table:
            print(",".join(io.fmt(x) for x in row))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=args.quick, echo=print)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thermovisco", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a scenario and write ledger, residuals, snapshots, figures")
    s.add_argument("config")
    s.add_argument("--out", default="out", help="output directory (default: out)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("audit", help="audit a free-energy model against the structural hypotheses")
    a.add_argument("config")
    a.add_argument("--seed", type=int, default=None, help="overrides [audit].seed")
    a.add_argument("--out", default=None, help="write the JSON report here")
    a.set_defaults(func=cmd_audit)

    t = sub.add_parser("tabulate", help="tabulate psi, E, eta, c over temperature at fixed F")
    t.add_argument("config")
    t.add_argument("--F", nargs="+", type=float, required=True, metavar="X", help="row-major F (4 or 9 numbers)")
    t.add_argument("--theta-range", required=True, metavar="A:B:N")
    t.add_argument("--out", default=None, help="CSV path (a .png figure is written alongside); stdout if omitted")
    t.set_defaults(func=cmd_tabulate)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--quick", action="store_true", help="smaller grids and fewer steps")
    v.set_defaults(func=cmd_verify)
    return p


def _glue_range(argv):
    """Lets ``--theta-range -1:5:7`` through argparse (a leading '-' reads as a flag)."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--theta-range" and i + 1 < len(argv):
            out.append(f"--theta-range={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_range(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
