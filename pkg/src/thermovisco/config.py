"""TOML configuration: parsing with key/line diagnostics and exact serialization.

Sections and keys (SI units)::

    [material]   id, then the model parameters (K_e, G_e [Pa], c_v [Pa/K],
                 theta_ref, theta_r [K], alpha, beta [1/K], K_0 [Pa],
                 varkappa [Pa], wells = [{F, K, G, c}, ...])
    [viscosity]  nu1 [Pa s], nu2 [Pa s^(p-1) m^(2p-2)], p
    [thermal]    kappa0 [W/(m K)], epsilon
    [domain]     nx, ny, Lx [m], Ly [m]
    [scenario]   id, amplitude, theta0 [K], rho_R [kg/m^3], bump_amplitude [K],
                 bump_width [m], mode
    [time]       t_end [s], dump_every [s], cfl_advect, cfl_visc, cfl_hyper,
                 cfl_thermal, c_floor [Pa/K], hyper_floor, dt_fixed [s]
    [forcing]    gravity [m/s^2, two numbers], heat_source (none|uniform|gaussian),
                 heat_amplitude [W/m^3], heat_width [m], k_damp [s]
    [audit]      detF_range, anisotropy_range, theta_range, n_samples, seed
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from .auditor import AuditSpec
from .constitutive import MODELS, FreeEnergyModel, model_from_params, model_to_params
from .grid import Grid
from .solver import DtPolicy, HeatSource, Scenario, SimConfig


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where = f"key '{key}'"
            if line is not None:
                where += f" (line {line})"
            where += ": "
        super().__init__(where + message)
        self.key, self.line = key, line


SECTIONS = {
    "material": None,  # model-dependent keys
    "viscosity": ("nu1", "nu2", "p"),
    "thermal": ("kappa0", "epsilon"),
    "domain": ("nx", "ny", "Lx", "Ly"),
    "scenario": ("id", "amplitude", "theta0", "rho_R", "bump_amplitude", "bump_width", "mode"),
    "time": (
        "t_end", "dump_every", "cfl_advect", "cfl_visc", "cfl_hyper", "cfl_thermal",
        "c_floor", "hyper_floor", "dt_fixed",
    ),
    "forcing": ("gravity", "heat_source", "heat_amplitude", "heat_width", "k_damp"),
    "audit": ("detF_range", "anisotropy_range", "theta_range", "n_samples", "seed"),
}

REQUIRED = {
    "tabulate": (("material", "id"),),
    "audit": (("material", "id"),),
    "simulate": (
        ("material", "id"),
        ("domain", "nx"),
        ("domain", "ny"),
        ("scenario", "id"),
        ("time", "t_end"),
    ),
}

INT_KEYS = {("domain", "nx"), ("domain", "ny"), ("scenario", "mode"), ("audit", "n_samples"), ("audit", "seed")}
STR_KEYS = {("material", "id"), ("scenario", "id"), ("forcing", "heat_source")}
PAIR_KEYS = {("forcing", "gravity"), ("audit", "detF_range"), ("audit", "anisotropy_range"), ("audit", "theta_range")}


@dataclass(frozen=True)
class Config:
    sim: SimConfig = field(default_factory=SimConfig)
    audit: AuditSpec = field(default_factory=AuditSpec)
    # a 3-D material (audit/tabulate only) lives here; the planar solver cannot hold it
    material: FreeEnergyModel | None = None

    @property
    def model(self) -> FreeEnergyModel:
        return self.sim.model if self.material is None else self.material


def _line_of(text: str, section: str, key: str | None):
    """Best-effort line number of ``key`` inside ``[section]`` (or the header)."""
    current = None
    header = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if m:
            current = m.group(1)
            if current == section:
                header = n
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*=", line):
            return n
    return header


def _number(value, section, key, text, integer=False):
    name = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", name, _line_of(text, section, key))
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"expected an integer, got {value!r}", name, _line_of(text, section, key))
        return int(value)
    return float(value)


def _coerce(section, key, value, text):
    name = f"{section}.{key}"
    if (section, key) in STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", name, _line_of(text, section, key))
        return value
    if (section, key) in PAIR_KEYS:
        if not isinstance(value, list) or len(value) != 2:
            raise ConfigError(f"expected two numbers, got {value!r}", name, _line_of(text, section, key))
        return tuple(_number(v, section, key, text) for v in value)
    return _number(value, section, key, text, integer=(section, key) in INT_KEYS)


def _material(table: dict, text: str) -> FreeEnergyModel:
    model_id = table.get("id")
    if model_id not in MODELS:
        raise ConfigError(
            f"unknown model id {model_id!r}; valid ids: {', '.join(sorted(MODELS))}",
            "material.id",
            _line_of(text, "material", "id"),
        )
    cls = MODELS[model_id]
    allowed = {f.name for f in fields(cls) if f.init and not f.name.startswith("_")}
    params = {}
    for key, value in table.items():
        if key == "id":
            continue
        if key not in allowed:
            raise ConfigError(
                f"unknown parameter for {model_id}; valid: {', '.join(sorted(allowed))}",
                f"material.{key}",
                _line_of(text, "material", key),
            )
        if key == "wells":
            if not isinstance(value, list):
                raise ConfigError("expected a list of wells", "material.wells", _line_of(text, "material", key))
            params[key] = tuple(dict(w) for w in value)
        elif key == "d":
            params[key] = _number(value, "material", key, text, integer=True)
        else:
            params[key] = _number(value, "material", key, text)
    try:
        return model_from_params(model_id, params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "material", _line_of(text, "material", None)) from exc


def parse_config(text: str, purpose: str = "simulate") -> Config:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    for section, table in raw.items():
        if section not in SECTIONS:
            raise ConfigError(
                f"unknown section; valid: {', '.join(SECTIONS)}", section, _line_of(text, section, None)
            )
        if not isinstance(table, dict):
            raise ConfigError("expected a table", section, _line_of(text, section, None))
        allowed = SECTIONS[section]
        if allowed is None:
            continue
        for key in table:
            if key not in allowed:
                raise ConfigError(
                    f"unknown key; valid in [{section}]: {', '.join(allowed)}",
                    f"{section}.{key}",
                    _line_of(text, section, key),
                )
    for section, key in REQUIRED.get(purpose, REQUIRED["simulate"]):
        if key not in raw.get(section, {}):
            raise ConfigError("required key is missing", f"{section}.{key}", _line_of(text, section, None))

    vals = {
        s: {k: _coerce(s, k, v, text) for k, v in raw.get(s, {}).items()}
        for s in SECTIONS
        if s != "material"
    }
    model = _material(raw.get("material", {}), text)

    def build(cls, section, mapping=None, **extra):
        kwargs = dict(extra)
        for key, value in vals[section].items():
            target = (mapping or {}).get(key, key)
            if target is not None:
                kwargs[target] = value
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), section, _line_of(text, section, None)) from exc

    # tabulate/audit configs may omit [domain]; the grid is then unused
    grid = build(Grid, "domain", nx=32, ny=32)
    scenario = build(Scenario, "scenario")
    policy = build(DtPolicy, "time", {"t_end": None, "dump_every": None})
    forcing = vals["forcing"]
    try:
        heat = HeatSource(
            kind=forcing.get("heat_source", "none"),
            amplitude=forcing.get("heat_amplitude", 0.0),
            width=forcing.get("heat_width", 0.1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "forcing.heat_source", _line_of(text, "forcing", "heat_source")) from exc
    sim_kwargs = dict(vals["viscosity"])
    sim_kwargs.update(vals["thermal"])
    for key in ("t_end", "dump_every"):
        if key in vals["time"]:
            sim_kwargs[key] = vals["time"][key]
    if "gravity" in forcing:
        sim_kwargs["gravity"] = forcing["gravity"]
    if "k_damp" in forcing:
        sim_kwargs["k_damp"] = forcing["k_damp"]
    audit_kwargs = dict(vals["audit"])
    planar = model.d == 2
    if not planar and purpose == "simulate":
        raise ConfigError("the solver needs d = 2", "material.d", _line_of(text, "material", "d"))
    try:
        sim_model = {"model": model} if planar else {}
        sim = SimConfig(
            heat_source=heat, grid=grid, scenario=scenario, dt_policy=policy,
            seed=int(audit_kwargs.get("seed", 0)), **sim_model, **sim_kwargs,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        audit = AuditSpec(**audit_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), "audit", _line_of(text, "audit", None)) from exc
    return Config(sim, audit, None if planar else model)


def load_config(path, purpose: str = "simulate") -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, purpose)


def to_dict(config: Config) -> dict:
    sim = config.sim
    material = {"id": config.model.model_id}
    material.update(model_to_params(config.model))
    if "wells" not in material and material.get("d") == 2:
        material.pop("d")
    return {
        "material": material,
        "viscosity": {"nu1": sim.nu1, "nu2": sim.nu2, "p": sim.p},
        "thermal": {"kappa0": sim.kappa0, "epsilon": sim.epsilon},
        "domain": {"nx": sim.grid.nx, "ny": sim.grid.ny, "Lx": sim.grid.Lx, "Ly": sim.grid.Ly},
        "scenario": {k.name: getattr(sim.scenario, k.name) for k in fields(Scenario)},
        "time": {
            "t_end": sim.t_end,
            "dump_every": sim.dump_every,
            **{k.name: getattr(sim.dt_policy, k.name) for k in fields(DtPolicy)},
        },
        "forcing": {
            "gravity": list(sim.gravity),
            "heat_source": sim.heat_source.kind,
            "heat_amplitude": sim.heat_source.amplitude,
            "heat_width": sim.heat_source.width,
            "k_damp": sim.k_damp,
        },
        "audit": {
            "detF_range": list(config.audit.detF_range),
            "anisotropy_range": list(config.audit.anisotropy_range),
            "theta_range": list(config.audit.theta_range),
            "n_samples": config.audit.n_samples,
            "seed": config.audit.seed,
        },
    }


def serialize_config(config: Config) -> str:
    return tomli_w.dumps(to_dict(config))


def dump_config(config: Config, path) -> Path:
    path = Path(path)
    path.write_text(serialize_config(config))
    return path
