"""Command-line front end: presets, config parsing, scenario runs and output files.

Config documents are flat sectioned ``key = value`` text::

    [scenario]
    preset = janus-epimetheus
    duration = 20 yr
    outputs = swaps, classification

    [body.moon1]
    gm = 0.2 km3/s2

Values from the document override the preset key by key. Bodies without an
explicit position/velocity get one from the ``[layout]`` section.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, coorbital, equilibria
from .core import (BODY_NAMES, HorseshoeError, InvalidInputError, NumericalError, SystemState,
                   kepler_period, mean_motion, normalize)
from .integrator import IntegratorConfig, Scheme, propagate

EXIT_OK, EXIT_CONFIG, EXIT_COLLISION, EXIT_NUMERICAL = 0, 2, 3, 4

OUTPUTS = ("trajectory", "resonant_series", "swaps", "portrait", "classification", "frequencies")
MANIFEST = "manifest.json"

YEAR = 365.25 * 86400.0

# unit -> (dimension, factor to km / s / km/s / km3/s2 / rad)
UNITS = {
    "km": ("length", 1.0),
    "m": ("length", 1e-3),
    "au": ("length", 1.495978707e8),
    "s": ("time", 1.0),
    "min": ("time", 60.0),
    "h": ("time", 3600.0),
    "d": ("time", 86400.0),
    "yr": ("time", YEAR),
    "km/s": ("velocity", 1.0),
    "m/s": ("velocity", 1e-3),
    "km3/s2": ("gm", 1.0),
    "m3/s2": ("gm", 1e-9),
    "deg": ("angle", math.pi / 180.0),
    "rad": ("angle", 1.0),
}
_CANONICAL_UNIT = {"length": "km", "time": "s", "velocity": "km/s", "gm": "km3/s2", "angle": "rad"}


class ConfigError(InvalidInputError):
    def __init__(self, message, line=None, source="<config>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.source = source


# --------------------------------------------------------------------------
# scenario types


@dataclass(frozen=True)
class BodySpec:
    """One body in physical units (km, km/s, km3/s2)."""

    name: str
    gm: float
    radius_phys: float = 0.0
    position: tuple | None = None
    velocity: tuple | None = None


@dataclass(frozen=True)
class LayoutSpec:
    """How to place bodies that have no explicit state.

    ``coorbital``: moons on circular orbits ``zeta`` apart with
    ``delta_a = a_moon2 - a_moon1`` around the mean radius ``a``.
    ``lagrange``: equilateral triangle of side ``separation``.
    """

    type: str
    a: float | None = None
    delta_a: float = 0.0
    zeta: float = math.pi
    separation: float | None = None
    sense: str = "L4"


@dataclass(frozen=True)
class IntegratorSpec:
    scheme: str = "verlet2"
    step: float | None = None
    steps_per_orbit: float | None = None
    output_stride: int = 1
    max_steps: int = 10**9
    collision_check: bool = True


@dataclass(frozen=True)
class PortraitSpec:
    n_zeta: int = 361
    n_u: int = 201
    u_max: float | None = None
    mu: float | None = None
    zeta_cutoff: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    bodies: tuple
    duration: float
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    outputs: tuple = ("trajectory",)
    preset: str | None = None
    layout: LayoutSpec | None = None
    portrait: PortraitSpec = field(default_factory=PortraitSpec)
    perturbation: float = 0.0

    @property
    def gm(self):
        return np.array([b.gm for b in self.bodies])

    @property
    def mu(self):
        gm = self.gm
        return float((gm[1] + gm[2]) / gm[0])

    def ref_radius(self):
        """Length scale of the scenario: layout radius, else central-moon1 distance."""
        if self.layout is not None:
            r = self.layout.a if self.layout.type == "coorbital" else self.layout.separation
            return float(r)
        p = np.asarray(self.bodies[1].position) - np.asarray(self.bodies[0].position)
        return float(math.hypot(*p))

    def system_state(self) -> SystemState:
        pos = [b.position for b in self.bodies]
        vel = [b.velocity for b in self.bodies]
        return SystemState.from_arrays(0.0, pos, vel, self.gm, [b.radius_phys for b in self.bodies])


# --------------------------------------------------------------------------
# parsing

_SECTIONS = {
    "scenario": {"preset", "duration", "outputs", "perturbation"},
    "integrator": {"scheme", "step", "steps_per_orbit", "output_stride", "max_steps",
                   "collision_check"},
    "layout": {"type", "a", "delta_a", "zeta", "separation", "sense"},
    "portrait": {"n_zeta", "n_u", "u_max", "mu", "zeta_cutoff"},
}
for _name in BODY_NAMES:
    _SECTIONS[f"body.{_name}"] = {"gm", "radius_phys", "position", "velocity"}

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z0-9_.\-]+)\s*\]$")


def _tokenize(text, source):
    """{(section, key): (value, line, source)} from a config document."""
    entries = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).lower()
            if section not in _SECTIONS:
                if section.startswith("body."):
                    raise ConfigError(f"unknown body [{section}]; a system has exactly three "
                                      f"bodies: {', '.join(BODY_NAMES)}", lineno, source)
                raise ConfigError(f"unknown section [{section}]", lineno, source)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, source)
        if section is None:
            raise ConfigError("key outside of any section", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in _SECTIONS[section]:
            raise ConfigError(f"unknown key '{key}' in [{section}]", lineno, source)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key '{key}' in [{section}]", lineno, source)
        entries[(section, key)] = (value, lineno, source)
    return entries


def preset_names():
    return sorted(p.name[:-4] for p in resources.files("horseshoe").joinpath("presets").iterdir()
                  if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    if name not in preset_names():
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(preset_names())})")
    return resources.files("horseshoe").joinpath("presets", f"{name}.ini").read_text()


def _quantity(entry, dimension):
    value, line, source = entry
    parts = value.split()
    unit = _CANONICAL_UNIT[dimension]
    if len(parts) == 2:
        num, unit = parts
    elif len(parts) == 1:
        num = parts[0]
    else:
        raise ConfigError(f"expected '<number> [unit]', got {value!r}", line, source)
    if unit not in UNITS:
        raise ConfigError(f"unknown unit '{unit}'", line, source)
    dim, factor = UNITS[unit]
    if dim != dimension:
        raise ConfigError(f"unit mismatch: '{unit}' is a {dim}, expected a {dimension}", line, source)
    try:
        x = float(num)
    except ValueError:
        raise ConfigError(f"not a number: {num!r}", line, source) from None
    if not math.isfinite(x):
        raise ConfigError(f"value must be finite, got {num!r}", line, source)
    return x * factor


def _vector(entry, dimension):
    value, line, source = entry
    parts = value.replace(",", " ").split()
    unit = _CANONICAL_UNIT[dimension]
    if len(parts) == 3:
        unit = parts.pop()
    if len(parts) != 2:
        raise ConfigError(f"expected '<x> <y> [unit]', got {value!r}", line, source)
    x = _quantity((f"{parts[0]} {unit}", line, source), dimension)
    y = _quantity((f"{parts[1]} {unit}", line, source), dimension)
    return (x, y)


def _number(entry, kind=float):
    value, line, source = entry
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"not a number: {value!r}", line, source) from None
    if kind is int:
        if x != int(x):
            raise ConfigError(f"expected an integer, got {value!r}", line, source)
        return int(x)
    return x


def _boolean(entry):
    value, line, source = entry
    v = value.lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}", line, source)


def _merge(user, text_source):
    """Overlay ``user`` entries on the preset named in them (if any)."""
    preset = user.get(("scenario", "preset"))
    if preset is None:
        return user, None
    name, line, src = preset
    if name not in preset_names():
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(preset_names())})", line, src)
    base = _tokenize(preset_text(name), f"preset:{name}")
    # an explicit step length or step count replaces the preset's choice of either
    if ("integrator", "step") in user or ("integrator", "steps_per_orbit") in user:
        base.pop(("integrator", "step"), None)
        base.pop(("integrator", "steps_per_orbit"), None)
    merged = dict(base)
    merged.update(user)
    return merged, name


def parse_config(text: str, source: str = "<config>", preset: str | None = None) -> ScenarioConfig:
    """Parse and validate a config document; preset values are merged first.

    ``preset`` names a preset from outside the document (command line).
    """
    user = _tokenize(text, source)
    if preset is not None:
        if ("scenario", "preset") in user:
            raise ConfigError("preset given both on the command line and in the config",
                              user[("scenario", "preset")][1], source)
        user[("scenario", "preset")] = (preset, None, "--preset")
    entries, preset = _merge(user, source)

    def get(section, key):
        return entries.get((section, key))

    def require(section, key):
        e = get(section, key)
        if e is None:
            raise ConfigError(f"missing required key '{key}' in [{section}]", None, source)
        return e

    duration = _quantity(require("scenario", "duration"), "time")
    if not duration > 0:
        raise ConfigError("duration must be positive", get("scenario", "duration")[1], source)

    outputs = ("trajectory",)
    if get("scenario", "outputs"):
        value, line, src = get("scenario", "outputs")
        outputs = tuple(s.strip() for s in value.split(",") if s.strip())
        for o in outputs:
            if o not in OUTPUTS:
                raise ConfigError(f"unknown output '{o}' (choose from {', '.join(OUTPUTS)})", line, src)
    perturbation = _number(get("scenario", "perturbation")) if get("scenario", "perturbation") else 0.0
    if perturbation < 0:
        raise ConfigError("perturbation must be >= 0", get("scenario", "perturbation")[1], source)

    integ = _parse_integrator(get, source)
    layout = _parse_layout(get, source)
    portrait = _parse_portrait(get, source)

    bodies = []
    for name in BODY_NAMES:
        sec = f"body.{name}"
        gm = _quantity(require(sec, "gm"), "gm")
        radius = _quantity(get(sec, "radius_phys"), "length") if get(sec, "radius_phys") else 0.0
        if gm < 0 or radius < 0:
            raise ConfigError(f"gm and radius_phys must be >= 0 in [{sec}]", require(sec, "gm")[1], source)
        pos = _vector(get(sec, "position"), "length") if get(sec, "position") else None
        vel = _vector(get(sec, "velocity"), "velocity") if get(sec, "velocity") else None
        bodies.append(BodySpec(name, gm, radius, pos, vel))
    if bodies[0].gm <= 0:
        raise ConfigError("central body gm must be positive", require("body.central", "gm")[1], source)

    bodies = _expand_layout(bodies, layout, source)
    cfg = ScenarioConfig(tuple(bodies), duration, integ, outputs, preset, layout, portrait, perturbation)
    try:
        cfg.system_state()
    except HorseshoeError as err:
        raise ConfigError(f"invalid initial state: {err}", None, source) from None
    return cfg


def _parse_integrator(get, source):
    kw = {}
    if get("integrator", "scheme"):
        value, line, src = get("integrator", "scheme")
        if value not in {s.value for s in Scheme}:
            raise ConfigError(f"unknown scheme '{value}'", line, src)
        kw["scheme"] = value
    step, spo = get("integrator", "step"), get("integrator", "steps_per_orbit")
    if step and spo:
        raise ConfigError("give either 'step' or 'steps_per_orbit', not both", spo[1], spo[2])
    if step:
        kw["step"] = _quantity(step, "time")
        if not kw["step"] > 0:
            raise ConfigError("step must be positive", step[1], step[2])
    elif spo:
        kw["steps_per_orbit"] = _number(spo)
        if not kw["steps_per_orbit"] > 0:
            raise ConfigError("steps_per_orbit must be positive", spo[1], spo[2])
    else:
        kw["steps_per_orbit"] = 2000.0
    for key in ("output_stride", "max_steps"):
        e = get("integrator", key)
        if e:
            kw[key] = _number(e, int)
            if kw[key] < 1:
                raise ConfigError(f"{key} must be >= 1", e[1], e[2])
    if get("integrator", "collision_check"):
        kw["collision_check"] = _boolean(get("integrator", "collision_check"))
    return IntegratorSpec(**kw)


def _parse_layout(get, source):
    if not get("layout", "type"):
        if any(get("layout", k) for k in _SECTIONS["layout"]):
            raise ConfigError("missing required key 'type' in [layout]", None, source)
        return None
    value, line, src = get("layout", "type")
    if value == "coorbital":
        e = get("layout", "a")
        if e is None:
            raise ConfigError("missing required key 'a' in [layout]", line, src)
        kw = {"a": _quantity(e, "length")}
        if not kw["a"] > 0:
            raise ConfigError("a must be positive", e[1], e[2])
        if get("layout", "delta_a"):
            kw["delta_a"] = _quantity(get("layout", "delta_a"), "length")
        if get("layout", "zeta"):
            kw["zeta"] = _quantity(get("layout", "zeta"), "angle")
        return LayoutSpec("coorbital", **kw)
    if value == "lagrange":
        e = get("layout", "separation")
        if e is None:
            raise ConfigError("missing required key 'separation' in [layout]", line, src)
        sep = _quantity(e, "length")
        if not sep > 0:
            raise ConfigError("separation must be positive", e[1], e[2])
        sense = get("layout", "sense")[0].upper() if get("layout", "sense") else "L4"
        if sense not in ("L4", "L5"):
            raise ConfigError(f"sense must be L4 or L5, got {sense}", get("layout", "sense")[1], source)
        return LayoutSpec("lagrange", separation=sep, sense=sense)
    raise ConfigError(f"unknown layout type '{value}' (coorbital or lagrange)", line, src)


def _parse_portrait(get, source):
    kw = {}
    for key in ("n_zeta", "n_u"):
        if get("portrait", key):
            kw[key] = _number(get("portrait", key), int)
    if get("portrait", "u_max"):
        kw["u_max"] = _number(get("portrait", "u_max"))
    if get("portrait", "mu"):
        kw["mu"] = _number(get("portrait", "mu"))
    if get("portrait", "zeta_cutoff"):
        kw["zeta_cutoff"] = _quantity(get("portrait", "zeta_cutoff"), "angle")
    return PortraitSpec(**kw)


def _expand_layout(bodies, layout, source):
    missing = [b.position is None or b.velocity is None for b in bodies]
    if not any(missing):
        return bodies
    if layout is None:
        name = bodies[missing.index(True)].name
        raise ConfigError(f"missing required key 'position'/'velocity' in [body.{name}] "
                          "(or give a [layout])", None, source)
    gm = np.array([b.gm for b in bodies])
    try:
        if layout.type == "coorbital":
            state = coorbital.initial_state(gm, layout.a, layout.delta_a, layout.zeta)
        else:
            state = equilibria.lagrange_equilateral(gm, layout.separation, layout.sense).state()
    except HorseshoeError as err:
        raise ConfigError(f"cannot build layout: {err}", None, source) from None
    out = []
    for b, need, body in zip(bodies, missing, state.bodies):
        if need:
            b = replace(b, position=b.position or tuple(float(x) for x in body.position),
                        velocity=b.velocity or tuple(float(x) for x in body.velocity))
        out.append(b)
    return out


def serialize_config(cfg: ScenarioConfig) -> str:
    """Config document that parses back to ``cfg`` field by field."""
    r = repr
    lines = ["[scenario]"]
    if cfg.preset:
        lines.append(f"preset = {cfg.preset}")
    lines += [f"duration = {r(cfg.duration)} s", f"outputs = {', '.join(cfg.outputs)}",
              f"perturbation = {r(cfg.perturbation)}", "", "[integrator]"]
    it = cfg.integrator
    lines.append(f"scheme = {it.scheme}")
    if it.step is not None:
        lines.append(f"step = {r(it.step)} s")
    else:
        lines.append(f"steps_per_orbit = {r(it.steps_per_orbit)}")
    lines += [f"output_stride = {it.output_stride}", f"max_steps = {it.max_steps}",
              f"collision_check = {str(it.collision_check).lower()}"]
    for b in cfg.bodies:
        lines += ["", f"[body.{b.name}]", f"gm = {r(b.gm)} km3/s2", f"radius_phys = {r(b.radius_phys)} km",
                  f"position = {r(b.position[0])} {r(b.position[1])} km",
                  f"velocity = {r(b.velocity[0])} {r(b.velocity[1])} km/s"]
    if cfg.layout is not None:
        lay = cfg.layout
        lines += ["", "[layout]", f"type = {lay.type}"]
        if lay.type == "coorbital":
            lines += [f"a = {r(lay.a)} km", f"delta_a = {r(lay.delta_a)} km", f"zeta = {r(lay.zeta)} rad"]
        else:
            lines += [f"separation = {r(lay.separation)} km", f"sense = {lay.sense}"]
    p = cfg.portrait
    lines += ["", "[portrait]", f"n_zeta = {p.n_zeta}", f"n_u = {p.n_u}"]
    if p.u_max is not None:
        lines.append(f"u_max = {r(p.u_max)}")
    if p.mu is not None:
        lines.append(f"mu = {r(p.mu)}")
    if p.zeta_cutoff is not None:
        lines.append(f"zeta_cutoff = {r(p.zeta_cutoff)} rad")
    return "\n".join(lines) + "\n"


def load_config(path=None, preset=None) -> ScenarioConfig:
    """Config from a file, a bare preset name, or both (file overrides preset)."""
    if path is None and preset is None:
        raise ConfigError("no configuration given (use --config or --preset)")
    text = Path(path).read_text() if path is not None else ""
    return parse_config(text, str(path) if path is not None else "<none>", preset=preset)


# --------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    exit_code: int
    manifest: dict
    files: list


def _fmt(x):
    return "%.17g" % x


def _write_table(path: Path, columns, rows, fmt):
    """Write a table as CSV (LF line ends) or as a JSON object of columns."""
    if fmt == "json":
        path = path.with_suffix(".json")
        data = {c: [v if isinstance(v, str) else float(v) for v in col] for c, col in zip(columns, zip(*rows))} \
            if rows else {c: [] for c in columns}
        path.write_text(json.dumps({"columns": list(columns), "data": data}, indent=1) + "\n")
        return path
    path = path.with_suffix(".csv")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    path.write_bytes(buf.getvalue().encode())
    return path


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")
    return path


def _clean(x):
    """JSON-safe float (None for NaN/inf)."""
    x = float(x)
    return x if math.isfinite(x) else None


def _sha256(path: Path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, status, exit_code, message, files, extra=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "status": status,
        "exit_code": exit_code,
        "message": message,
        "partial": status not in ("ok",),
        "files": [{"name": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size} for p in files],
    }
    manifest.update(extra or {})
    _write_json(out_dir / MANIFEST, manifest)
    return manifest


def _step(cfg, units, state_c):
    it = cfg.integrator
    if it.step is not None:
        return it.step / units.time_unit
    r = float(np.hypot(*(state_c.positions[1] - state_c.positions[0])))
    gm = state_c.gm
    return kepler_period(r, gm[0] + gm[1]) / it.steps_per_orbit


def _initial_state(cfg, seed):
    state = cfg.system_state().to_barycentric()
    if cfg.perturbation > 0:
        rng = np.random.default_rng(seed)
        kick = cfg.perturbation * cfg.ref_radius() * rng.standard_normal((3, 2))
        state = state.replace(positions=state.positions + kick).to_barycentric()
    return state


def run_scenario(cfg: ScenarioConfig, out_dir, fmt: str = "csv", seed: int = 0,
                 threads: int = 1, outputs=None) -> RunResult:
    """Propagate ``cfg`` and write the requested outputs plus a manifest into ``out_dir``.

    Exit codes: 0 success, 3 collision (partial outputs), 4 numerical failure.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = tuple(cfg.outputs if outputs is None else outputs)
    files, skipped, extra = [], {}, {"preset": cfg.preset, "outputs": list(outputs)}
    status, code, message = "ok", EXIT_OK, ""
    try:
        if "portrait" in outputs:
            files.append(_write_json(out_dir / "portrait.json", portrait_document(cfg)))
        needs_run = [o for o in outputs if o != "portrait"]
        if needs_run:
            state, units = normalize(_initial_state(cfg, seed), cfg.ref_radius())
            icfg = IntegratorConfig(step=_step(cfg, units, state), scheme=cfg.integrator.scheme,
                                    output_stride=cfg.integrator.output_stride,
                                    max_steps=cfg.integrator.max_steps,
                                    collision_check=cfg.integrator.collision_check)
            traj = propagate(state, icfg, cfg.duration / units.time_unit, units=units)
            extra["conservation"] = {k: _clean(v) for k, v in asdict(traj.report).items()}
            extra["step_s"] = icfg.step * units.time_unit
            extra["n_samples"] = len(traj)
            extra["truncated"] = traj.truncated
            if traj.collision is not None:
                c = traj.collision
                status, code = "collision", EXIT_COLLISION
                message = f"bodies {c.pair} collided at t = {c.t * units.time_unit:.6g} s"
                extra["collision"] = {"t_s": c.t * units.time_unit, "pair": list(c.pair),
                                      "distance_km": c.distance * units.length_unit}
            elif traj.truncated:
                status, code = "truncated", EXIT_NUMERICAL
                message = f"max_steps = {icfg.max_steps} reached before the end time"
            files += _write_run_outputs(traj, units, cfg, needs_run, out_dir, fmt, skipped)
    except (NumericalError, FloatingPointError, ArithmeticError, HorseshoeError) as err:
        status, code, message = "numerical_failure", EXIT_NUMERICAL, f"{type(err).__name__}: {err}"
    if skipped:
        extra["skipped"] = skipped
    manifest = write_manifest(out_dir, status, code, message, files, extra)
    return RunResult(code, manifest, files)


def _write_run_outputs(traj, units, cfg, outputs, out_dir, fmt, skipped):
    files = []
    L, T, V = units.length_unit, units.time_unit, units.velocity_unit
    if "trajectory" in outputs:
        cols = ["t_s"]
        for name in BODY_NAMES:
            cols += [f"{name}_x_km", f"{name}_y_km", f"{name}_vx_kms", f"{name}_vy_kms"]
        data = np.column_stack([traj.t * T] + [
            np.column_stack([traj.positions[:, i] * L, traj.velocities[:, i] * V]) for i in range(3)])
        files.append(_write_table(out_dir / "trajectory", cols, data.tolist(), fmt))

    series = None
    if any(o in outputs for o in ("resonant_series", "swaps", "classification", "frequencies")):
        try:
            series = analysis.resonant_series(traj)
        except InvalidInputError as err:
            for o in ("resonant_series", "swaps", "classification", "frequencies"):
                if o in outputs:
                    skipped[o] = str(err)
            return files

    if "resonant_series" in outputs:
        rows = np.column_stack([series.t * T, np.degrees(series.zeta_wrapped),
                                series.delta_a * L, series.r_rel * L])
        files.append(_write_table(out_dir / "resonant_series",
                                  ["t_s", "zeta_deg", "delta_a_km", "r_rel_km"], rows.tolist(), fmt))
    if "swaps" in outputs:
        try:
            events = analysis.detect_swaps(series)
            rows = [[e.t_swap * T, e.min_distance * L, e.direction.value] for e in events]
            files.append(_write_table(out_dir / "swaps", ["t_s", "min_distance_km", "direction"], rows, fmt))
        except InvalidInputError as err:
            skipped["swaps"] = str(err)
    if "classification" in outputs:
        files.append(_write_json(out_dir / "classification.json", classification_document(series, traj, units)))
    if "frequencies" in outputs:
        files.append(_write_json(out_dir / "frequencies.json", frequency_document(series, traj, units)))
    return files


def _reduced_start(series, traj):
    """(mu, n, zeta0, u0, E0) of the reduced model at the first sample."""
    gm = traj.gm
    mu = float((gm[1] + gm[2]) / gm[0])
    n = mean_motion(series.a_mean, gm.sum())
    zeta0 = float(series.zeta_wrapped[0])
    u0 = float(coorbital.u_from_delta_a(series.delta_a[0], mu, series.a_mean)) if mu > 0 else float("nan")
    e0 = float(coorbital.energy(zeta0, u0)) if math.isfinite(u0) and zeta0 != 0 else float("nan")
    return mu, n, zeta0, u0, e0


def classification_document(series, traj, units):
    regime = analysis.classify_trajectory(series)
    mu, n, zeta0, u0, e0 = _reduced_start(series, traj)
    reduced = None
    if math.isfinite(e0):
        reduced = coorbital.classify_energy(e0, zeta=zeta0, mu=mu).value
    doc = {
        "regime": regime.value,
        "n_samples": len(series),
        "duration_s": float(series.t[-1] - series.t[0]) * units.time_unit,
        "zeta_min_deg": float(np.degrees(series.zeta.min())),
        "zeta_max_deg": float(np.degrees(series.zeta.max())),
        "reduced_model": {"mu": mu, "zeta0_deg": math.degrees(zeta0), "u0": _clean(u0),
                          "energy": _clean(e0), "regime": reduced},
    }
    if regime not in (analysis.Regime.CIRCULATING, analysis.Regime.UNDETERMINED):
        try:
            doc["libration_period_s"] = analysis.libration_period_from_series(series) * units.time_unit
        except InvalidInputError:
            doc["libration_period_s"] = None
    return doc


def frequency_document(series, traj, units):
    T = units.time_unit
    mu, n, zeta0, u0, e0 = _reduced_start(series, traj)
    z = series.zeta[series.valid]
    doc = {"orbital_period_s": series.orbital_period * T}
    try:
        nu = analysis.libration_frequency(z, series.dt)
        doc["libration_frequency_rad_s"] = nu / T
        doc["libration_period_s"] = 2 * math.pi / nu * T if nu > 0 else None
    except InvalidInputError as err:
        doc["libration_frequency_rad_s"] = None
        doc["libration_error"] = str(err)
    try:
        doc["quasiperiodicity_index"] = analysis.quasiperiodicity_index(series)
    except InvalidInputError as err:
        doc["quasiperiodicity_index"] = None
        doc["quasiperiodicity_error"] = str(err)
    try:
        doc["reduced_libration_period_s"] = coorbital.libration_period(e0, mu, n) * T
    except (InvalidInputError, HorseshoeError, ValueError) as err:
        doc["reduced_libration_period_s"] = None
        doc["reduced_error"] = str(err)
    return doc


def portrait_document(cfg: ScenarioConfig) -> dict:
    p = cfg.portrait
    mu = p.mu if p.mu is not None else cfg.mu
    pp = coorbital.phase_portrait(mu, n_zeta=p.n_zeta, n_u=p.n_u, u_max=p.u_max, zeta_cutoff=p.zeta_cutoff)
    names = [r.value for r in (coorbital.Regime.TADPOLE_L4, coorbital.Regime.TADPOLE_L5,
                               coorbital.Regime.HORSESHOE, coorbital.Regime.CIRCULATING,
                               coorbital.Regime.SEPARATRIX)]
    codes = np.zeros(pp.labels.shape, dtype=int)
    for k, name in enumerate(names):
        codes[pp.labels == name] = k
    doc = {
        "mu": mu,
        "zeta_deg": np.degrees(pp.zeta).tolist(),
        "u": pp.u.tolist(),
        "legend": names,
        "labels": codes.tolist(),
        "levels": pp.levels,
        "components": {name: pp.components(coorbital.Regime(name)) for name in names[:3]},
        "separatrices": {k: {"zeta_deg": np.degrees(v[:, 0]).tolist(), "u": v[:, 1].tolist()}
                         for k, v in pp.separatrices.items()},
    }
    if cfg.layout is not None and cfg.layout.type == "coorbital":
        doc["delta_a_km"] = coorbital.delta_a_from_u(pp.u, mu, cfg.layout.a).tolist()
    return doc


def equilibria_document(cfg: ScenarioConfig, threads: int = 1) -> dict:
    """All five relative equilibria for the scenario masses, scaled to the reference radius."""
    gm = cfg.gm
    ref = cfg.ref_radius()
    masses = gm / gm[0]
    time_unit = math.sqrt(ref**3 / gm[0])
    stable, margin = equilibria.gascheau_stable(masses)

    def build(kind):
        try:
            if kind.is_euler:
                eq = equilibria.euler_collinear(masses, kind)
            else:
                eq = equilibria.lagrange_equilateral(masses, 1.0, kind.value[-2:])
        except HorseshoeError as err:
            return {"kind": kind.value, "error": str(err)}
        rate, _ = equilibria.max_growth_rate(eq)
        doc = {
            "kind": kind.value,
            "positions_km": (eq.positions * ref).tolist(),
            "angular_rate_rad_s": eq.angular_rate / time_unit,
            "period_s": eq.period * time_unit,
            "residual": eq.residual(),
            "growth_rate_per_s": rate / time_unit,
        }
        # collinear configurations are always unstable; only the rate is informative
        if not kind.is_euler:
            doc["linear_stable"] = bool(equilibria.linear_stable(eq))
        return doc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        configs = list(pool.map(build, list(equilibria.EquilibriumKind)))
    return {"masses_km3_s2": gm.tolist(), "separation_km": ref,
            "gascheau": {"stable": bool(stable), "margin": margin}, "configurations": configs}


# --------------------------------------------------------------------------
# entry point

_COMMAND_OUTPUTS = {
    "portrait": ("portrait",),
    "classify": ("classification",),
    "frequencies": ("frequencies",),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="horseshoe", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "propagate a scenario and write the outputs listed in the config",
        "portrait": "write the reduced-model phase portrait",
        "classify": "classify the motion of the co-orbital pair",
        "equilibria": "Euler and Lagrange configurations for the scenario masses",
        "frequencies": "libration frequency and quasi-periodicity index",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="config file")
        p.add_argument("--preset", help=f"start from a preset ({', '.join(preset_names())})")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for initial-state perturbations")
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.preset)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        write_manifest(args.out, "config_error", EXIT_CONFIG, str(err), [])
        return EXIT_CONFIG

    if args.command == "equilibria":
        try:
            path = _write_json(Path(_mkdir(args.out)) / "equilibria.json", equilibria_document(cfg, args.threads))
        except HorseshoeError as err:
            print(f"numerical failure: {err}", file=sys.stderr)
            write_manifest(args.out, "numerical_failure", EXIT_NUMERICAL, str(err), [])
            return EXIT_NUMERICAL
        write_manifest(args.out, "ok", EXIT_OK, "", [path], {"preset": cfg.preset})
        return EXIT_OK

    result = run_scenario(cfg, args.out, fmt=args.format, seed=args.seed, threads=args.threads,
                          outputs=_COMMAND_OUTPUTS.get(args.command))
    if result.exit_code != EXIT_OK:
        print(f"{result.manifest['status']}: {result.manifest['message']}", file=sys.stderr)
    for f in result.files:
        print(f)
    return result.exit_code


def _mkdir(path):
    Path(path).mkdir(parents=True, exist_ok=True)
    return path


if __name__ == "__main__":
    sys.exit(main())
