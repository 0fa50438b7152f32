"""Scenario files: JSON trees describing a sphere, emitters, controls and tasks.

A scenario file looks like::

    {
      "name": "ring6",
      "sphere": {"radius_nm": 15.0, "eps_d": 1.0},
      "metal": {"eps_inf": 6.0, "omega_p_eV": 7.90, "gamma_p_eV": 0.051},
      "emitters": {"layout": "ring", "count": 6, "h_nm": 20.0,
                   "orientation": "azimuthal", "omega0_eV": 2.77},
      "controls": {"max_multipole": 25},
      "tasks": ["rates", "evolve", "ladder"]
    }

``sphere.radius_nm`` is mandatory. Everything else has a default.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import (
    DrudeModel,
    Emitter,
    EmitterSet,
    NanoSphere,
    NumericalControls,
    SystemConfig,
    place_pair,
    place_polar,
    place_ring,
    validate,
)

__all__ = [
    "ConfigError",
    "TASKS",
    "SweepSpec",
    "Scenario",
    "parse_config",
    "scenario_from_dict",
    "build_system",
    "get_path",
    "set_path",
]

TASKS = ("modes", "rates", "eigenstates", "evolve", "ladder", "sweep")
LAYOUTS = ("ring", "poles", "pair", "explicit")
SUMMARIES = (
    "gamma1_over_gamma0",
    "gamma12_over_gamma1",
    "brightest_over_gamma1",
    "peak_W_over_gamma1",
    "t_peak",
    "eta_at_peak",
    "eta_initial",
)

_METAL_KEYS = {"eps_inf": "eps_inf", "omega_p_eV": "omega_p", "gamma_p_eV": "gamma_p"}
_CONTROL_KEYS = {
    "max_multipole": ("max_multipole", int),
    "fit_window_eV": ("fit_window", float),
    "fit_samples": ("fit_samples", int),
    "time_step_factor": ("time_step_factor", float),
    "eigen_tolerance": ("eigen_tolerance", float),
    "include_free_space": ("include_free_space", bool),
}


class ConfigError(ValueError):
    """Malformed or invalid scenario description."""


@dataclass(frozen=True)
class SweepSpec:
    """Scan of one numeric parameter, optionally repeated over a second one."""

    param: str
    start: float
    stop: float
    steps: int
    summaries: tuple[str, ...] = ("gamma12_over_gamma1",)
    series_param: str | None = None
    series_values: tuple[float, ...] = ()

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class Scenario:
    name: str
    config: SystemConfig
    tasks: frozenset[str]
    raw: dict = field(compare=False, repr=False)
    sweep: SweepSpec | None = None
    out_dir: str | None = None

    @property
    def evolve_times(self) -> np.ndarray:
        ev = self.raw.get("evolve", {})
        return np.linspace(0.0, float(ev.get("t_max", 2.0)), int(ev.get("steps", 81)))

    @property
    def eigen_modes(self) -> list:
        return list(self.raw.get("eigen", {}).get("modes", ["all"]))

    @property
    def fixed_orientation(self) -> bool:
        return bool(self.raw.get("eigen", {}).get("fixed_orientation", True))


def _section(tree: dict, key: str) -> dict:
    val = tree.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(f"{key}: expected an object, got {type(val).__name__}")
    return val


def _number(sec: dict, key: str, path: str, default=None, kind=float):
    if key not in sec:
        if default is None:
            raise ConfigError(f"{path}: missing required key")
        return default
    val = sec[key]
    if isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{path}: expected a number, got {val!r}")
    try:
        out = kind(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected {kind.__name__}, got {val!r}") from exc
    if kind is float and not math.isfinite(out):
        raise ConfigError(f"{path}: must be finite, got {val!r}")
    return out


def _build_emitters(sec: dict, sphere: NanoSphere) -> EmitterSet:
    layout = sec.get("layout", "ring")
    if layout not in LAYOUTS:
        raise ConfigError(f"emitters.layout: expected one of {', '.join(LAYOUTS)}, got {layout!r}")
    omega0 = _number(sec, "omega0_eV", "emitters.omega0_eV", 2.77)
    h = _number(sec, "h_nm", "emitters.h_nm", 20.0)
    orient = sec.get("orientation", "radial")
    try:
        if layout == "ring":
            count = _number(sec, "count", "emitters.count", 6, int)
            return place_ring(count, h, orient, sphere, omega0)
        if layout == "poles":
            count = _number(sec, "count", "emitters.count", 2, int)
            offset = _number(sec, "offset_deg", "emitters.offset_deg", 1.0)
            return place_polar(count, h, sphere, omega0, offset)
        if layout == "pair":
            theta = _number(sec, "theta_deg", "emitters.theta_deg", 180.0)
            return place_pair(math.radians(theta), h, sphere, orient, omega0)
    except ValueError as exc:
        raise ConfigError(f"emitters: {exc}") from exc
    pos = sec.get("positions_nm")
    ori = sec.get("orientations")
    if not isinstance(pos, list) or not isinstance(ori, list) or len(pos) != len(ori):
        raise ConfigError("emitters.positions_nm/orientations: need two lists of equal length")
    d0 = sec.get("d0", [1.0] * len(pos))
    if not isinstance(d0, list):
        d0 = [d0] * len(pos)
    out = []
    for i, (p, o, d) in enumerate(zip(pos, ori, d0)):
        if len(p) != 3 or len(o) != 3:
            raise ConfigError(f"emitters.positions_nm[{i}]: expected 3-vectors")
        if not np.linalg.norm(o) > 0:
            raise ConfigError(f"emitters.orientations[{i}]: zero vector")
        out.append(Emitter.make(p, o, float(d)))
    return EmitterSet(tuple(out), omega0)


def build_system(tree: dict) -> SystemConfig:
    """Build the physical system from a config tree; raises ``ConfigError``."""
    sph = _section(tree, "sphere")
    if "radius_nm" not in sph:
        raise ConfigError("sphere.radius_nm: missing required key (no default; the radius must be explicit)")
    radius = _number(sph, "radius_nm", "sphere.radius_nm")
    eps_d = _number(sph, "eps_d", "sphere.eps_d", 1.0)
    met = _section(tree, "metal")
    defaults = DrudeModel(6.0, 7.90, 0.051)
    metal = DrudeModel(
        **{attr: _number(met, key, f"metal.{key}", getattr(defaults, attr)) for key, attr in _METAL_KEYS.items()}
    )
    sphere = NanoSphere(radius, metal, eps_d)
    if not radius > 0:
        raise ConfigError(f"sphere.radius_nm: must be > 0, got {radius}")
    emitters = _build_emitters(_section(tree, "emitters"), sphere)
    ctl = _section(tree, "controls")
    unknown = set(ctl) - set(_CONTROL_KEYS)
    if unknown:
        raise ConfigError(f"controls.{sorted(unknown)[0]}: unknown key")
    kwargs = {}
    for key, (attr, kind) in _CONTROL_KEYS.items():
        if key in ctl:
            kwargs[attr] = ctl[key] if kind is bool else _number(ctl, key, f"controls.{key}", kind=kind)
    config = SystemConfig(sphere, emitters, NumericalControls(**kwargs))
    problems = validate(config)
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
    return config


def _parse_sweep(tree: dict) -> SweepSpec | None:
    if "sweep" not in tree:
        return None
    sec = _section(tree, "sweep")
    param = sec.get("param")
    if not isinstance(param, str) or not param:
        raise ConfigError("sweep.param: missing parameter path")
    try:
        current = get_path(tree, param)
    except KeyError:
        current = None
    if current is not None and (isinstance(current, bool) or not isinstance(current, (int, float))):
        raise ConfigError(f"sweep.param: {param} is not numeric (value {current!r})")
    if current is None and param not in _SWEEPABLE_DEFAULTS:
        raise ConfigError(f"sweep.param: {param} does not name a numeric setting")
    steps = _number(sec, "steps", "sweep.steps", kind=int)
    if steps < 1:
        raise ConfigError(f"sweep.steps: must be >= 1, got {steps}")
    summaries = tuple(sec.get("summaries", ["gamma12_over_gamma1"]))
    for s in summaries:
        if s not in SUMMARIES:
            raise ConfigError(f"sweep.summaries: unknown summary {s!r}")
    series = sec.get("series")
    sparam, svals = None, ()
    if series is not None:
        if not isinstance(series, dict) or "param" not in series or "values" not in series:
            raise ConfigError("sweep.series: expected {param, values}")
        sparam = series["param"]
        svals = tuple(float(v) for v in series["values"])
    return SweepSpec(
        param,
        _number(sec, "from", "sweep.from"),
        _number(sec, "to", "sweep.to"),
        steps,
        summaries,
        sparam,
        svals,
    )


# numeric settings that may be absent from a tree but still swept
_SWEEPABLE_DEFAULTS = {
    "emitters.h_nm",
    "emitters.omega0_eV",
    "emitters.theta_deg",
    "emitters.offset_deg",
    "emitters.count",
    "sphere.eps_d",
    "metal.eps_inf",
    "metal.omega_p_eV",
    "metal.gamma_p_eV",
    "controls.max_multipole",
}


def scenario_from_dict(tree: dict, name: str | None = None) -> Scenario:
    """Validate a config tree and turn it into a ``Scenario``."""
    if not isinstance(tree, dict):
        raise ConfigError("top level: expected an object")
    tree = copy.deepcopy(tree)
    config = build_system(tree)
    tasks = tree.get("tasks", [])
    if not isinstance(tasks, list) or not tasks:
        raise ConfigError("tasks: need a nonempty list of tasks")
    for t in tasks:
        if t not in TASKS:
            raise ConfigError(f"tasks: unknown task {t!r} (expected one of {', '.join(TASKS)})")
    sweep = _parse_sweep(tree)
    if ("sweep" in tasks) != (sweep is not None):
        if sweep is None:
            raise ConfigError("sweep: task 'sweep' requested without a sweep section")
        raise ConfigError("sweep: sweep section given but task 'sweep' not requested")
    if "evolve" in tasks or "ladder" in tasks:
        from .lindblad import MAX_EMITTERS

        if config.n_emitters > MAX_EMITTERS:
            raise ConfigError(f"emitters.count: dynamics limited to {MAX_EMITTERS} emitters")
    return Scenario(
        name=str(name or tree.get("name", "scenario")),
        config=config,
        tasks=frozenset(tasks),
        raw=tree,
        sweep=sweep,
        out_dir=tree.get("output"),
    )


def parse_config(path) -> Scenario:
    """Read a JSON scenario file; errors carry line or key context."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: no such file")
    text = p.read_text()
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(tree, name=tree.get("name", p.stem) if isinstance(tree, dict) else None)


def get_path(tree: dict, path: str) -> Any:
    node = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise KeyError(path)
        node = node[part]
    return node


def set_path(tree: dict, path: str, value) -> dict:
    """Copy of ``tree`` with the dotted ``path`` set to ``value``."""
    out = copy.deepcopy(tree)
    node = out
    parts = path.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: {part} is not a section")
    node[parts[-1]] = value
    return out
