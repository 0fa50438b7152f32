"""Scenario description: nanosphere, Drude metal, emitters and numerical controls.

Lengths are in nm and energies in eV (hbar = 1). All types are frozen
dataclasses; the layout builders are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "DrudeModel",
    "NanoSphere",
    "Emitter",
    "EmitterSet",
    "NumericalControls",
    "SystemConfig",
    "SILVER",
    "place_ring",
    "place_polar",
    "place_pair",
    "validate",
]

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class DrudeModel:
    """Drude permittivity parameters ``eps_inf - omega_p**2 / (w**2 + i gamma_p w)``."""

    eps_inf: float
    omega_p: float
    gamma_p: float


SILVER = DrudeModel(eps_inf=6.0, omega_p=7.90, gamma_p=0.051)


@dataclass(frozen=True)
class NanoSphere:
    radius: float
    metal: DrudeModel = SILVER
    eps_d: float = 1.0


@dataclass(frozen=True)
class Emitter:
    """Point two-level emitter. ``position`` is relative to the sphere centre."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float]
    d0: float = 1.0

    @property
    def r(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @property
    def e(self) -> np.ndarray:
        return np.asarray(self.orientation, dtype=float)

    @property
    def dipole(self) -> np.ndarray:
        return self.d0 * self.e

    @classmethod
    def make(cls, position, orientation, d0: float = 1.0) -> "Emitter":
        """Build an emitter, normalising the orientation vector."""
        o = np.asarray(orientation, dtype=float)
        o = o / np.linalg.norm(o)
        return cls(tuple(float(x) for x in position), tuple(float(x) for x in o), float(d0))


@dataclass(frozen=True)
class EmitterSet:
    emitters: tuple[Emitter, ...]
    omega0: float

    def __len__(self) -> int:
        return len(self.emitters)

    def __iter__(self):
        return iter(self.emitters)

    def __getitem__(self, i):
        return self.emitters[i]

    @property
    def positions(self) -> np.ndarray:
        return np.array([e.position for e in self.emitters], dtype=float)

    @property
    def orientations(self) -> np.ndarray:
        return np.array([e.orientation for e in self.emitters], dtype=float)

    def with_omega0(self, omega0: float) -> "EmitterSet":
        return replace(self, omega0=float(omega0))


@dataclass(frozen=True)
class NumericalControls:
    """Numerical knobs.

    ``fit_window`` is the half-width of the Lorentzian fit window in eV; when
    ``None`` it defaults to three Drude linewidths.
    """

    max_multipole: int = 25
    fit_window: float | None = None
    fit_samples: int = 121
    time_step_factor: float = 0.01
    eigen_tolerance: float = 1e-8
    include_free_space: bool = True


@dataclass(frozen=True)
class SystemConfig:
    sphere: NanoSphere
    emitters: EmitterSet
    controls: NumericalControls = field(default_factory=NumericalControls)

    @property
    def n_emitters(self) -> int:
        return len(self.emitters)

    @property
    def omega0(self) -> float:
        return self.emitters.omega0

    def with_emitters(self, emitters: EmitterSet) -> "SystemConfig":
        return replace(self, emitters=emitters)

    def with_controls(self, **kwargs) -> "SystemConfig":
        return replace(self, controls=replace(self.controls, **kwargs))


def _check_layout_args(n_emitters: int, h: float) -> None:
    if n_emitters < 1:
        raise ValueError(f"need at least one emitter, got {n_emitters}")
    if not h > 0:
        raise ValueError(f"emitter-surface distance h must be positive, got {h}")


def place_ring(
    n_emitters: int,
    h: float,
    orientation_mode: str,
    sphere: NanoSphere,
    omega0: float = 2.77,
) -> EmitterSet:
    """Equally spaced equatorial ring at distance ``h`` from the surface.

    ``orientation_mode`` is ``"radial"`` (outward normal) or ``"azimuthal"``
    (parallel to the polar axis, i.e. along the dipolar field lines at the
    equator).
    """
    _check_layout_args(n_emitters, h)
    if orientation_mode not in ("radial", "azimuthal"):
        raise ValueError(f"unknown orientation mode {orientation_mode!r}")
    rho = sphere.radius + h
    out = []
    for k in range(n_emitters):
        phi = 2.0 * math.pi * k / n_emitters
        rhat = np.array([math.cos(phi), math.sin(phi), 0.0])
        o = rhat if orientation_mode == "radial" else np.array([0.0, 0.0, 1.0])
        out.append(Emitter.make(rho * rhat, o))
    return EmitterSet(tuple(out), float(omega0))


def _pole_group(m: int, north: bool, rho: float, offset: float, phase: float) -> list[Emitter]:
    out = []
    for k in range(m):
        theta = 0.0 if m == 1 else offset
        if not north:
            theta = math.pi - theta
        phi = phase + 2.0 * math.pi * k / m
        rhat = np.array(
            [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
        )
        out.append(Emitter.make(rho * rhat, rhat))
    return out


def place_polar(
    n_emitters: int,
    h: float,
    sphere: NanoSphere,
    omega0: float = 2.77,
    offset_deg: float = 1.0,
) -> EmitterSet:
    """Radially oriented emitters clustered at the two poles.

    ``ceil(n/2)`` go to the north pole and ``floor(n/2)`` to the south pole.
    A lone emitter sits exactly on its pole; larger groups fan out by
    ``offset_deg`` in polar angle, equally spaced in azimuth.
    """
    _check_layout_args(n_emitters, h)
    rho = sphere.radius + h
    off = math.radians(offset_deg)
    n_north = (n_emitters + 1) // 2
    n_south = n_emitters // 2
    out = _pole_group(n_north, True, rho, off, 0.0)
    out += _pole_group(n_south, False, rho, off, math.pi / max(n_south, 1))
    return EmitterSet(tuple(out), float(omega0))


def place_pair(
    theta: float,
    h: float,
    sphere: NanoSphere,
    orientation_mode: str = "radial",
    omega0: float = 2.77,
) -> EmitterSet:
    """Two emitters at the same distance, separated by polar angle ``theta`` (rad).

    Emitter 1 sits on the north pole; emitter 2 is rotated by ``theta`` in the
    x-z plane. ``"azimuthal"`` orientation means tangent to the x-z great
    circle (the direction of increasing polar angle), ``"perpendicular"``
    means along y, normal to the plane of the pair.
    """
    _check_layout_args(2, h)
    rho = sphere.radius + h
    out = []
    for t in (0.0, float(theta)):
        rhat = np.array([math.sin(t), 0.0, math.cos(t)])
        if orientation_mode == "radial":
            o = rhat
        elif orientation_mode == "azimuthal":
            o = np.array([math.cos(t), 0.0, -math.sin(t)])
        elif orientation_mode == "perpendicular":
            o = np.array([0.0, 1.0, 0.0])
        else:
            raise ValueError(f"unknown orientation mode {orientation_mode!r}")
        out.append(Emitter.make(rho * rhat, o))
    return EmitterSet(tuple(out), float(omega0))


def validate(config: SystemConfig) -> list[str]:
    """Return a list of invariant violations; empty when the config is sound."""
    problems: list[str] = []
    sphere = config.sphere
    metal = sphere.metal
    if not metal.eps_inf >= 1:
        problems.append(f"metal.eps_inf: must be >= 1, got {metal.eps_inf}")
    if not metal.omega_p > 0:
        problems.append(f"metal.omega_p: must be > 0, got {metal.omega_p}")
    if not metal.gamma_p > 0:
        problems.append(f"metal.gamma_p: must be > 0, got {metal.gamma_p}")
    if not sphere.radius > 0:
        problems.append(f"sphere.radius: must be > 0, got {sphere.radius}")
    if not sphere.eps_d >= 1:
        problems.append(f"sphere.eps_d: must be >= 1, got {sphere.eps_d}")

    ems = config.emitters
    if len(ems) == 0:
        problems.append("emitters: empty emitter set")
    if not ems.omega0 > 0:
        problems.append(f"emitters.omega0: must be > 0, got {ems.omega0}")
    for i, em in enumerate(ems):
        dist = float(np.linalg.norm(em.r))
        if not dist > sphere.radius:
            problems.append(
                f"emitters[{i}].position: emitter inside or on sphere (|r|={dist:g} <= R={sphere.radius:g})"
            )
        norm = float(np.linalg.norm(em.e))
        if abs(norm - 1.0) > _NORM_TOL:
            problems.append(f"emitters[{i}].orientation: not normalized (|o|={norm:g})")
        if not em.d0 > 0:
            problems.append(f"emitters[{i}].d0: must be > 0, got {em.d0}")

    c = config.controls
    if c.max_multipole < 1:
        problems.append(f"controls.max_multipole: must be >= 1, got {c.max_multipole}")
    if c.fit_window is not None and not c.fit_window > 0:
        problems.append(f"controls.fit_window: must be > 0, got {c.fit_window}")
    if c.fit_samples < 5:
        problems.append(f"controls.fit_samples: must be >= 5, got {c.fit_samples}")
    if not c.time_step_factor > 0:
        problems.append(f"controls.time_step_factor: must be > 0, got {c.time_step_factor}")
    if not c.eigen_tolerance > 0:
        problems.append(f"controls.eigen_tolerance: must be > 0, got {c.eigen_tolerance}")
    return problems


def rotate_z(emitters: Sequence[Emitter], angle: float) -> list[Emitter]:
    """Rotate emitter positions and orientations about the polar axis."""
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return [Emitter(tuple(rot @ e.r), tuple(rot @ e.e), e.d0) for e in emitters]
