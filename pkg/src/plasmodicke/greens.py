"""Green-tensor projections for emitters near a Drude nanosphere.

Convention: the field of a dipole ``d`` is ``E = (omega**2 / eps0 c**2) G . d``
so that projections ``d_i . G . d_j`` carry units of 1/nm (for unit dipoles).
The scattered part is the quasi-static multipole series of the sphere; the
free part is the retarded dyadic Green function of the host medium with the
divergent real part at coincident points dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .geometry import DrudeModel, Emitter, NanoSphere, NumericalControls

__all__ = [
    "HBAR_C",
    "GreenProjection",
    "Permittivity",
    "ResonanceError",
    "wavenumber",
    "drude_permittivity",
    "multipole_coefficient",
    "multipole_coefficients",
    "multipole_kernels",
    "scattered_projection",
    "free_projection",
    "total_projection",
    "scattered_tensor",
    "free_tensor",
    "effective_dipole",
]

HBAR_C = 197.3269804  # eV nm

Mode = Union[int, Literal["all"]]


class ResonanceError(ArithmeticError):
    """Raised when a multipole denominator vanishes (lossless resonance)."""


@dataclass(frozen=True)
class Permittivity:
    value: complex
    frequency: float


@dataclass(frozen=True)
class GreenProjection:
    value: complex
    mode_order: Mode
    part: Literal["scattered", "free", "total"]


def wavenumber(omega: float, eps_d: float = 1.0) -> float:
    """Wavenumber in nm^-1 in a medium of permittivity ``eps_d``."""
    return math.sqrt(eps_d) * omega / HBAR_C


def _eps(metal: DrudeModel, omega) -> complex | np.ndarray:
    return metal.eps_inf - metal.omega_p**2 / (omega**2 + 1j * metal.gamma_p * omega)


def drude_permittivity(metal: DrudeModel, omega: float) -> Permittivity:
    if not omega > 0:
        raise ValueError(f"frequency must be positive, got {omega}")
    return Permittivity(complex(_eps(metal, omega)), float(omega))


def _coefficient(n, eps_m, eps_d):
    den = n * eps_m + (n + 1) * eps_d
    return n * (eps_m - eps_d), den


def multipole_coefficient(n: int, sphere: NanoSphere, omega: float) -> complex:
    """Quasi-static response ``n (eps_m - eps_d) / (n eps_m + (n+1) eps_d)``."""
    if n < 1:
        raise ValueError(f"multipole order must be >= 1, got {n}")
    eps_m = drude_permittivity(sphere.metal, omega).value
    num, den = _coefficient(n, eps_m, sphere.eps_d)
    if abs(den) < 1e-14 * max(abs(num), 1.0):
        raise ResonanceError(f"multipole n={n} denominator vanishes at omega={omega} eV")
    return complex(num / den)


def multipole_coefficients(sphere: NanoSphere, omega: float, n_max: int) -> np.ndarray:
    """Vector of responses for orders 1..n_max."""
    if not omega > 0:
        raise ValueError(f"frequency must be positive, got {omega}")
    n = np.arange(1, n_max + 1)
    eps_m = _eps(sphere.metal, omega)
    num, den = _coefficient(n, eps_m, sphere.eps_d)
    if np.any(np.abs(den) < 1e-14 * np.maximum(np.abs(num), 1.0)):
        raise ResonanceError(f"multipole denominator vanishes at omega={omega} eV")
    return num / den


def _legendre_with_derivs(c: float, n_max: int):
    """P_n, P_n', P_n'' at ``c`` for n = 0..n_max by upward recurrence."""
    p = np.zeros(n_max + 1)
    dp = np.zeros(n_max + 1)
    d2p = np.zeros(n_max + 1)
    p[0] = 1.0
    if n_max >= 1:
        p[1] = c
        dp[1] = 1.0
    for n in range(1, n_max):
        p[n + 1] = ((2 * n + 1) * c * p[n] - n * p[n - 1]) / (n + 1)
        dp[n + 1] = dp[n - 1] + (2 * n + 1) * p[n]
        d2p[n + 1] = d2p[n - 1] + (2 * n + 1) * dp[n]
    return p, dp, d2p


def multipole_kernels(
    ra: np.ndarray, ea: np.ndarray, rb: np.ndarray, eb: np.ndarray, radius: float, n_max: int
) -> np.ndarray:
    """Geometric factors ``(ea.grad_a)(eb.grad_b) R^(2n+1) P_n(cos g) / (ra^(n+1) rb^(n+1))``.

    Returns an array over n = 1..n_max. Multiplying by the multipole
    responses and summing gives the scattered potential-derivative kernel.
    """
    ra = np.asarray(ra, dtype=float)
    rb = np.asarray(rb, dtype=float)
    ea = np.asarray(ea, dtype=float)
    eb = np.asarray(eb, dtype=float)
    u = float(np.linalg.norm(ra))
    v = float(np.linalg.norm(rb))
    ahat = ra / u
    bhat = rb / v
    c = float(np.clip(ahat @ bhat, -1.0, 1.0))
    alpha = ea @ ahat
    beta = ea @ bhat
    gamma = eb @ bhat
    delta = eb @ ahat
    eps = ea @ eb

    p, dp, d2p = _legendre_with_derivs(c, n_max)
    n = np.arange(1, n_max + 1)
    p, dp, d2p = p[1:], dp[1:], d2p[1:]

    q = -(n + 1) * p * alpha + dp * (beta - c * alpha)
    s = (
        -(n + 1) * dp * alpha * (delta - c * gamma)
        + d2p * (delta - c * gamma) * (beta - c * alpha)
        + dp * ((eps - beta * gamma) - alpha * (delta - c * gamma))
    )
    bracket = -(n + 1) * gamma * q + s
    x = radius * radius / (u * v)
    # R^(2n+1) / (u v)^(n+2) written to avoid overflow at large n
    scale = x ** (n + 2) / radius**3
    return scale * bracket


def _check_outside(e: Emitter, sphere: NanoSphere) -> None:
    if not np.linalg.norm(e.r) > sphere.radius:
        raise ValueError(f"emitter at {e.position} is inside or on the sphere")


def _mode_range(mode: Mode, n_max: int) -> tuple[int, int]:
    if mode == "all":
        return 1, n_max
    if not isinstance(mode, (int, np.integer)) or mode < 1 or mode > n_max:
        raise ValueError(f"mode must be 'all' or in 1..{n_max}, got {mode!r}")
    return int(mode), int(mode)


def _scattered_value(ra, da, rb, db, sphere: NanoSphere, omega: float, lo: int, hi: int) -> complex:
    if sphere.radius == 0:
        return 0j
    geo = multipole_kernels(ra, da, rb, db, sphere.radius, hi)[lo - 1 : hi]
    resp = multipole_coefficients(sphere, omega, hi)[lo - 1 : hi]
    k0 = wavenumber(omega)
    return complex(np.sum(resp * geo) / (4.0 * math.pi * sphere.eps_d * k0 * k0))


def scattered_projection(
    ei: Emitter,
    ej: Emitter,
    omega: float,
    mode: Mode = "all",
    controls: NumericalControls | None = None,
    *,
    sphere: NanoSphere,
) -> GreenProjection:
    """``d_i . G_sc(r_i, r_j, omega) . d_j`` from the quasi-static multipole series.

    ``mode="all"`` sums orders 1..controls.max_multipole; an integer selects
    a single order.
    """
    controls = controls or NumericalControls()
    _check_outside(ei, sphere)
    _check_outside(ej, sphere)
    lo, hi = _mode_range(mode, controls.max_multipole)
    val = _scattered_value(ei.r, ei.dipole, ej.r, ej.dipole, sphere, omega, lo, hi)
    return GreenProjection(val, mode, "scattered")


def _free_value(ra, da, rb, db, k: float) -> complex:
    sep = np.asarray(rb, dtype=float) - np.asarray(ra, dtype=float)
    r = float(np.linalg.norm(sep))
    if r == 0.0:
        return 1j * k / (6.0 * math.pi) * complex(np.dot(da, db))
    rhat = sep / r
    kr = k * r
    pref = np.exp(1j * kr) / (4.0 * math.pi * r)
    a = 1.0 + (1j * kr - 1.0) / kr**2
    b = (3.0 - 3.0j * kr - kr**2) / kr**2
    return complex(pref * (a * np.dot(da, db) + b * np.dot(da, rhat) * np.dot(db, rhat)))


def free_projection(ei: Emitter, ej: Emitter, omega: float, eps_d: float = 1.0) -> GreenProjection:
    """Retarded free-space projection; at coincident points only ``i k / 6 pi`` survives."""
    k = wavenumber(omega, eps_d)
    return GreenProjection(_free_value(ei.r, ei.dipole, ej.r, ej.dipole, k), "all", "free")


def total_projection(
    ei: Emitter,
    ej: Emitter,
    omega: float,
    sphere: NanoSphere,
    mode: Mode = "all",
    controls: NumericalControls | None = None,
) -> GreenProjection:
    sc = scattered_projection(ei, ej, omega, mode, controls, sphere=sphere).value
    fr = free_projection(ei, ej, omega, sphere.eps_d).value
    return GreenProjection(sc + fr, mode, "total")


_BASIS = np.eye(3)


def scattered_tensor(ra, rb, sphere: NanoSphere, omega: float, lo: int, hi: int) -> np.ndarray:
    """3x3 scattered Green tensor restricted to multipole orders lo..hi."""
    out = np.empty((3, 3), dtype=complex)
    for a in range(3):
        for b in range(3):
            out[a, b] = _scattered_value(ra, _BASIS[a], rb, _BASIS[b], sphere, omega, lo, hi)
    return out


def free_tensor(ra, rb, k: float) -> np.ndarray:
    out = np.empty((3, 3), dtype=complex)
    for a in range(3):
        for b in range(3):
            out[a, b] = _free_value(ra, _BASIS[a], rb, _BASIS[b], k)
    return out


def effective_dipole(e: Emitter, sphere: NanoSphere, omega: float) -> np.ndarray:
    """Emitter dipole plus the dipole it induces in the sphere (quasi-static)."""
    _check_outside(e, sphere)
    d = e.dipole.astype(complex)
    if sphere.radius == 0:
        return d
    r = float(np.linalg.norm(e.r))
    rhat = e.r / r
    delta1 = multipole_coefficient(1, sphere, omega)
    return d + sphere.radius**3 * delta1 * (3.0 * np.dot(d, rhat) * rhat - d) / r**3
