"""Lorentzian pseudo-mode description of the nanosphere response.

Each multipole order n is treated as one lossy mode with resonance
``omega_n``, width ``gamma_n``, per-emitter coupling ``g_n`` (eV) and an
overlap matrix ``mu_n`` between emitters. Couplings are extracted from the
single-order spectral density at ``omega_n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, curve_fit

from .geometry import Emitter, NanoSphere, NumericalControls, SystemConfig
from .greens import HBAR_C, _scattered_value, multipole_coefficients

__all__ = [
    "COULOMB",
    "LSPMode",
    "CouplingSet",
    "OverlapMatrix",
    "LowdinTransform",
    "LSPModeSet",
    "FitError",
    "find_resonance",
    "mode_rate",
    "coupling_strength",
    "overlap",
    "overlap_matrix",
    "lowdin",
    "extract_modes",
    "weak_coupling_ratio",
]

# e^2 / (4 pi eps0) in eV nm; dipoles are measured in e nm
COULOMB = 1.43996448

RESIDUAL_LIMIT = 0.05
WEAK_COUPLING_WARN = 0.3


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class LSPMode:
    order: int
    omega_n: float
    gamma_n: float
    fit_residual: float

    @property
    def flagged(self) -> bool:
        return not self.fit_residual < RESIDUAL_LIMIT

    def detuning(self, omega0: float) -> float:
        return self.omega_n - omega0

    def lorentz_weights(self, omega0: float) -> tuple[float, float]:
        """``(gamma_n, delta_n) / (delta_n**2 + (gamma_n/2)**2)``."""
        d = self.detuning(omega0)
        den = d * d + 0.25 * self.gamma_n**2
        return self.gamma_n / den, d / den


@dataclass(frozen=True)
class CouplingSet:
    mode: LSPMode
    g: np.ndarray

    def kappa(self, omega) -> np.ndarray:
        """Complex Lorentzian coupling profile, shape ``(len(omega), n_emitters)``."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))[:, None]
        m = self.mode
        return math.sqrt(m.gamma_n / (2 * math.pi)) * self.g[None, :] / (w - m.omega_n + 0.5j * m.gamma_n)


@dataclass(frozen=True)
class OverlapMatrix:
    order: int
    mu: np.ndarray


@dataclass(frozen=True)
class LowdinTransform:
    eigenvalues: np.ndarray
    transform: np.ndarray
    cross_couplings: np.ndarray
    n_independent: int


def _re_denominator(n: int, sphere: NanoSphere):
    m = sphere.metal

    def f(w):
        eps_re = m.eps_inf - m.omega_p**2 / (w * w + m.gamma_p**2)
        return n * eps_re + (n + 1) * sphere.eps_d

    return f


def _lorentzian(w, amp, centre, width):
    hw = 0.5 * width
    return amp * hw * hw / ((w - centre) ** 2 + hw * hw)


def find_resonance(n: int, sphere: NanoSphere, controls: NumericalControls | None = None) -> LSPMode:
    """Resonance of order ``n`` and its width from a Lorentzian fit.

    The root of ``Re[n eps_m + (n+1) eps_d]`` seeds a three-parameter
    Lorentzian fit of ``Im Delta_n`` on ``root +/- window``; the fitted centre
    and width are returned.
    """
    if n < 1:
        raise ValueError(f"multipole order must be >= 1, got {n}")
    controls = controls or NumericalControls()
    metal = sphere.metal
    f = _re_denominator(n, sphere)
    lo, hi = 1e-6 * metal.omega_p, metal.omega_p
    if f(lo) * f(hi) > 0:
        raise FitError(f"no resonance bracketed for n={n} in (0, omega_p)")
    root = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)

    window = controls.fit_window if controls.fit_window is not None else 3.0 * metal.gamma_p
    w = np.linspace(root - window, root + window, controls.fit_samples)
    w = w[w > 0]
    spec = np.array([multipole_coefficients(sphere, wi, n)[-1].imag for wi in w])
    try:
        (amp, centre, width), _ = curve_fit(
            _lorentzian, w, spec, p0=(float(spec.max()), root, metal.gamma_p), maxfev=20000
        )
    except RuntimeError as exc:
        raise FitError(f"Lorentzian fit failed for n={n}: {exc}") from exc
    resid = float(np.linalg.norm(_lorentzian(w, amp, centre, width) - spec) / np.linalg.norm(spec))
    return LSPMode(order=n, omega_n=float(centre), gamma_n=float(abs(width)), fit_residual=resid)


def mode_rate(mode: LSPMode, ei: Emitter, ej: Emitter, sphere: NanoSphere, omega: float) -> float:
    """Single-order rate ``2 d_i d_j Im[K_n] / (4 pi eps0 eps_d)`` in eV (hbar = 1)."""
    n = mode.order
    val = _scattered_value(ei.r, ei.dipole, ej.r, ej.dipole, sphere, omega, n, n)
    # _scattered_value divides by 4 pi eps_d k0^2; undo the k0^2 and restore units
    k0 = omega / HBAR_C
    return 2.0 * COULOMB * 4.0 * math.pi * k0 * k0 * val.imag


def coupling_strength(mode: LSPMode, e: Emitter, sphere: NanoSphere) -> float:
    """``g = sqrt(pi gamma_n J_n(omega_n) / 2)`` with ``J = Gamma_n / 2 pi``."""
    if mode.flagged:
        warnings.warn(f"mode n={mode.order} has fit residual {mode.fit_residual:.3g}", stacklevel=2)
    if sphere.radius == 0:
        return 0.0
    rate = mode_rate(mode, e, e, sphere, mode.omega_n)
    return math.sqrt(max(rate, 0.0) * mode.gamma_n / 4.0)


def overlap(mode: LSPMode, ei: Emitter, ej: Emitter, sphere: NanoSphere) -> float:
    """Signed modal overlap of two emitters through order ``mode.order``."""
    cross = mode_rate(mode, ei, ej, sphere, mode.omega_n)
    si = mode_rate(mode, ei, ei, sphere, mode.omega_n)
    sj = mode_rate(mode, ej, ej, sphere, mode.omega_n)
    scale = max(abs(si), abs(sj), 1e-300)
    if si <= 1e-14 * scale or sj <= 1e-14 * scale or si <= 0 or sj <= 0:
        raise ValueError(f"vanishing self-coupling to mode n={mode.order}")
    return float(cross / math.sqrt(si * sj))


def overlap_matrix(mode: LSPMode, emitters, sphere: NanoSphere) -> OverlapMatrix:
    ems = list(emitters)
    rates = np.array(
        [[mode_rate(mode, a, b, sphere, mode.omega_n) for b in ems] for a in ems]
    )
    diag = np.diag(rates)
    ok = diag > 0
    denom = np.sqrt(np.outer(np.where(ok, diag, 1.0), np.where(ok, diag, 1.0)))
    mu = np.where(np.outer(ok, ok), rates / denom, 0.0)
    # emitters blind to this order still get a unit self-overlap
    np.fill_diagonal(mu, 1.0)
    return OverlapMatrix(mode.order, 0.5 * (mu + mu.T))


def lowdin(overlaps: OverlapMatrix, couplings: CouplingSet, threshold: float = 1e-10) -> LowdinTransform:
    """Symmetric orthonormalisation of the per-emitter mode operators.

    ``cross_couplings[i, j]`` couples emitter ``i`` to orthonormal mode ``j``;
    modes with eigenvalue below ``threshold * max`` are dropped.
    """
    lam, t = np.linalg.eigh(overlaps.mu)
    if lam.min() < -threshold * max(lam.max(), 1.0):
        raise ValueError(f"overlap matrix not positive semidefinite (min eigenvalue {lam.min():.3g})")
    lam = np.clip(lam, 0.0, None)
    order = np.argsort(lam)[::-1]
    lam, t = lam[order], t[:, order]
    keep = lam > threshold * lam.max()
    g = np.asarray(couplings.g, dtype=float)
    cross = g[:, None] * np.sqrt(lam)[None, :] * t.conj()
    return LowdinTransform(lam, t, cross[:, keep], int(keep.sum()))


@dataclass(frozen=True)
class LSPModeSet:
    """Modes, couplings (eV) and overlaps for one emitter configuration."""

    modes: tuple[LSPMode, ...]
    g: np.ndarray  # (n_modes, n_emitters)
    mu: np.ndarray  # (n_modes, n_emitters, n_emitters)

    def coupling_set(self, k: int) -> CouplingSet:
        return CouplingSet(self.modes[k], self.g[k])

    def overlap_matrix(self, k: int) -> OverlapMatrix:
        return OverlapMatrix(self.modes[k].order, self.mu[k])

    def pairs(self):
        return [(m, self.coupling_set(k)) for k, m in enumerate(self.modes)]


def extract_modes(config: SystemConfig) -> LSPModeSet:
    sphere = config.sphere
    ems = list(config.emitters)
    modes, gs, mus = [], [], []
    for n in range(1, config.controls.max_multipole + 1):
        mode = find_resonance(n, sphere, config.controls)
        if mode.flagged:
            warnings.warn(f"mode n={n} fit residual {mode.fit_residual:.3g} above limit", stacklevel=2)
        modes.append(mode)
        gs.append([coupling_strength(mode, e, sphere) for e in ems])
        mus.append(overlap_matrix(mode, ems, sphere).mu)
    return LSPModeSet(tuple(modes), np.array(gs), np.array(mus))


def weak_coupling_ratio(config: SystemConfig, modes) -> float:
    """Multi-emitter, multi-mode weak-coupling figure of merit.

    ``modes`` is a list of ``(LSPMode, CouplingSet)`` or an ``LSPModeSet``.
    A warning is issued at or above 0.3; no error is raised.
    """
    pairs = modes.pairs() if isinstance(modes, LSPModeSet) else list(modes)
    if not pairs:
        raise ValueError("need at least one mode")
    total = 0.0
    for mode, cs in pairs:
        d = mode.detuning(config.omega0)
        total += float(np.sum(np.asarray(cs.g) ** 2)) / (d * d + 0.25 * mode.gamma_n**2)
    ratio = math.sqrt(total)
    if ratio >= WEAK_COUPLING_WARN:
        warnings.warn(f"weak-coupling ratio {ratio:.3g} >= {WEAK_COUPLING_WARN}", stacklevel=2)
    return ratio
