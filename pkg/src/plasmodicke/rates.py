"""Collective decay/shift matrices and the classical single-excitation eigenproblem.

All matrices are expressed in units of the free-space rate ``Gamma_0`` of an
emitter with the first emitter's dipole magnitude, at ``omega0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence, Union

import numpy as np
import scipy.linalg

from .geometry import EmitterSet, SystemConfig, validate
from .greens import (
    HBAR_C,
    _free_value,
    _scattered_value,
    effective_dipole,
    free_tensor,
    scattered_tensor,
    wavenumber,
)
from .modes import COULOMB, LSPModeSet, extract_modes

__all__ = [
    "RateMatrices",
    "CollectiveEigenstate",
    "ConvergenceError",
    "free_space_rate",
    "gamma_matrix_green",
    "gamma_delta_matrices_modes",
    "radiative_matrix",
    "collective_rates",
    "route_discrepancy",
    "classical_eigenstates",
    "single_emitter_rate",
    "brightness_report",
]

Mode = Union[int, Literal["all"]]


class ConvergenceError(RuntimeError):
    pass


def free_space_rate(omega: float, d0: float = 1.0, eps_d: float = 1.0) -> float:
    """Free-space spontaneous emission rate in eV for a dipole of ``d0`` e nm."""
    k0 = omega / HBAR_C
    return 4.0 / 3.0 * COULOMB * k0 * k0 * wavenumber(omega, eps_d) * d0 * d0


@dataclass(frozen=True)
class RateMatrices:
    gamma: np.ndarray
    delta: np.ndarray
    gamma_rad: np.ndarray
    omega0: float
    route: Literal["green", "mode_sum"]
    n_modes: int = 0
    gamma0_ev: float = float("nan")
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_emitters(self) -> int:
        return self.gamma.shape[0]

    def scaled(self, factor: float) -> "RateMatrices":
        """Copy with all rate matrices multiplied by ``factor``."""
        return replace(self, gamma=self.gamma * factor, delta=self.delta * factor, gamma_rad=self.gamma_rad * factor)

    def check(self, tol: float = 1e-9) -> list[str]:
        """Invariant violations, empty when the matrices are consistent."""
        out = []
        g = self.gamma
        for name, m in (("gamma", g), ("delta", self.delta), ("gamma_rad", self.gamma_rad)):
            if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12 * max(np.abs(m).max(), 1.0)):
                out.append(f"{name}: not symmetric")
        ev = np.linalg.eigvalsh(g)
        if ev.min() < -tol * max(ev.max(), 1.0):
            out.append(f"gamma: not PSD (min eigenvalue {ev.min():.3g})")
        if np.any(np.diag(g) <= 0):
            out.append("gamma: non-positive diagonal")
        evr = np.linalg.eigvalsh(self.gamma_rad)
        if evr.min() < -tol * max(evr.max(), 1.0):
            out.append(f"gamma_rad: not PSD (min eigenvalue {evr.min():.3g})")
        if np.any(np.diag(self.gamma_rad) > np.diag(g) * (1 + 1e-12)):
            out.append("gamma_rad: radiative rate exceeds total rate")
        return out


@dataclass(frozen=True)
class CollectiveEigenstate:
    dipole_pattern: np.ndarray  # (3 * n_emitters,) complex, unit norm
    gamma_tot: float
    delta_tot: float
    gamma1: float
    residual: float

    @property
    def ratio_gamma0(self) -> float:
        return self.gamma_tot

    @property
    def ratio_gamma1(self) -> float:
        return self.gamma_tot / self.gamma1

    def dipoles(self) -> np.ndarray:
        return self.dipole_pattern.reshape(-1, 3)


def _require_valid(config: SystemConfig) -> None:
    problems = validate(config)
    if problems:
        raise ValueError("invalid configuration: " + "; ".join(problems))


def _reference_d0(emitters: EmitterSet) -> float:
    return emitters[0].d0


def _mode_range(mode: Mode, n_max: int) -> tuple[int, int]:
    if mode == "all":
        return 1, n_max
    if not 1 <= int(mode) <= n_max:
        raise ValueError(f"mode must be 'all' or in 1..{n_max}, got {mode!r}")
    return int(mode), int(mode)


def _free_gamma(config: SystemConfig) -> np.ndarray:
    """Free-space part; off-diagonal terms only when enabled in the controls."""
    ems = config.emitters
    k = wavenumber(config.omega0, config.sphere.eps_d)
    dref = _reference_d0(ems)
    n = len(ems)
    out = np.zeros((n, n))
    for i, a in enumerate(ems):
        for j, b in enumerate(ems):
            if i != j and not config.controls.include_free_space:
                continue
            out[i, j] = _free_value(a.r, a.dipole, b.r, b.dipole, k).imag
    return 6.0 * math.pi / k * out / dref**2


def gamma_matrix_green(config: SystemConfig, mode: Mode = "all", include_free: bool = True) -> RateMatrices:
    """``Gamma_jk`` from ``Im[d_j . G(r_j, r_k, omega0) . d_k]``.

    ``mode`` restricts the scattered part to one multipole order. The shift
    matrix is left at zero on this route.
    """
    _require_valid(config)
    ems = config.emitters
    sphere = config.sphere
    omega0 = config.omega0
    lo, hi = _mode_range(mode, config.controls.max_multipole)
    k = wavenumber(omega0, sphere.eps_d)
    dref = _reference_d0(ems)
    n = len(ems)
    sc = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            a, b = ems[i], ems[j]
            sc[i, j] = sc[j, i] = _scattered_value(a.r, a.dipole, b.r, b.dipole, sphere, omega0, lo, hi).imag
    gamma = 6.0 * math.pi / k * sc / dref**2
    if include_free:
        gamma = gamma + _free_gamma(config)
    gamma = 0.5 * (gamma + gamma.T)
    return RateMatrices(
        gamma=gamma,
        delta=np.zeros_like(gamma),
        gamma_rad=radiative_matrix(config).gamma_rad,
        omega0=omega0,
        route="green",
        n_modes=hi - lo + 1,
        gamma0_ev=free_space_rate(omega0, dref, sphere.eps_d),
        meta={"mode": mode},
    )


def gamma_delta_matrices_modes(
    config: SystemConfig, modes: LSPModeSet | None = None, include_free: bool = True
) -> RateMatrices:
    """Mode-sum ``Gamma_jk`` and ``Delta_jk`` from the Lorentzian pseudo-modes."""
    _require_valid(config)
    if modes is None:
        modes = extract_modes(config)
    if len(modes.modes) == 0:
        raise ValueError("no modes supplied")
    n = config.n_emitters
    if modes.g.shape[1] != n:
        raise ValueError(f"mode set built for {modes.g.shape[1]} emitters, config has {n}")
    omega0 = config.omega0
    dref = _reference_d0(config.emitters)
    g0 = free_space_rate(omega0, dref, config.sphere.eps_d)
    gamma = np.zeros((n, n))
    delta = np.zeros((n, n))
    for k, mode in enumerate(modes.modes):
        wg, wd = mode.lorentz_weights(omega0)
        gg = np.outer(modes.g[k], modes.g[k]) * modes.mu[k]
        gamma += wg * gg
        delta += wd * gg
    gamma /= g0
    delta /= g0
    if include_free:
        gamma = gamma + _free_gamma(config)
    return RateMatrices(
        gamma=0.5 * (gamma + gamma.T),
        delta=0.5 * (delta + delta.T),
        gamma_rad=radiative_matrix(config).gamma_rad,
        omega0=omega0,
        route="mode_sum",
        n_modes=len(modes.modes),
        gamma0_ev=g0,
        meta={"modes": modes},
    )


def radiative_matrix(config: SystemConfig) -> RateMatrices:
    """Far-field rates from the emitter-plus-induced-dipole moments."""
    ems = config.emitters
    dref = _reference_d0(ems)
    dt = np.array([effective_dipole(e, config.sphere, config.omega0) for e in ems])
    rad = (dt @ dt.conj().T).real / dref**2
    rad = 0.5 * (rad + rad.T)
    zeros = np.zeros_like(rad)
    return RateMatrices(zeros, zeros, rad, config.omega0, "green")


def collective_rates(config: SystemConfig, modes: LSPModeSet | None = None) -> RateMatrices:
    """Green-route decay matrix combined with the mode-sum shift matrix.

    This is what the dynamics uses: the decay rates are exact for the
    quasi-static model, the shifts exist only on the mode-sum route.
    """
    green = gamma_matrix_green(config)
    msum = gamma_delta_matrices_modes(config, modes)
    return replace(green, delta=msum.delta, meta={"modes": msum.meta["modes"], "mode_sum_gamma": msum.gamma})


def route_discrepancy(a: RateMatrices, b: RateMatrices) -> np.ndarray:
    """Entrywise relative difference, scaled by the larger diagonal entry."""
    scale = np.sqrt(np.outer(np.diag(a.gamma), np.diag(a.gamma)))
    return np.abs(a.gamma - b.gamma) / scale


def _green_operator(config: SystemConfig, mode: Mode, include_free: bool) -> np.ndarray:
    """3N x 3N operator whose eigenvalues are ``Delta_tot + i Gamma_tot / 2`` (Gamma_0 units)."""
    ems = config.emitters
    sphere = config.sphere
    omega0 = config.omega0
    lo, hi = _mode_range(mode, config.controls.max_multipole)
    k = wavenumber(omega0, sphere.eps_d)
    n = len(ems)
    op = np.zeros((3 * n, 3 * n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            blk = scattered_tensor(ems[i].r, ems[j].r, sphere, omega0, lo, hi)
            if include_free:
                if i == j:
                    blk = blk + 1j * k / (6.0 * math.pi) * np.eye(3)
                elif config.controls.include_free_space:
                    blk = blk + free_tensor(ems[i].r, ems[j].r, k)
            blk = blk * ems[i].d0 * ems[j].d0
            op[3 * i : 3 * i + 3, 3 * j : 3 * j + 3] = blk
            op[3 * j : 3 * j + 3, 3 * i : 3 * i + 3] = blk.T
    return 3.0 * math.pi / k * op / _reference_d0(ems) ** 2


def single_emitter_rate(config: SystemConfig, index: int = 0, mode: Mode = "all", include_free: bool | None = None) -> float:
    """Decay rate of one emitter of the set, alone in front of the sphere."""
    if include_free is None:
        include_free = mode == "all"
    alone = config.with_emitters(EmitterSet((config.emitters[index],), config.omega0))
    return float(gamma_matrix_green(alone, mode, include_free).gamma[0, 0])


def classical_eigenstates(
    config: SystemConfig,
    mode: Mode = "all",
    include_free: bool | None = None,
    fixed_orientation: bool = False,
) -> list[CollectiveEigenstate]:
    """Coupled-dipole eigenstates sorted by decay rate, brightest first.

    Single-mode runs (``mode`` an integer) leave the free-space part out by
    default so the response is that of one multipole alone. With
    ``fixed_orientation`` each dipole is held along its configured direction
    and only the N complex amplitudes are solved for.
    """
    _require_valid(config)
    if include_free is None:
        include_free = mode == "all"
    op = _green_operator(config, mode, include_free)
    if fixed_orientation:
        n = config.n_emitters
        proj = np.zeros((3 * n, n))
        for i, e in enumerate(config.emitters):
            proj[3 * i : 3 * i + 3, i] = e.e
        op = proj.T @ op @ proj
    try:
        lam, vecs = scipy.linalg.eig(op)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    scale = max(np.linalg.norm(op, 2), 1e-300)
    gamma1 = single_emitter_rate(config, 0, mode, include_free)
    states = []
    for m in range(lam.size):
        v = vecs[:, m] / np.linalg.norm(vecs[:, m])
        res = float(np.linalg.norm(op @ v - lam[m] * v) / scale)
        if res > config.controls.eigen_tolerance:
            raise ConvergenceError(f"eigenvector residual {res:.3g} above tolerance")
        if fixed_orientation:
            v = proj @ v
        states.append(CollectiveEigenstate(v, 2.0 * lam[m].imag, lam[m].real, gamma1, res))
    states.sort(key=lambda s: -s.gamma_tot)
    return states


def _pattern(state: CollectiveEigenstate, config: SystemConfig) -> str:
    d = state.dipoles()
    labels = []
    for e, di in zip(config.emitters, d):
        w = np.abs(di) ** 2
        if w.sum() < 1e-6 / len(d):
            labels.append("0")
            continue
        rhat = e.r / np.linalg.norm(e.r)
        frac = float(np.abs(rhat @ di) ** 2 / w.sum())
        labels.append("R" if frac > 0.9 else "T" if frac < 0.1 else "M")
    return "".join(labels)


def brightness_report(
    states: Sequence[CollectiveEigenstate],
    config: SystemConfig | None = None,
    reference: Literal["free", "single_emitter"] = "single_emitter",
    top: int | None = None,
) -> list[dict]:
    """Table rows ``rank, gamma_over_gamma0, gamma_over_gamma1, pattern``.

    ``reference`` selects which ratio is used for ranking.
    """
    if not states:
        raise ValueError("no states")
    key = (lambda s: -s.ratio_gamma1) if reference == "single_emitter" else (lambda s: -s.ratio_gamma0)
    ordered = sorted(states, key=key)
    if top is not None:
        ordered = ordered[:top]
    rows = []
    for rank, s in enumerate(ordered, start=1):
        rows.append(
            {
                "rank": rank,
                "gamma_over_gamma0": s.ratio_gamma0,
                "gamma_over_gamma1": s.ratio_gamma1,
                "delta_over_gamma0": s.delta_tot,
                "pattern": _pattern(s, config) if config is not None else "",
            }
        )
    return rows
