"""Master-equation dynamics of N two-level emitters with collective rates.

Product basis states are bit tuples (1 = excited) ordered by excitation
number, most excited first, ties broken lexicographically with ``e`` before
``g``. Density matrices are vectorised row-major, so ``vec(A rho B) =
(A kron B.T) vec(rho)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .rates import ConvergenceError, RateMatrices

__all__ = [
    "MAX_EMITTERS",
    "InvariantError",
    "OperatorSet",
    "DensityOperator",
    "Liouvillian",
    "DickeBasis",
    "DickeLadderRates",
    "EmissionTrace",
    "build_operators",
    "build_liouvillian",
    "dissipator_superoperator",
    "excited_state",
    "evolve",
    "emission_trace",
    "simulate",
    "ideal_cascade",
    "ideal_rates",
    "dicke_state",
    "extended_dicke_rates",
    "two_emitter_analytic",
]

MAX_EMITTERS = 10

TRACE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8


class InvariantError(ArithmeticError):
    """Density-operator invariant broken beyond tolerance after refinement."""


def _basis_states(n: int) -> list[tuple[int, ...]]:
    states = list(itertools.product((1, 0), repeat=n))
    states.sort(key=lambda s: (-sum(s), tuple(1 - b for b in s)))
    return states


@dataclass(frozen=True)
class OperatorSet:
    n_emitters: int
    states: tuple[tuple[int, ...], ...]
    lowering: tuple[sp.csr_matrix, ...]

    @property
    def dim(self) -> int:
        return len(self.states)

    @cached_property
    def raising(self) -> tuple[sp.csr_matrix, ...]:
        return tuple(s.conj().T.tocsr() for s in self.lowering)

    @cached_property
    def j_minus(self) -> sp.csr_matrix:
        return sum(self.lowering[1:], self.lowering[0]).tocsr()

    @cached_property
    def j_plus(self) -> sp.csr_matrix:
        return self.j_minus.conj().T.tocsr()

    @cached_property
    def excitations(self) -> np.ndarray:
        return np.array([sum(s) for s in self.states])

    def label(self, index: int) -> str:
        return "".join("e" if b else "g" for b in self.states[index])

    def index(self, label: str) -> int:
        bits = tuple(1 if c == "e" else 0 for c in label)
        return self.states.index(bits)

    def sector(self, k: int) -> list[str]:
        """Labels of the basis states with ``k`` excitations, in basis order."""
        return [self.label(i) for i in range(self.dim) if self.excitations[i] == k]

    def rate_operator(self, gamma: np.ndarray) -> sp.csr_matrix:
        """``sum_ij gamma_ij sigma_+^(i) sigma_-^(j)``."""
        n = self.n_emitters
        out = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for i in range(n):
            for j in range(n):
                if gamma[i, j] != 0:
                    out = out + gamma[i, j] * (self.raising[i] @ self.lowering[j])
        return out.tocsr()


def build_operators(n_emitters: int) -> OperatorSet:
    if not 1 <= n_emitters <= MAX_EMITTERS:
        raise ValueError(f"number of emitters must be in 1..{MAX_EMITTERS}, got {n_emitters}")
    states = _basis_states(n_emitters)
    pos = {s: i for i, s in enumerate(states)}
    dim = len(states)
    lowering = []
    for site in range(n_emitters):
        rows, cols = [], []
        for col, s in enumerate(states):
            if s[site] == 1:
                t = list(s)
                t[site] = 0
                rows.append(pos[tuple(t)])
                cols.append(col)
        lowering.append(sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(dim, dim), dtype=complex))
    return OperatorSet(n_emitters, tuple(states), tuple(lowering))


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    time: float = 0.0

    def violations(self) -> list[str]:
        m = self.matrix
        out = []
        herm = float(np.abs(m - m.conj().T).max())
        if herm > HERMITIAN_TOL:
            out.append(f"not Hermitian ({herm:.3g})")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            out.append(f"trace {tr.real:.12g} != 1")
        ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if ev.min() < -POSITIVITY_TOL:
            out.append(f"negative eigenvalue {ev.min():.3g}")
        return out

    def vec(self) -> np.ndarray:
        return self.matrix.reshape(-1)


def excited_state(ops: OperatorSet) -> DensityOperator:
    """``|e...e><e...e|``; index 0 in the basis ordering."""
    rho = np.zeros((ops.dim, ops.dim), dtype=complex)
    rho[0, 0] = 1.0
    return DensityOperator(rho)


def dissipator_superoperator(gamma: np.ndarray, ops: OperatorSet) -> sp.csr_matrix:
    """Vectorised ``sum_jk gamma_jk D_jk`` (row-major vectorisation)."""
    dim = ops.dim
    eye = sp.identity(dim, dtype=complex, format="csr")
    n = ops.n_emitters
    jump = sp.csr_matrix((dim * dim, dim * dim), dtype=complex)
    for j in range(n):
        for k in range(n):
            if gamma[j, k] != 0:
                jump = jump + gamma[j, k] * sp.kron(ops.lowering[j], ops.lowering[k].conj(), format="csr")
    # sum_jk gamma_jk sigma_+^(k) sigma_-^(j)
    a = ops.rate_operator(np.asarray(gamma).T)
    return (jump - 0.5 * sp.kron(a, eye) - 0.5 * sp.kron(eye, a.T)).tocsr()


@dataclass(frozen=True)
class Liouvillian:
    matrix: sp.csr_matrix
    rates: RateMatrices
    ops: OperatorSet

    @property
    def dim(self) -> int:
        return self.ops.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ rho.reshape(-1)).reshape(rho.shape)

    def max_rate(self) -> float:
        ev = np.linalg.eigvalsh(self.rates.gamma)
        return float(max(abs(ev).max(), np.abs(self.rates.delta).max() if self.rates.delta.size else 0.0, 1e-300))


def build_liouvillian(rates: RateMatrices, ops: OperatorSet) -> Liouvillian:
    gamma = np.asarray(rates.gamma, dtype=float)
    delta = np.asarray(rates.delta, dtype=float)
    n = ops.n_emitters
    if gamma.shape != (n, n) or delta.shape != (n, n):
        raise ValueError(f"rate matrices have shape {gamma.shape}, expected {(n, n)}")
    scale = max(np.abs(gamma).max(), np.abs(delta).max(), 1e-300)
    if not np.allclose(gamma, gamma.T, atol=1e-12 * scale) or not np.allclose(delta, delta.T, atol=1e-12 * scale):
        raise ValueError("rate matrices must be symmetric")
    dim = ops.dim
    eye = sp.identity(dim, dtype=complex, format="csr")
    # H = -sum_jk delta_jk sigma_+^(k) sigma_-^(j)
    ham = -ops.rate_operator(delta.T)
    unitary = -1j * (sp.kron(ham, eye) - sp.kron(eye, ham.T))
    mat = (unitary + dissipator_superoperator(gamma, ops)).tocsr()
    mat.eliminate_zeros()
    return Liouvillian(mat, rates, ops)


def _block_support(ops: OperatorSet) -> np.ndarray:
    """Vectorised indices of elements between states of equal excitation number.

    This subspace is invariant under the Liouvillian: the Hamiltonian
    conserves excitations and every jump lowers both sides by one.
    """
    exc = ops.excitations
    return np.flatnonzero((exc[:, None] == exc[None, :]).reshape(-1))


def _refined_solve(mat, y0: np.ndarray, t_grid: np.ndarray, max_step: float, rtol: float, atol: float):
    def rhs(_t, y):
        return mat @ y

    sol = solve_ivp(
        rhs,
        (t_grid[0], t_grid[-1]),
        y0,
        method="DOP853",
        t_eval=t_grid,
        rtol=rtol,
        atol=atol,
        max_step=max_step,
    )
    if not sol.success:
        raise ConvergenceError(f"integrator failed: {sol.message}")
    return sol.y.T


def evolve(
    liouv: Liouvillian,
    rho0: DensityOperator,
    t_grid,
    time_step_factor: float = 0.01,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_refinements: int = 3,
) -> list[DensityOperator]:
    """Integrate the master equation on ``t_grid`` (same time unit as the rates).

    Steps are capped at ``time_step_factor / max rate``. If any snapshot
    breaks the density-operator invariants the step cap and tolerances are
    tightened tenfold, up to ``max_refinements`` times. Initial states without
    coherences between different excitation numbers are propagated in that
    invariant subspace only.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    bad = rho0.violations()
    if bad:
        raise ValueError("invalid initial state: " + "; ".join(bad))
    dim = liouv.dim
    y_full = rho0.vec().astype(complex)
    if liouv.matrix.nnz == 0 or t_grid.size == 1:
        return [DensityOperator(rho0.matrix.copy(), float(t)) for t in t_grid]

    support = _block_support(liouv.ops)
    outside = np.ones(dim * dim, dtype=bool)
    outside[support] = False
    if np.any(y_full[outside] != 0):
        support = np.arange(dim * dim)
    mat = liouv.matrix[support][:, support].tocsr()
    y0 = y_full[support]

    max_step = time_step_factor / liouv.max_rate()
    last = ""
    for _attempt in range(max_refinements + 1):
        ys = _refined_solve(mat, y0, t_grid, max_step, rtol, atol)
        traj = []
        for y, t in zip(ys, t_grid):
            full = np.zeros(dim * dim, dtype=complex)
            full[support] = y
            traj.append(DensityOperator(full.reshape(dim, dim), float(t)))
        problems = [(r.time, v) for r in traj for v in r.violations()]
        if not problems:
            return traj
        last = f"t={problems[0][0]:.4g}: {problems[0][1]}"
        max_step /= 10.0
        rtol = max(rtol / 10.0, 1e-13)
        atol = max(atol / 10.0, 1e-15)
    raise InvariantError(f"density-operator invariants broken after {max_refinements} refinements ({last})")


@dataclass(frozen=True)
class EmissionTrace:
    """Emission observables; times in 1/gamma_ref and rates in gamma_ref."""

    t: np.ndarray
    W: np.ndarray
    WP: np.ndarray
    WC: np.ndarray
    Wrad: np.ndarray
    populations: np.ndarray  # (len(t), n_emitters + 1), index = excitation number
    gamma_ref: float

    @property
    def eta(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.abs(self.W) > 0, self.Wrad / self.W, np.nan)

    @property
    def n_emitters(self) -> int:
        return self.populations.shape[1] - 1

    def peak(self) -> tuple[float, float]:
        k = int(np.argmax(self.W))
        return float(self.t[k]), float(self.W[k])


def simulate(
    rates: RateMatrices,
    t_grid,
    gamma_ref: float | None = None,
    time_step_factor: float = 0.01,
    ops: OperatorSet | None = None,
) -> tuple[EmissionTrace, list[DensityOperator]]:
    """Evolve from the fully excited state; ``t_grid`` in units of 1/gamma_ref.

    ``gamma_ref`` defaults to the first emitter's decay rate.
    """
    if gamma_ref is None:
        gamma_ref = float(rates.gamma[0, 0])
    scaled = rates.scaled(1.0 / gamma_ref)
    ops = ops or build_operators(rates.n_emitters)
    liouv = build_liouvillian(scaled, ops)
    traj = evolve(liouv, excited_state(ops), t_grid, time_step_factor)
    return emission_trace(traj, scaled, ops, gamma_ref=1.0), traj


def emission_trace(
    traj: list[DensityOperator], rates: RateMatrices, ops: OperatorSet | None = None, gamma_ref: float | None = None
) -> EmissionTrace:
    """Collective emission rate and its population/coherence split along ``traj``.

    The population part collects the diagonal of the rate operator in the
    product basis, the coherence part everything else.
    """
    if not traj:
        raise ValueError("empty trajectory")
    n = rates.n_emitters
    ops = ops or build_operators(n)
    if gamma_ref is None:
        gamma_ref = float(rates.gamma[0, 0])
    rate_op = ops.rate_operator(rates.gamma).toarray()
    rad_op = ops.rate_operator(rates.gamma_rad).toarray()
    diag = np.real(np.diag(rate_op))
    offdiag = rate_op - np.diag(np.diag(rate_op))
    exc = ops.excitations
    t = np.array([r.time for r in traj])
    w = np.empty(t.size)
    wp = np.empty(t.size)
    wc = np.empty(t.size)
    wrad = np.empty(t.size)
    pops = np.zeros((t.size, n + 1))
    for m, r in enumerate(traj):
        rho = r.matrix
        p = np.real(np.diag(rho))
        w[m] = np.real(np.sum(rate_op * rho.T))
        wp[m] = float(diag @ p)
        wc[m] = np.real(np.sum(offdiag * rho.T))
        wrad[m] = np.real(np.sum(rad_op * rho.T))
        pops[m] = np.bincount(exc, weights=p, minlength=n + 1)
    return EmissionTrace(t * gamma_ref, w / gamma_ref, wp / gamma_ref, wc / gamma_ref, wrad / gamma_ref, pops, gamma_ref)


def ideal_rates(n_emitters: int, gamma1: float = 1.0) -> np.ndarray:
    """``Gamma_M`` for M = J..-J (index 0 is the fully excited state)."""
    j = n_emitters / 2.0
    ms = j - np.arange(n_emitters + 1)
    return (j + ms) * (j - ms + 1) * gamma1


def ideal_cascade(n_emitters: int, gamma1: float, t_grid) -> tuple[np.ndarray, np.ndarray]:
    """Dicke-ladder populations ``rho_M(t)`` (columns M = J..-J) and ``W(t)``.

    Solved exactly through the matrix exponential of the bidiagonal rate
    generator.
    """
    if n_emitters < 1:
        raise ValueError("need at least one emitter")
    t_grid = np.asarray(t_grid, dtype=float)
    rates = ideal_rates(n_emitters, gamma1)
    gen = np.diag(-rates) + np.diag(rates[:-1], -1)
    p0 = np.zeros(n_emitters + 1)
    p0[0] = 1.0
    pops = np.array([scipy.linalg.expm(gen * t) @ p0 for t in t_grid])
    return pops, pops @ rates


def dicke_state(n_emitters: int, m: float, ops: OperatorSet | None = None) -> np.ndarray:
    """``|J, M>`` from repeated collective lowering of ``|e...e>``."""
    j = n_emitters / 2.0
    if not -j - 1e-12 <= m <= j + 1e-12 or abs((j - m) - round(j - m)) > 1e-12:
        raise ValueError(f"M={m} not in the ladder for J={j}")
    ops = ops or build_operators(n_emitters)
    steps = int(round(j - m))
    v = np.zeros(ops.dim, dtype=complex)
    v[0] = 1.0
    for _ in range(steps):
        v = ops.j_minus @ v
    norm = math.sqrt(math.factorial(int(round(j + m))) / (math.factorial(n_emitters) * math.factorial(steps)))
    return norm * v


@dataclass(frozen=True)
class DickeBasis:
    n_emitters: int
    ops: OperatorSet

    @property
    def j(self) -> float:
        return self.n_emitters / 2.0

    @property
    def ms(self) -> np.ndarray:
        return self.j - np.arange(self.n_emitters + 1)

    @cached_property
    def states(self) -> np.ndarray:
        return np.array([dicke_state(self.n_emitters, m, self.ops) for m in self.ms])

    @classmethod
    def build(cls, n_emitters: int) -> "DickeBasis":
        return cls(n_emitters, build_operators(n_emitters))


@dataclass(frozen=True)
class DickeLadderRates:
    ms: np.ndarray
    gamma_m: np.ndarray  # decay rate of |J,M>, M = J..-J
    ladder: np.ndarray  # Gamma_{M -> M-1}, M = J..-J+1
    leak: np.ndarray  # gamma_{M -> alpha}
    feed: np.ndarray  # gamma_{alpha -> M-1}


def extended_dicke_rates(rates: RateMatrices, basis: DickeBasis) -> DickeLadderRates:
    """Transition rates along the Dicke ladder and out of/into it."""
    ops = basis.ops
    if rates.n_emitters != basis.n_emitters:
        raise ValueError("rate matrices and basis disagree on the number of emitters")
    diss = dissipator_superoperator(rates.gamma, ops)
    decay_op = ops.rate_operator(rates.gamma)
    # sum_ij gamma_ij sigma_-^(i) sigma_+^(j)
    feed_op = sum(
        (rates.gamma[i, j] * (ops.lowering[i] @ ops.raising[j]) for i in range(ops.n_emitters) for j in range(ops.n_emitters)),
        sp.csr_matrix((ops.dim, ops.dim), dtype=complex),
    )
    vecs = basis.states
    proj = [np.kron(v, v.conj()) for v in vecs]
    gamma_m = np.array([np.real(v.conj() @ (decay_op @ v)) for v in vecs])
    n = basis.n_emitters
    ladder = np.empty(n)
    feed = np.empty(n)
    for k in range(n):
        ladder[k] = np.real(proj[k + 1].conj() @ (diss @ proj[k]))
        v = vecs[k + 1]
        feed[k] = np.real(v.conj() @ (feed_op @ v)) - ladder[k]
    return DickeLadderRates(basis.ms, gamma_m, ladder, gamma_m[:-1] - ladder, feed)


def _growth(rate: float, a: float, t: np.ndarray) -> np.ndarray:
    """``rate * (exp(-a t) - exp(-rate t)) / (rate - a)`` with the equal-rate limit."""
    d = rate - a
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(np.abs(d * t) > 1e-12, -np.expm1(-d * t) / np.where(d == 0, 1.0, d), t)
    return rate * np.exp(-a * t) * phi


def two_emitter_analytic(gamma1: float, gamma12: float, t_grid, gamma_rad: np.ndarray | None = None):
    """Closed-form populations and emission trace for two identical emitters.

    Returns ``(trace, pops)`` where ``pops`` has keys ``ee, S, A, gg``.
    ``t_grid`` is in units of 1/gamma1 and the trace is normalised to gamma1.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if abs(gamma12) > gamma1 * (1 + 1e-12):
        warnings.warn(f"|gamma12|={abs(gamma12):.3g} exceeds gamma1={gamma1:.3g}", stacklevel=2)
    t = t_grid / gamma1
    gs, ga = gamma1 + gamma12, gamma1 - gamma12
    ree = np.exp(-2.0 * gamma1 * t)
    rs = _growth(gs, 2.0 * gamma1, t)
    ra = _growth(ga, 2.0 * gamma1, t)
    rgg = 1.0 - ree - rs - ra
    w = 2.0 * gamma1 * ree + gs * rs + ga * ra
    wp = gamma1 * (2.0 * ree + rs + ra)
    wc = gamma12 * (rs - ra)
    if gamma_rad is None:
        wrad = np.full_like(w, np.nan)
    else:
        g1r, g12r = gamma_rad[0, 0], gamma_rad[0, 1]
        wrad = g1r * (2.0 * ree + rs + ra) + g12r * (rs - ra)
    pops = np.column_stack([rgg, rs + ra, ree])
    trace = EmissionTrace(t_grid, w / gamma1, wp / gamma1, wc / gamma1, wrad / gamma1, pops, gamma1)
    return trace, {"ee": ree, "S": rs, "A": ra, "gg": rgg}
