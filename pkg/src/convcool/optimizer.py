"""Nonlinear solvers for the optimality system and derivative diagnostics.

The discrete optimality system on interior DOFs is

    kappa A T + C(v) T                 = F
    kappa A q - C(v) q - M (T - <T>)   = 0
    gamma D v - B^T p - G(q, T)        = 0
    B v                                = 0,   with the pressure mean fixed to 0,

where ``G(q, T)`` is the load vector of ``q grad T``.  Picard solves the rows
one after another with the previous velocity frozen; Newton solves the full
linearization for all four fields at once.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import SourceTerm, assemble_vector_load
from .forward import (
    Discretization,
    OptState,
    coupling_jacobian_T,
    initial_guess,
    solve_adjoint,
    solve_linearized_state,
    solve_state,
    solve_stokes,
    transport_by,
)
from .linsolve import Factorization, SolverFailure

log = logging.getLogger(__name__)

# Inner accuracy of the Newton solve.  The update is a correction, so linear
# errors at this level only perturb the iterate far below the stopping test.
NEWTON_RTOL = 1e-8


@dataclass
class AlgorithmConfig:
    kappa: float = 1.0
    gamma: float = 1.0
    eps1: float = 1e-3
    eps2: float = 1e-8
    n1: int = 20
    n2: int = 20

    def __post_init__(self):
        for name in ("kappa", "gamma", "eps1", "eps2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("n1", "n2"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")


@dataclass
class IterationRecord:
    phase: str
    k: int
    J: float
    variance_term: float
    control_term: float
    relative_change: float
    nonlinear_residual: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    state: OptState
    history: list[IterationRecord]
    converged: bool
    J: float


class AlgorithmAborted(RuntimeError):
    """A linear solve failed mid-run; ``history`` holds the records so far."""

    def __init__(self, message, history, state):
        super().__init__(message)
        self.history = history
        self.state = state


# -- cost -------------------------------------------------------------------

def cost(disc: Discretization, state: OptState | None = None):
    """``(J, variance_term, control_term)``.

    ``variance_term = |T - <T>|^2 / 2`` and ``control_term = gamma |grad v|^2 / 2``.
    """
    if state is None:
        raise TypeError("cost() needs a discretization and a state")
    DT = disc.deviation(state.T)
    variance = 0.5 * float(DT @ (disc.mass @ DT))
    control = 0.5 * state.gamma * float(state.v @ (disc.laplacian @ state.v))
    return variance + control, variance, control


def reduced_cost(disc: Discretization, v, f: SourceTerm, kappa: float, gamma: float) -> float:
    """Cost as a function of velocity alone, re-solving the temperature."""
    T = solve_state(disc, v, f, kappa)
    DT = disc.deviation(T)
    return 0.5 * float(DT @ (disc.mass @ DT)) + 0.5 * gamma * float(v @ (disc.laplacian @ v))


# -- residuals ----------------------------------------------------------------

def _residual_blocks(disc: Discretization, state: OptState, f: SourceTerm):
    kappa, gamma = state.kappa, state.gamma
    T, q, v, p = state.T, state.q, state.v, state.p
    C = disc.convection(v)
    AT = kappa * (disc.stiffness @ T)
    Aq = kappa * (disc.stiffness @ q)
    r_state = AT + C @ T - disc.load(f)
    r_adjoint = Aq - C @ q - disc.mass @ disc.deviation(T)
    r_stokes = gamma * (disc.laplacian @ v) - disc.divergence.T @ p - disc.coupling(q, T)
    r_div = -(disc.divergence @ v)
    r_mean = float(disc.mass_row_p1 @ p)
    return (r_state[disc.free_p2], r_adjoint[disc.free_p2],
            r_stokes[disc.free_velocity], r_div, r_mean)


def optimality_residual(disc: Discretization, state: OptState, f: SourceTerm):
    """Euclidean norms of the state, adjoint and Stokes-row residuals."""
    rs, ra, rv, _, _ = _residual_blocks(disc, state, f)
    return float(np.linalg.norm(rs)), float(np.linalg.norm(ra)), float(np.linalg.norm(rv))


def nonlinear_residual(disc: Discretization, state: OptState, f: SourceTerm) -> float:
    rs, ra, rv, rd, rm = _residual_blocks(disc, state, f)
    return float(np.sqrt(rs @ rs + ra @ ra + rv @ rv + rd @ rd + rm * rm))


# -- Picard -------------------------------------------------------------------

def picard_step(disc: Discretization, state: OptState, f: SourceTerm) -> OptState:
    """One sequential sweep: state, adjoint, then Stokes with the new coupling."""
    kappa, gamma = state.kappa, state.gamma
    try:
        T = solve_state(disc, state.v, f, kappa)
        q = solve_adjoint(disc, state.v, T, kappa)
        v, p = solve_stokes(disc, q, T, gamma)
    except SolverFailure as err:
        raise SolverFailure(f"Picard step: {err}") from err
    return OptState(T=T, q=q, v=v, p=p, kappa=kappa, gamma=gamma)


# -- Newton -------------------------------------------------------------------

def _pinned_pressure(disc: Discretization) -> int:
    """Interior vertex whose pressure increment is held at zero during Newton."""
    return int(np.flatnonzero(~disc.dofmap.dirichlet_p1)[0]) if disc.n >= 2 else 0


def newton_matrix(disc: Discretization, state: OptState) -> sp.csc_matrix:
    """Sparse part of the Jacobian of the optimality system at ``state``.

    Unknown layout: ``[T, q, v, p]`` on interior DOFs, with one pressure DOF
    (and its divergence row) removed to fix the constant pressure mode.  The
    mean term in the adjoint row contributes the rank-one piece
    ``m m^T`` to the ``(q, T)`` block, which is left out here and restored by
    :func:`newton_step`; keeping it would make a dense block and ruin fill.
    """
    kappa, gamma = state.kappa, state.gamma
    fs, fv = disc.free_p2, disc.free_velocity
    fp = np.setdiff1d(np.arange(disc.dofmap.p1_count), [_pinned_pressure(disc)])

    def sub(A, rows, cols):
        return sp.csr_matrix(A)[rows][:, cols]

    C = disc.convection(state.v)
    A = kappa * disc.stiffness
    K_T = transport_by(disc, state.T)  # d/dv of C(v) T
    K_q = transport_by(disc, state.q)  # d/dv of C(v) q
    H_q = coupling_jacobian_T(disc, state.q)  # d/dT of G(q, T)
    B = disc.divergence
    blocks = [
        [sub(A + C, fs, fs), None, sub(K_T, fs, fv), None],
        [sub(-disc.mass, fs, fs), sub(A - C, fs, fs), sub(-K_q, fs, fv), None],
        [sub(-H_q, fv, fs), sub(-K_T.T, fv, fs), sub(gamma * disc.laplacian, fv, fv),
         sub(-B.T, fv, fp)],
        [None, None, sub(-B, fp, fv), None],
    ]
    return sp.bmat(blocks, format="csc")


def newton_residual(disc: Discretization, state: OptState, f: SourceTerm) -> np.ndarray:
    """Residual vector in the unknown layout of :func:`newton_matrix`."""
    fp = np.setdiff1d(np.arange(disc.dofmap.p1_count), [_pinned_pressure(disc)])
    rs, ra, rv, rd, _ = _residual_blocks(disc, state, f)
    return np.concatenate([rs, ra, rv, rd[fp]])


def mean_correction(disc: Discretization) -> tuple[np.ndarray, np.ndarray]:
    """Vectors ``(u, w)`` with full Jacobian ``newton_matrix + u w^T``."""
    fs = disc.free_p2
    ns, nv = len(fs), len(disc.free_velocity)
    size = 2 * ns + nv + disc.dofmap.p1_count - 1
    m = disc.mass_row[fs]
    u, w = np.zeros(size), np.zeros(size)
    u[ns:2 * ns] = m
    w[:ns] = m
    return u, w


def newton_step(disc: Discretization, state: OptState, f: SourceTerm) -> OptState:
    """One Newton update of all four fields in residual-correction form.

    The rank-one mean correction is applied with the Sherman-Morrison formula
    on top of a single sparse factorization.
    """
    fs, fv = disc.free_p2, disc.free_velocity
    ns, nv = len(fs), len(fv)
    fp = np.setdiff1d(np.arange(disc.dofmap.p1_count), [_pinned_pressure(disc)])
    rhs = -newton_residual(disc, state, f)
    u, w = mean_correction(disc)
    try:
        fact = Factorization(newton_matrix(disc, state), refine=4)
        y = fact.solve(rhs, rtol=NEWTON_RTOL)
        z = fact.solve(u, rtol=NEWTON_RTOL)
    except SolverFailure as err:
        raise SolverFailure(f"Newton step: {err}") from err
    denom = 1.0 + w @ z
    if abs(denom) < 1e-14:
        raise SolverFailure("Newton step: rank-one mean correction is singular")
    dx = y - z * (w @ y) / denom
    new = state.copy()
    new.T[fs] += dx[:ns]
    new.q[fs] += dx[ns:2 * ns]
    new.v[fv] += dx[2 * ns:2 * ns + nv]
    new.p[fp] += dx[2 * ns + nv:]
    new.p -= (disc.mass_row_p1 @ new.p) / disc.mass_row_p1.sum()
    return new


# -- driver -------------------------------------------------------------------

def _relative_change(J, J_prev):
    if J_prev < 1e-14:
        return abs(J - J_prev)
    return abs(J - J_prev) / J_prev


def _record(disc, state, f, phase, k, J_prev):
    J, var, ctl = cost(disc, state)
    rel = float("nan") if J_prev is None else _relative_change(J, J_prev)
    return IterationRecord(phase, k, J, var, ctl, rel, nonlinear_residual(disc, state, f))


def run_algorithm(disc: Discretization, config: AlgorithmConfig, f: SourceTerm,
                  state: OptState | None = None) -> RunResult:
    """Picard warm-up followed by Newton, stopping on small relative cost change.

    Without an explicit starting ``state`` the zero-velocity initial guess is
    used and recorded as Picard iteration 0.
    """
    if state is None:
        state = initial_guess(disc, f, config.kappa, config.gamma)
    state = state.copy()
    state.kappa, state.gamma = config.kappa, config.gamma
    history = [_record(disc, state, f, "picard", 0, None)]
    candidates = [(history[-1].nonlinear_residual, state)]

    def step(fn, phase, k):
        nonlocal state
        try:
            state = fn(disc, state, f)
        except SolverFailure as err:
            raise AlgorithmAborted(str(err), history, state) from err
        rec = _record(disc, state, f, phase, k, history[-1].J)
        history.append(rec)
        candidates.append((rec.nonlinear_residual, state))
        log.info("%s %d: J=%.6e rel=%.3e res=%.3e", phase, k, rec.J,
                 rec.relative_change, rec.nonlinear_residual)
        return rec

    for k in range(1, config.n1 + 1):
        if step(picard_step, "picard", k).relative_change < config.eps1:
            break
    converged = False
    for k in range(1, config.n2 + 1):
        if step(newton_step, "newton", k).relative_change < config.eps2:
            converged = True
            break
    if config.n2 == 0 and history[-1].relative_change < config.eps1:
        converged = True
    if not converged and config.n1 + config.n2 == 0:
        converged = history[-1].J == 0.0
    if not converged:
        state = min(candidates, key=lambda c: c[0])[1]
    state.meta["converged"] = converged
    return RunResult(state=state, history=history, converged=converged, J=cost(disc, state)[0])


# -- derivatives ----------------------------------------------------------------

def gradient_action(disc: Discretization, state: OptState, h) -> float:
    """Adjoint-based directional derivative ``-(q, h . grad T) + gamma (grad v, grad h)``."""
    h = np.asarray(h, dtype=float)
    return float(-(h @ disc.coupling(state.q, state.T))
                 + state.gamma * (h @ (disc.laplacian @ state.v)))


def hessian_quadratic(disc: Discretization, state: OptState, h, z=None) -> float:
    """Second derivative ``|Dz|^2 + 2 (z, h . grad q) + gamma |grad h|^2`` along ``h``."""
    h = np.asarray(h, dtype=float)
    if z is None:
        z = solve_linearized_state(disc, state.v, state.T, h, state.kappa)
    Dz = disc.deviation(z)
    return float(Dz @ (disc.mass @ Dz) + 2.0 * (z @ (disc.convection(h) @ state.q))
                 + state.gamma * (h @ (disc.laplacian @ h)))


def random_divfree_direction(disc: Discretization, rng: np.random.Generator,
                             modes: int = 3) -> np.ndarray:
    """Discretely divergence-free velocity from a Stokes solve with random smooth forcing.

    Normalized to unit ``|grad h|``.
    """
    a = rng.normal(size=(2, modes, modes))
    k = np.arange(1, modes + 1)

    def forcing(x, y):
        out = []
        for c in range(2):
            sx = np.sin(np.pi * np.multiply.outer(x, k))
            cy = np.cos(np.pi * np.multiply.outer(y, k))
            out.append(np.einsum("...i,...j,ij->...", sx, cy, a[c]))
        return out

    g = assemble_vector_load(disc.mesh, disc.dofmap, forcing)
    h, _ = disc.stokes_solver().solve(g)
    return h / np.sqrt(h @ (disc.laplacian @ h))
