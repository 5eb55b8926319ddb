"""Single PDE solves of the optimality system on a fixed discretization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import assembly as asm
from .linsolve import Factorization, LinearSystem, SaddleSolver, solve_scalar
from .mesh import DofMap, Mesh, build_dofmap, build_uniform_mesh, interior_dofs

DIVERGENCE_WARN_TOL = 1e-8


class Discretization:
    """Mesh, DOF maps and the parameter-independent matrices for one mesh.

    The stiffness and vector Laplacian are stored for unit coefficients and
    scaled on use.  The Stokes operator is factorized once, for unit
    ``gamma`` (close to 1 GB at n=64); other weights rescale the right-hand
    side and the pressure.
    """

    def __init__(self, n: int, skew: bool = False):
        self.mesh: Mesh = build_uniform_mesh(n)
        self.dofmap: DofMap = build_dofmap(self.mesh)
        self.skew = skew
        m, d = self.mesh, self.dofmap
        self.stiffness = asm.assemble_stiffness(m, d, 1.0)
        self.mass = asm.assemble_mass(m, d, "P2")
        self.mass_p1 = asm.assemble_mass(m, d, "P1")
        self.laplacian = asm.assemble_vector_laplacian(m, d, 1.0)
        self.divergence = asm.assemble_divergence(m, d)
        self.mass_row = np.asarray(self.mass.sum(axis=0)).ravel()
        self.mass_row_p1 = np.asarray(self.mass_p1.sum(axis=0)).ravel()
        self.free_p2 = interior_dofs(d, "P2")
        self.free_velocity = interior_dofs(d, "VectorP2")
        self._stokes: SaddleSolver | None = None
        self._loads: dict[int, tuple[asm.SourceTerm, np.ndarray]] = {}
        self._mass_p1_fact: Factorization | None = None

    @property
    def n(self) -> int:
        return self.mesh.n

    def zeros_scalar(self) -> np.ndarray:
        return np.zeros(self.dofmap.p2_count)

    def zeros_velocity(self) -> np.ndarray:
        return np.zeros(self.dofmap.velocity_count)

    def zeros_pressure(self) -> np.ndarray:
        return np.zeros(self.dofmap.p1_count)

    def load(self, f: asm.SourceTerm) -> np.ndarray:
        hit = self._loads.get(id(f))
        if hit is None or hit[0] is not f:
            hit = (f, asm.assemble_load(self.mesh, self.dofmap, f))
            self._loads[id(f)] = hit
        return hit[1]

    def convection(self, v) -> sp.csr_matrix:
        return asm.assemble_convection(self.mesh, self.dofmap, v, skew=self.skew)

    def coupling(self, q, T) -> np.ndarray:
        return asm.assemble_coupling(self.mesh, self.dofmap, q, T, skew=self.skew)

    def mean(self, T) -> float:
        return asm.mean_value(self.mass, T)

    def deviation(self, T) -> np.ndarray:
        return asm.apply_mean_deviation(self.mass, T)

    def stokes_solver(self) -> SaddleSolver:
        """Factorized ``D v - B^T p = g``, ``B v = 0``, ``<p> = 0``."""
        if self._stokes is None:
            self._stokes = SaddleSolver(self.laplacian, self.divergence,
                                        self.mass_row_p1, self.free_velocity)
        return self._stokes

    def divergence_norm(self, v) -> float:
        """L2 norm of the P1 projection of ``div v``."""
        r = self.divergence @ np.asarray(v)
        if self._mass_p1_fact is None:
            self._mass_p1_fact = Factorization(self.mass_p1)
        return float(np.sqrt(max(r @ self._mass_p1_fact.solve(r), 0.0)))


@dataclass
class OptState:
    """One iterate ``(T, q, v, p)`` of the optimality system."""

    T: np.ndarray
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray
    kappa: float = 1.0
    gamma: float = 1.0
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def copy(self, **changes) -> "OptState":
        fields = {k: np.array(getattr(self, k)) for k in ("T", "q", "v", "p")}
        fields.update(changes)
        return replace(self, meta=dict(self.meta), **fields)


def _check_kappa(kappa):
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")


def _warn_if_not_divfree(disc: Discretization, v, what="velocity"):
    vnorm = np.linalg.norm(v)
    if vnorm == 0.0:
        return
    div = disc.divergence_norm(v)
    scale = np.sqrt(max(v @ (disc.laplacian @ v), 0.0))
    if div > DIVERGENCE_WARN_TOL * max(scale, 1e-300):
        warnings.warn(f"{what} is not discretely divergence-free (|div| = {div:.2e})",
                      RuntimeWarning, stacklevel=3)


def transport_operator(disc: Discretization, v, kappa: float, sign: float = 1.0) -> sp.csr_matrix:
    """``kappa * A + sign * C(v)``."""
    A = kappa * disc.stiffness
    if np.any(v):
        A = A + sign * disc.convection(v)
    return A.tocsr()


def solve_state(disc: Discretization, v, f: asm.SourceTerm, kappa: float = 1.0) -> np.ndarray:
    """Temperature for a given velocity: ``kappa A T + C(v) T = F``."""
    _check_kappa(kappa)
    _warn_if_not_divfree(disc, v)
    return solve_scalar(LinearSystem(transport_operator(disc, v, kappa, +1.0),
                                     disc.load(f), disc.free_p2))


def solve_adjoint(disc: Discretization, v, T, kappa: float = 1.0) -> np.ndarray:
    """Adjoint temperature: ``kappa A q - C(v) q = M (T - <T>)``."""
    _check_kappa(kappa)
    rhs = disc.mass @ disc.deviation(T)
    return solve_scalar(LinearSystem(transport_operator(disc, v, kappa, -1.0), rhs, disc.free_p2))


def solve_linearized_state(disc: Discretization, v, T, h, kappa: float = 1.0) -> np.ndarray:
    """Directional derivative ``z`` of the temperature along ``h``.

    ``kappa A z + C(v) z = -C(h) T``.
    """
    _check_kappa(kappa)
    if not np.any(h):
        return disc.zeros_scalar()
    rhs = -(disc.convection(h) @ np.asarray(T))
    return solve_scalar(LinearSystem(transport_operator(disc, v, kappa, +1.0), rhs, disc.free_p2))


def solve_stokes(disc: Discretization, q, T, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Velocity and pressure driven by ``q grad T``: ``gamma D v - B^T p = (q grad T, w)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    g = disc.coupling(q, T)
    if not np.any(g):
        return disc.zeros_velocity(), disc.zeros_pressure()
    # dividing by gamma keeps the velocity block O(1) against the divergence rows
    v, p = disc.stokes_solver().solve(g / gamma)
    return v, gamma * p


def initial_guess(disc: Discretization, f: asm.SourceTerm, kappa: float = 1.0,
                  gamma: float = 1.0) -> OptState:
    """Zero velocity, pure-diffusion temperature and its adjoint."""
    v = disc.zeros_velocity()
    T = solve_state(disc, v, f, kappa)
    q = solve_adjoint(disc, v, T, kappa)
    return OptState(T=T, q=q, v=v, p=disc.zeros_pressure(), kappa=kappa, gamma=gamma)


def transport_by(disc: Discretization, T) -> sp.csr_matrix:
    """Matrix ``K`` with ``K @ w = C(w) @ T`` for the active convection form."""
    K = asm.assemble_transport_by(disc.mesh, disc.dofmap, T)
    if disc.skew:
        H = asm.assemble_weighted_gradient(disc.mesh, disc.dofmap, T)
        K = (0.5 * (K - H.T)).tocsr()
    return K


def coupling_jacobian_T(disc: Discretization, q) -> sp.csr_matrix:
    """Derivative of ``disc.coupling(q, T)`` with respect to ``T``."""
    H = asm.assemble_weighted_gradient(disc.mesh, disc.dofmap, q)
    if disc.skew:
        K = asm.assemble_transport_by(disc.mesh, disc.dofmap, q)
        H = (0.5 * (H - K.T)).tocsr()
    return H
