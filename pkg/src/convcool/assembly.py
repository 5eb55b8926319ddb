"""Element-wise assembly of the finite element forms.

Every form is integrated with the same 7-point degree-5 rule, which is exact
for all polynomial integrands arising from P2 fields (the trilinear
convection term is degree 5).  Matrices are returned as ``scipy.sparse``
CSR matrices over the full (unrestricted) DOF sets; Dirichlet conditions are
applied later by restricting to interior DOFs.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import DofMap, Mesh
from .quadrature import QuadratureRule, p1_basis, p2_basis, seven_point_rule

RULE = seven_point_rule()


@dataclass(frozen=True)
class SourceTerm:
    """Heat source ``f(x, y)``; ``func`` must accept numpy arrays."""

    tag: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, x, y):
        return np.broadcast_to(np.asarray(self.func(x, y), dtype=float), np.shape(x))


@dataclass(frozen=True, eq=False)
class ElementData:
    """Per-element geometry and basis data at the quadrature points."""

    rule: QuadratureRule
    phi: np.ndarray  # (nq, 6)
    phi1: np.ndarray  # (nq, 3)
    grad: np.ndarray  # (ne, nq, 6, 2) physical P2 gradients
    wdet: np.ndarray  # (ne, nq) quadrature weight times |det J|
    xq: np.ndarray  # (ne, nq, 2) physical quadrature points
    cell_p2: np.ndarray
    cell_p1: np.ndarray
    cell_vel: np.ndarray  # (ne, 12), node-major interleaved
    p2_count: int
    p1_count: int


_CACHE: "weakref.WeakKeyDictionary[DofMap, ElementData]" = weakref.WeakKeyDictionary()


def element_data(mesh: Mesh, dofmap: DofMap, rule: QuadratureRule = RULE) -> ElementData:
    cached = _CACHE.get(dofmap)
    if cached is not None and cached.rule is rule:
        return cached
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edge vectors
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)  # J^{-T}
    inv_t[:, 0, 0] = jac[:, 1, 1]
    inv_t[:, 0, 1] = -jac[:, 1, 0]
    inv_t[:, 1, 0] = -jac[:, 0, 1]
    inv_t[:, 1, 1] = jac[:, 0, 0]
    inv_t /= det[:, None, None]

    phi, dphi = p2_basis(rule.points)
    phi1, _ = p1_basis(rule.points)
    grad = np.einsum("eij,qaj->eqai", inv_t, dphi)
    wdet = np.abs(det)[:, None] * rule.weights[None, :]
    xq = p[:, 0, None, :] + np.einsum("eij,qj->eqi", jac, rule.points)
    cell_vel = (2 * dofmap.cell_p2[:, :, None] + np.arange(2)).reshape(-1, 12)
    data = ElementData(
        rule=rule, phi=phi, phi1=phi1, grad=grad, wdet=wdet, xq=xq,
        cell_p2=dofmap.cell_p2, cell_p1=dofmap.cell_p1, cell_vel=cell_vel,
        p2_count=dofmap.p2_count, p1_count=dofmap.p1_count,
    )
    _CACHE[dofmap] = data
    return data


def scatter_matrix(local, rows, cols, shape) -> sp.csr_matrix:
    """Sum local element matrices ``(ne, r, c)`` into a global CSR matrix."""
    ne, r, c = local.shape
    I = np.broadcast_to(rows[:, :, None], (ne, r, c)).ravel()
    J = np.broadcast_to(cols[:, None, :], (ne, r, c)).ravel()
    A = sp.coo_matrix((local.ravel(), (I, J)), shape=shape).tocsr()
    A.sum_duplicates()
    return A


def scatter_vector(local, rows, size) -> np.ndarray:
    return np.bincount(rows.ravel(), weights=local.ravel(), minlength=size)


# -- field evaluation at quadrature points ---------------------------------

def scalar_at_qp(ed: ElementData, u) -> np.ndarray:
    return np.asarray(u)[ed.cell_p2] @ ed.phi.T


def gradient_at_qp(ed: ElementData, u) -> np.ndarray:
    return np.einsum("ea,eqad->eqd", np.asarray(u)[ed.cell_p2], ed.grad)


def vector_at_qp(ed: ElementData, w) -> np.ndarray:
    nodal = np.asarray(w).reshape(-1, 2)[ed.cell_p2]  # (ne, 6, 2)
    return np.einsum("qa,ead->eqd", ed.phi, nodal)


def _check_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


# -- bilinear forms --------------------------------------------------------

def assemble_stiffness(mesh: Mesh, dofmap: DofMap, kappa: float = 1.0) -> sp.csr_matrix:
    _check_positive("kappa", kappa)
    ed = element_data(mesh, dofmap)
    local = kappa * np.einsum("eq,eqad,eqbd->eab", ed.wdet, ed.grad, ed.grad)
    n = dofmap.p2_count
    return scatter_matrix(local, ed.cell_p2, ed.cell_p2, (n, n))


def assemble_mass(mesh: Mesh, dofmap: DofMap, space: str = "P2") -> sp.csr_matrix:
    ed = element_data(mesh, dofmap)
    if space == "P2":
        phi, cells, n = ed.phi, ed.cell_p2, dofmap.p2_count
    elif space == "P1":
        phi, cells, n = ed.phi1, ed.cell_p1, dofmap.p1_count
    else:
        raise ValueError(f"mass matrix is defined on P1 or P2, got {space!r}")
    local = np.einsum("eq,qa,qb->eab", ed.wdet, phi, phi)
    return scatter_matrix(local, cells, cells, (n, n))


def assemble_convection(mesh: Mesh, dofmap: DofMap, w, skew: bool = False) -> sp.csr_matrix:
    """Matrix of ``(w . grad phi_j, phi_i)``: row = test, column = trial.

    With ``skew=True`` the skew-symmetric part ``(C - C^T)/2`` is returned.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (dofmap.velocity_count,):
        raise ValueError(f"velocity has shape {w.shape}, expected ({dofmap.velocity_count},)")
    ed = element_data(mesh, dofmap)
    wq = vector_at_qp(ed, w)
    local = np.einsum("eq,eqd,eqbd,qa->eab", ed.wdet, wq, ed.grad, ed.phi)
    n = dofmap.p2_count
    C = scatter_matrix(local, ed.cell_p2, ed.cell_p2, (n, n))
    if skew:
        C = (0.5 * (C - C.T)).tocsr()
    return C


def assemble_vector_laplacian(mesh: Mesh, dofmap: DofMap, gamma: float = 1.0) -> sp.csr_matrix:
    _check_positive("gamma", gamma)
    ed = element_data(mesh, dofmap)
    scalar = gamma * np.einsum("eq,eqad,eqbd->eab", ed.wdet, ed.grad, ed.grad)
    ne = scalar.shape[0]
    local = np.zeros((ne, 6, 2, 6, 2))
    local[:, :, 0, :, 0] = scalar
    local[:, :, 1, :, 1] = scalar
    n = dofmap.velocity_count
    return scatter_matrix(local.reshape(ne, 12, 12), ed.cell_vel, ed.cell_vel, (n, n))


def assemble_divergence(mesh: Mesh, dofmap: DofMap) -> sp.csr_matrix:
    """Matrix of ``(div w_j, theta_i)`` with P1 rows and vector-P2 columns."""
    ed = element_data(mesh, dofmap)
    local = np.einsum("eq,qa,eqbd->eabd", ed.wdet, ed.phi1, ed.grad)
    ne = local.shape[0]
    return scatter_matrix(local.reshape(ne, 3, 12), ed.cell_p1, ed.cell_vel,
                          (dofmap.p1_count, dofmap.velocity_count))


# -- load-type vectors and field-dependent couplings ------------------------

def assemble_load(mesh: Mesh, dofmap: DofMap, f: SourceTerm) -> np.ndarray:
    ed = element_data(mesh, dofmap)
    fq = f(ed.xq[..., 0], ed.xq[..., 1])
    local = np.einsum("eq,eq,qa->ea", ed.wdet, fq, ed.phi)
    return scatter_vector(local, ed.cell_p2, dofmap.p2_count)


def assemble_vector_load(mesh: Mesh, dofmap: DofMap, g) -> np.ndarray:
    """Vector-P2 load ``(g, w_i)`` for ``g(x, y) -> (gx, gy)``."""
    ed = element_data(mesh, dofmap)
    gx, gy = g(ed.xq[..., 0], ed.xq[..., 1])
    gq = np.stack([np.broadcast_to(gx, ed.wdet.shape), np.broadcast_to(gy, ed.wdet.shape)], axis=-1)
    local = np.einsum("eq,eqd,qa->ead", ed.wdet, gq, ed.phi)
    return scatter_vector(local.reshape(-1, 12), ed.cell_vel, dofmap.velocity_count)


def assemble_coupling(mesh: Mesh, dofmap: DofMap, q, T, skew: bool = False) -> np.ndarray:
    """Vector-P2 vector of ``(q grad T, w_i)``.

    With ``skew=True`` returns ``((q grad T - T grad q)/2, w_i)``, the
    derivative partner of the skew-symmetrized convection form.
    """
    ed = element_data(mesh, dofmap)
    qq, gT = scalar_at_qp(ed, q), gradient_at_qp(ed, T)
    integrand = qq[..., None] * gT
    if skew:
        integrand = 0.5 * (integrand - scalar_at_qp(ed, T)[..., None] * gradient_at_qp(ed, q))
    local = np.einsum("eq,eqd,qa->ead", ed.wdet, integrand, ed.phi)
    return scatter_vector(local.reshape(-1, 12), ed.cell_vel, dofmap.velocity_count)


def assemble_transport_by(mesh: Mesh, dofmap: DofMap, T) -> sp.csr_matrix:
    """Matrix ``K`` with ``K @ w = C(w) @ T`` (P2 rows, vector-P2 columns).

    Entry ``[i, 2j + c] = (phi_j d_c T, phi_i)``.  Its transpose maps a scalar
    ``q`` to ``assemble_coupling(q, T)``.
    """
    ed = element_data(mesh, dofmap)
    gT = gradient_at_qp(ed, T)
    local = np.einsum("eq,qa,qb,eqd->eabd", ed.wdet, ed.phi, ed.phi, gT)
    ne = local.shape[0]
    return scatter_matrix(local.reshape(ne, 6, 12), ed.cell_p2, ed.cell_vel,
                          (dofmap.p2_count, dofmap.velocity_count))


def assemble_weighted_gradient(mesh: Mesh, dofmap: DofMap, q) -> sp.csr_matrix:
    """Matrix ``H`` with ``H @ T = assemble_coupling(q, T)`` (vector-P2 rows).

    Entry ``[2i + c, j] = (q d_c phi_j, phi_i)``.
    """
    ed = element_data(mesh, dofmap)
    qq = scalar_at_qp(ed, q)
    local = np.einsum("eq,eq,qa,eqbd->eadb", ed.wdet, qq, ed.phi, ed.grad)
    ne = local.shape[0]
    return scatter_matrix(local.reshape(ne, 12, 6), ed.cell_vel, ed.cell_p2,
                          (dofmap.velocity_count, dofmap.p2_count))


# -- mean and mean deviation ----------------------------------------------

def mean_value(M_p2: sp.spmatrix, T) -> float:
    """Spatial average of ``T``; the unit square has area one."""
    return float(np.sum(M_p2 @ np.asarray(T)))


def apply_mean_deviation(M_p2: sp.spmatrix, T) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    return T - mean_value(M_p2, T)


def interpolate(dofmap: DofMap, func) -> np.ndarray:
    """Nodal P2 interpolant of a scalar function."""
    x, y = dofmap.p2_nodes.T
    return np.broadcast_to(np.asarray(func(x, y), dtype=float), x.shape).copy()


def interpolate_vector(dofmap: DofMap, func) -> np.ndarray:
    x, y = dofmap.p2_nodes.T
    gx, gy = func(x, y)
    out = np.empty((dofmap.p2_count, 2))
    out[:, 0] = gx
    out[:, 1] = gy
    return out.ravel()
