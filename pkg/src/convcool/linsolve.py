"""Sparse direct solves for the scalar and saddle-point systems.

Everything goes through SuperLU with a COLAMD fill-reducing column ordering.
Dirichlet conditions (all homogeneous here) are imposed by restricting the
system to the interior DOFs, which is the same as symmetric elimination with
a zero right-hand side on the boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-10


class SolverFailure(RuntimeError):
    """A linear solve failed or did not meet its residual contract."""


class Factorization:
    """LU factorization of a square sparse matrix, reusable across right-hand sides."""

    def __init__(self, matrix: sp.spmatrix, refine: int = 2):
        self.matrix = sp.csc_matrix(matrix)
        self.refine = refine
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"matrix must be square, got {self.matrix.shape}")
        if self.matrix.shape[0] == 0:
            raise SolverFailure("empty system: no unknowns after restriction")
        try:
            self.lu = spla.splu(self.matrix, permc_spec="COLAMD")
        except RuntimeError as err:
            raise SolverFailure(f"factorization failed: {err}") from err
        diag = np.abs(self.lu.U.diagonal())
        self.pivot_ratio = float(diag.max() / diag.min()) if diag.min() > 0 else np.inf
        if not np.isfinite(self.pivot_ratio) or self.pivot_ratio > 1e15:
            raise SolverFailure(
                f"matrix is numerically singular (pivot ratio {self.pivot_ratio:.3e})")

    def solve(self, rhs: np.ndarray, rtol: float = RESIDUAL_RTOL) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self.lu.solve(rhs)
        bnorm = np.linalg.norm(rhs)
        for it in range(self.refine + 1):
            if not np.all(np.isfinite(x)):
                raise SolverFailure("non-finite solution")
            r = rhs - self.matrix @ x  # recomputed, not the factorization's estimate
            rnorm = np.linalg.norm(r)
            if rnorm <= rtol * bnorm or bnorm == 0.0:
                return x
            if it < self.refine:
                x += self.lu.solve(r)
        raise SolverFailure(
            f"residual {rnorm:.3e} exceeds {rtol:.0e} * |b| = {rtol * bnorm:.3e} "
            f"(pivot ratio {self.pivot_ratio:.3e})")

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class LinearSystem:
    """``matrix @ x = rhs`` with ``x`` fixed to zero outside ``free``."""

    matrix: sp.spmatrix
    rhs: np.ndarray
    free: np.ndarray

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix must be square, got {self.matrix.shape}")
        if np.shape(self.rhs) != (n,):
            raise ValueError(f"rhs has shape {np.shape(self.rhs)}, expected ({n},)")

    def restricted(self) -> sp.csc_matrix:
        A = sp.csr_matrix(self.matrix)
        return A[self.free][:, self.free].tocsc()


def solve_scalar(system: LinearSystem) -> np.ndarray:
    fact = Factorization(system.restricted())
    x = np.zeros(system.matrix.shape[0])
    x[system.free] = fact.solve(np.asarray(system.rhs)[system.free])
    return x


@dataclass
class SaddleSystem:
    """``K v - B^T p = g``, ``B v = 0``, ``m . p = 0`` on free velocity DOFs.

    ``K`` is the velocity block (the vector Laplacian scaled by gamma), ``B``
    the P1-by-velocity divergence matrix and ``m`` the P1 mass row sums, so
    the last row fixes the pressure mean to zero.
    """

    velocity_block: sp.spmatrix
    divergence: sp.spmatrix
    rhs: np.ndarray
    pressure_mean_row: np.ndarray
    free: np.ndarray


def saddle_matrix(K, B, m, free) -> sp.csc_matrix:
    """Symmetric indefinite block matrix ``[[K, -B^T, 0], [-B, 0, m], [0, m^T, 0]]``."""
    K = sp.csr_matrix(K)[free][:, free]
    Bf = sp.csr_matrix(B)[:, free]
    m = sp.csr_matrix(np.asarray(m).reshape(-1, 1))
    return sp.bmat([[K, -Bf.T, None], [-Bf, None, m], [None, m.T, None]], format="csc")


class SaddleSolver:
    """Factorized Stokes-type saddle operator, reusable across right-hand sides."""

    def __init__(self, K, B, m, free):
        self.nv = K.shape[0]
        self.np_ = B.shape[0]
        self.free = np.asarray(free)
        self.B = sp.csr_matrix(B)
        self.m = np.asarray(m, dtype=float)
        self.fact = Factorization(saddle_matrix(K, B, m, self.free))

    def solve(self, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nf = len(self.free)
        rhs = np.zeros(self.fact.shape[0])
        rhs[:nf] = np.asarray(g)[self.free]
        x = self.fact.solve(rhs)
        v = np.zeros(self.nv)
        v[self.free] = x[:nf]
        p = x[nf:nf + self.np_]
        return v, p


def solve_saddle(system: SaddleSystem) -> tuple[np.ndarray, np.ndarray]:
    solver = SaddleSolver(system.velocity_block, system.divergence,
                          system.pressure_mean_row, system.free)
    return solver.solve(system.rhs)
