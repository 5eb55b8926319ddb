"""Reference-triangle quadrature and Lagrange shape functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) reference coordinates (xi, eta)
    weights: np.ndarray  # (nq,), sum = 1/2
    degree: int

    @property
    def barycentric(self) -> np.ndarray:
        xi, eta = self.points.T
        return np.column_stack([1.0 - xi - eta, xi, eta])


def seven_point_rule() -> QuadratureRule:
    """Radon's 7-point rule, exact for polynomials of degree 5."""
    s = np.sqrt(15.0)
    a1, a2 = (6.0 - s) / 21.0, (6.0 + s) / 21.0
    w1, w2 = (155.0 - s) / 1200.0, (155.0 + s) / 1200.0
    bary = [
        (1 / 3, 1 / 3, 1 / 3),
        (a1, a1, 1 - 2 * a1),
        (a1, 1 - 2 * a1, a1),
        (1 - 2 * a1, a1, a1),
        (a2, a2, 1 - 2 * a2),
        (a2, 1 - 2 * a2, a2),
        (1 - 2 * a2, a2, a2),
    ]
    bary = np.array(bary)
    weights = np.array([9 / 40] + [w1] * 3 + [w2] * 3) * 0.5
    return QuadratureRule(points=bary[:, 1:].copy(), weights=weights, degree=5)


def p1_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (nq, 3) and reference gradients (3, 2) of the P1 basis."""
    xi, eta = np.asarray(points).T
    values = np.column_stack([1.0 - xi - eta, xi, eta])
    grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return values, grads


def p2_basis(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (nq, 6) and reference gradients (nq, 6, 2) of the P2 basis.

    Local order: vertices 0, 1, 2, then midpoints of edges (0,1), (1,2), (2,0).
    """
    points = np.asarray(points, dtype=float)
    lam, dlam = p1_basis(points)
    l0, l1, l2 = lam.T
    values = np.column_stack([
        l0 * (2 * l0 - 1),
        l1 * (2 * l1 - 1),
        l2 * (2 * l2 - 1),
        4 * l0 * l1,
        4 * l1 * l2,
        4 * l2 * l0,
    ])
    nq = len(points)
    grads = np.empty((nq, 6, 2))
    for k in range(3):
        grads[:, k] = (4 * lam[:, k] - 1)[:, None] * dlam[k]
    for k, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        grads[:, 3 + k] = 4 * (lam[:, a, None] * dlam[b] + lam[:, b, None] * dlam[a])
    return values, grads
