"""Uniform triangulation of the unit square and Lagrange DOF numbering.

Vertices are numbered row-major, ``k = j*(n+1) + i`` for ``(x, y) = (i/n, j/n)``.
Each cell is split along its lower-left to upper-right diagonal, except the
bottom-right and top-left corner cells (for ``n >= 2``), which use the other
diagonal so that no triangle has all three vertices on the boundary; such a
triangle carries a spurious pressure mode for the P2/P1 pair.  P2 nodes are
the vertices followed by the edge midpoints (edges sorted lexicographically by
their endpoint indices).  Vector-P2 DOFs interleave components per node:
``2*node + c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPACES = ("P1", "P2", "VectorP2")


@dataclass(frozen=True, eq=False)
class Mesh:
    n: int
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counterclockwise
    edges: np.ndarray  # (ne, 2), sorted endpoints, lexicographic order
    edge_triangles: np.ndarray  # (ne, 2), -1 where an edge has one neighbour
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    triangle_edges: np.ndarray = field(repr=False)  # (nt, 3): edges (0,1), (1,2), (2,0)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: Mesh
    p1_count: int
    p2_count: int
    velocity_count: int
    vertex_p1: np.ndarray
    vertex_p2: np.ndarray
    edge_p2: np.ndarray
    p2_nodes: np.ndarray  # (p2_count, 2) node coordinates
    cell_p1: np.ndarray  # (nt, 3)
    cell_p2: np.ndarray  # (nt, 6): three vertices, then edges (0,1), (1,2), (2,0)
    dirichlet_p1: np.ndarray  # boolean masks
    dirichlet_p2: np.ndarray
    dirichlet_velocity: np.ndarray

    def velocity_dofs(self, node: np.ndarray, component: int) -> np.ndarray:
        return 2 * np.asarray(node) + component


def _on_boundary(xy: np.ndarray) -> np.ndarray:
    tol = 1e-12
    x, y = xy[..., 0], xy[..., 1]
    return (x < tol) | (x > 1 - tol) | (y < tol) | (y > 1 - tol)


def build_uniform_mesh(n: int) -> Mesh:
    if int(n) != n or n < 1:
        raise ValueError(f"mesh subdivision must be a positive integer, got {n!r}")
    n = int(n)
    ticks = np.arange(n + 1) / n
    X, Y = np.meshgrid(ticks, ticks)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    ll = (j * (n + 1) + i).ravel()
    lr, ul = ll + 1, ll + n + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    if n >= 2:
        corner = ((i == n - 1) & (j == 0) | (i == 0) & (j == n - 1)).ravel()
        lower[corner] = np.column_stack([ll, lr, ul])[corner]
        upper[corner] = np.column_stack([lr, ur, ul])[corner]
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    local = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
    pairs = np.sort(local, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    triangle_edges = inverse.reshape(-1, 3)

    ne = len(edges)
    owner = np.repeat(np.arange(len(triangles)), 3)
    edge_triangles = np.full((ne, 2), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_triangles[sorted_edges[first], 0] = owner[order][first]
    edge_triangles[sorted_edges[~first], 1] = owner[order][~first]

    bv = _on_boundary(vertices)
    be = _on_boundary(0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]]))
    return Mesh(
        n=n,
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_triangles=edge_triangles,
        boundary_vertex_flags=bv,
        boundary_edge_flags=be,
        triangle_edges=triangle_edges,
    )


def build_dofmap(mesh: Mesh) -> DofMap:
    nv, ne = len(mesh.vertices), len(mesh.edges)
    vertex_p2 = np.arange(nv)
    edge_p2 = nv + np.arange(ne)
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    p2_nodes = np.vstack([mesh.vertices, midpoints])
    cell_p2 = np.hstack([mesh.triangles, edge_p2[mesh.triangle_edges]])
    dir_p2 = np.concatenate([mesh.boundary_vertex_flags, mesh.boundary_edge_flags])
    return DofMap(
        mesh=mesh,
        p1_count=nv,
        p2_count=nv + ne,
        velocity_count=2 * (nv + ne),
        vertex_p1=np.arange(nv),
        vertex_p2=vertex_p2,
        edge_p2=edge_p2,
        p2_nodes=p2_nodes,
        cell_p1=mesh.triangles.copy(),
        cell_p2=cell_p2,
        dirichlet_p1=mesh.boundary_vertex_flags.copy(),
        dirichlet_p2=dir_p2,
        dirichlet_velocity=np.repeat(dir_p2, 2),
    )


def boundary_dofs(dofmap: DofMap, space: str) -> np.ndarray:
    """Indices of the DOFs of ``space`` whose node lies on the boundary."""
    masks = {
        "P1": dofmap.dirichlet_p1,
        "P2": dofmap.dirichlet_p2,
        "VectorP2": dofmap.dirichlet_velocity,
    }
    if space not in masks:
        raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")
    return np.flatnonzero(masks[space])


def interior_dofs(dofmap: DofMap, space: str) -> np.ndarray:
    return np.setdiff1d(np.arange(_size(dofmap, space)), boundary_dofs(dofmap, space))


def _size(dofmap: DofMap, space: str) -> int:
    return {"P1": dofmap.p1_count, "P2": dofmap.p2_count, "VectorP2": dofmap.velocity_count}[space]
