"""Structured triangulations of rectangles and Lagrange degree-of-freedom maps.

Vertices are numbered row by row, each grid cell is split along its
lower-left to upper-right diagonal, and edges are numbered in the order in
which they are first met while walking the triangles.  P2 nodes are the
vertices followed by the edge midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# local edge k of a triangle joins local vertices LOCAL_EDGES[k]
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))

SPACE_KINDS = ("P1", "P2", "P2v")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of an axis-aligned rectangle."""

    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counter-clockwise
    edges: np.ndarray  # (ne, 2), lower vertex index first
    triangle_edges: np.ndarray  # (nt, 3), edge index of each local edge
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    h: float
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def area(self) -> float:
        return (self.x_range[1] - self.x_range[0]) * (self.y_range[1] - self.y_range[0])

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def dump(self, path: str | Path) -> None:
        """Write a plain-text node/element listing (debugging aid)."""
        with open(path, "w") as fh:
            fh.write(f"# vertices {self.n_vertices}\n")
            for i, (x, y) in enumerate(self.vertices):
                fh.write(f"{i} {x:.17g} {y:.17g} {int(self.boundary_vertex_flags[i])}\n")
            fh.write(f"# triangles {self.n_triangles}\n")
            for i, (a, b, c) in enumerate(self.triangles):
                fh.write(f"{i} {a} {b} {c}\n")
            fh.write(f"# edges {self.n_edges}\n")
            for i, (a, b) in enumerate(self.edges):
                fh.write(f"{i} {a} {b} {int(self.boundary_edge_flags[i])}\n")


def build_rectangle_mesh(x_range, y_range, nx: int, ny: int) -> Mesh:
    """Triangulate ``x_range x y_range`` with an ``nx`` by ``ny`` grid.

    Produces ``2 * nx * ny`` triangles.  ``h`` is the grid spacing in x, so
    the unit square with ``nx = 64`` has ``h = 1/64``.
    """
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise ValueError(f"subdivision counts must be positive, got nx={nx}, ny={ny}")
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"empty rectangle {x_range} x {y_range}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    local = triangles[:, LOCAL_EDGES].reshape(-1, 2)  # (3 nt, 2)
    pairs = np.sort(local, axis=1)
    keys = pairs[:, 0] * len(vertices) + pairs[:, 1]
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    # renumber edges by first appearance
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    triangle_edges = rank[inverse].reshape(-1, 3)
    edges = pairs[first[order]]

    counts = np.bincount(triangle_edges.ravel(), minlength=len(edges))
    boundary_edge_flags = counts == 1
    boundary_vertex_flags = np.zeros(len(vertices), dtype=bool)
    boundary_vertex_flags[edges[boundary_edge_flags].ravel()] = True

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        triangle_edges=triangle_edges,
        boundary_vertex_flags=boundary_vertex_flags,
        boundary_edge_flags=boundary_edge_flags,
        h=(x1 - x0) / nx,
        x_range=(x0, x1),
        y_range=(y0, y1),
        nx=nx,
        ny=ny,
    )


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global numbering of a Lagrange space on a :class:`Mesh`.

    For ``P2v`` the layout is blocked: all x-components first, then all
    y-components, each following the scalar P2 numbering.
    """

    mesh: Mesh
    kind: str
    n_dofs: int
    cell_dofs: np.ndarray  # (nt, n_local)
    boundary_dofs: np.ndarray
    nodes: np.ndarray = field(repr=False)  # coordinates of the scalar nodes

    @property
    def n_scalar(self) -> int:
        return len(self.nodes)

    @property
    def n_components(self) -> int:
        return 2 if self.kind == "P2v" else 1

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x, y)``; vector spaces expect a pair back."""
        x, y = self.nodes[:, 0], self.nodes[:, 1]
        if self.kind == "P2v":
            fx, fy = func(x, y)
            return np.concatenate([np.broadcast_to(fx, x.shape), np.broadcast_to(fy, x.shape)]).astype(float)
        return np.array(np.broadcast_to(func(x, y), x.shape), dtype=float)


def build_dof_map(mesh: Mesh, kind: str) -> DofMap:
    if kind not in SPACE_KINDS:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {SPACE_KINDS}")
    nv = mesh.n_vertices
    if kind == "P1":
        return DofMap(
            mesh=mesh,
            kind=kind,
            n_dofs=nv,
            cell_dofs=mesh.triangles.copy(),
            boundary_dofs=np.flatnonzero(mesh.boundary_vertex_flags),
            nodes=mesh.vertices,
        )
    cell = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
    nodes = np.vstack([mesh.vertices, mesh.midpoints()])
    bnd = np.concatenate(
        [np.flatnonzero(mesh.boundary_vertex_flags), nv + np.flatnonzero(mesh.boundary_edge_flags)]
    )
    bnd.sort()
    n = len(nodes)
    if kind == "P2":
        return DofMap(mesh, kind, n, cell, bnd, nodes)
    return DofMap(
        mesh=mesh,
        kind=kind,
        n_dofs=2 * n,
        cell_dofs=np.hstack([cell, cell + n]),
        boundary_dofs=np.concatenate([bnd, bnd + n]),
        nodes=nodes,
    )
