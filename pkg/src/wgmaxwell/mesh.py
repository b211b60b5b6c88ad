"""Two-dimensional meshes of convex polygons with oriented edges.

Every edge carries a unit normal ``n_e``.  On interior edges it points out of
the adjacent cell with the lower id and into the one with the higher id; on
boundary edges it is the outward normal of the domain.  A cell sees an edge
with orientation sign ``+1`` when its outward normal equals ``n_e``.

The mesh JSON format only stores ``{"vertices": [[x, y], ...],
"cells": [[i, j, k, ...], ...]}``; edges, normals and boundary flags are
always derived on load.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "MeshValidationError",
    "ShapeRegularityWarning",
    "EdgeSide",
    "ElementGeometry",
    "Mesh",
    "build_structured_triangulation",
    "build_structured_quadrilaterals",
    "load_mesh",
    "jump",
]

SHAPE_REGULARITY_MIN = 0.05


class MeshValidationError(ValueError):
    """Raised for degenerate, non-convex or non-manifold input meshes."""


class ShapeRegularityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EdgeSide:
    """One side of an edge: the cell and the sign relating its outward normal to ``n_e``."""

    edge: int
    cell: int
    sign: int


@dataclass(frozen=True)
class ElementGeometry:
    diameter: float
    area: float
    centroid: np.ndarray
    normals: np.ndarray  # (m, 2) outward unit normals, local edge order
    lengths: np.ndarray  # (m,)


def _polygon_area_centroid(pts: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _inradius(pts: np.ndarray, normals: np.ndarray) -> float:
    """Radius of the largest inscribed circle of a convex polygon."""
    if len(pts) == 3:
        area, _ = _polygon_area_centroid(pts)
        perimeter = np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1).sum()
        return 2.0 * area / perimeter
    from scipy.optimize import linprog

    # Chebyshev center: maximize r subject to n_i . c + r <= n_i . p_i
    b = np.einsum("ij,ij->i", normals, pts)
    a_ub = np.hstack([normals, np.ones((len(pts), 1))])
    res = linprog([0.0, 0.0, -1.0], A_ub=a_ub, b_ub=b, bounds=[(None, None)] * 2 + [(0, None)])
    return float(res.x[2])


class Mesh:
    """Immutable polygonal mesh with derived edge connectivity.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    cells : sequence of vertex-index sequences
        Each cell is a convex polygon.  Clockwise loops are reversed.
    check_shape : bool
        Emit a :class:`ShapeRegularityWarning` when the mesh is poorly shaped.
    """

    dim = 2

    def __init__(self, vertices, cells: Sequence[Sequence[int]], check_shape: bool = True):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshValidationError(f"vertices must have shape (nv, 2), got {vertices.shape}")
        if len(cells) == 0:
            raise MeshValidationError("mesh has no cells")
        self.vertices = vertices
        self.vertices.setflags(write=False)

        loops = []
        for t, cell in enumerate(cells):
            loop = np.asarray(cell, dtype=int)
            if loop.ndim != 1 or len(loop) < 3:
                raise MeshValidationError(f"cell {t} needs at least 3 vertices")
            if len(set(loop.tolist())) != len(loop):
                raise MeshValidationError(f"cell {t} repeats a vertex")
            if loop.min() < 0 or loop.max() >= len(vertices):
                raise MeshValidationError(f"cell {t} references a missing vertex")
            area, _ = _polygon_area_centroid(vertices[loop])
            if area < 0:
                loop = loop[::-1].copy()
            loops.append(loop)
        self.cells = tuple(loops)
        self._build_geometry()
        self._build_edges()
        if check_shape:
            quality = self.shape_regularity()
            if quality < SHAPE_REGULARITY_MIN:
                warnings.warn(
                    f"mesh shape regularity {quality:.3g} is below {SHAPE_REGULARITY_MIN}",
                    ShapeRegularityWarning,
                    stacklevel=2,
                )

    # -- construction -----------------------------------------------------

    def _build_geometry(self) -> None:
        nc = len(self.cells)
        self.cell_areas = np.empty(nc)
        self.cell_centroids = np.empty((nc, 2))
        self.cell_diameters = np.empty(nc)
        for t, loop in enumerate(self.cells):
            pts = self.vertices[loop]
            area, centroid = _polygon_area_centroid(pts)
            scale = np.ptp(pts, axis=0).max()
            if area <= 1e-14 * scale**2:
                raise MeshValidationError(f"cell {t} has zero area")
            d = pts[np.roll(np.arange(len(loop)), -1)] - pts
            nxt = np.roll(d, -1, axis=0)
            turn = d[:, 0] * nxt[:, 1] - d[:, 1] * nxt[:, 0]
            if np.any(turn <= 1e-12 * scale**2):
                raise MeshValidationError(f"cell {t} is not strictly convex")
            diff = pts[:, None, :] - pts[None, :, :]
            self.cell_areas[t] = area
            self.cell_centroids[t] = centroid
            self.cell_diameters[t] = np.sqrt((diff**2).sum(axis=-1)).max()

    def _build_edges(self) -> None:
        index: dict[tuple[int, int], int] = {}
        edge_vertices: list[tuple[int, int]] = []
        owners: list[list[int]] = []
        cell_edges = []
        for t, loop in enumerate(self.cells):
            ids = []
            for a, b in zip(loop, np.roll(loop, -1)):
                key = (int(min(a, b)), int(max(a, b)))
                if key not in index:
                    index[key] = len(edge_vertices)
                    edge_vertices.append(key)
                    owners.append([])
                e = index[key]
                owners[e].append(t)
                ids.append(e)
            cell_edges.append(np.array(ids, dtype=int))

        ne = len(edge_vertices)
        self.edge_vertices = np.array(edge_vertices, dtype=int)
        self.edge_cells = np.full((ne, 2), -1, dtype=int)
        for e, own in enumerate(owners):
            if len(own) > 2:
                raise MeshValidationError(f"edge {edge_vertices[e]} is shared by {len(own)} cells")
            self.edge_cells[e, : len(own)] = sorted(own)
        self.boundary_edges = np.flatnonzero(self.edge_cells[:, 1] < 0)
        self.interior_edges = np.flatnonzero(self.edge_cells[:, 1] >= 0)
        self.is_boundary_edge = self.edge_cells[:, 1] < 0

        p0 = self.vertices[self.edge_vertices[:, 0]]
        p1 = self.vertices[self.edge_vertices[:, 1]]
        tangent = p1 - p0
        self.edge_lengths = np.linalg.norm(tangent, axis=1)
        self.edge_midpoints = 0.5 * (p0 + p1)
        normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / self.edge_lengths[:, None]
        # orient n_e out of the lower-id cell
        owner = self.edge_cells[:, 0]
        outward = np.einsum("ij,ij->i", normals, self.edge_midpoints - self.cell_centroids[owner])
        normals[outward < 0] *= -1.0
        self.edge_normals = normals

        self.cell_edges = tuple(cell_edges)
        signs = []
        for t, ids in enumerate(cell_edges):
            s = np.where(self.edge_cells[ids, 0] == t, 1, -1)
            signs.append(s)
        self.cell_edge_signs = tuple(signs)
        for arr in (self.edge_vertices, self.edge_cells, self.edge_lengths, self.edge_normals):
            arr.setflags(write=False)

    # -- queries ----------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)

    @property
    def h(self) -> float:
        """Global mesh size, the largest cell diameter."""
        return float(self.cell_diameters.max())

    @property
    def area(self) -> float:
        return float(self.cell_areas.sum())

    def edge_sides(self, e: int) -> list[EdgeSide]:
        if not 0 <= e < self.n_edges:
            raise IndexError(f"edge {e} out of range")
        sides = [EdgeSide(e, int(self.edge_cells[e, 0]), 1)]
        if self.edge_cells[e, 1] >= 0:
            sides.append(EdgeSide(e, int(self.edge_cells[e, 1]), -1))
        return sides

    def edge_tangent(self, e: int) -> np.ndarray:
        """Unit tangent ``t_e``, the normal ``n_e`` rotated by +90 degrees."""
        n = self.edge_normals[e]
        return np.array([-n[1], n[0]])

    def edge_points(self, e: int, t: np.ndarray) -> np.ndarray:
        """Map parameters ``t`` in [-1, 1] onto edge ``e``.

        ``t = -1`` is the endpoint with the smaller vertex index.
        """
        p0 = self.vertices[self.edge_vertices[e, 0]]
        p1 = self.vertices[self.edge_vertices[e, 1]]
        s = 0.5 * (np.asarray(t) + 1.0)
        return p0 + s[:, None] * (p1 - p0)

    def element_geometry(self, t: int) -> ElementGeometry:
        if not 0 <= t < self.n_cells:
            raise IndexError(f"cell {t} out of range")
        ids = self.cell_edges[t]
        normals = self.edge_normals[ids] * self.cell_edge_signs[t][:, None]
        return ElementGeometry(
            diameter=float(self.cell_diameters[t]),
            area=float(self.cell_areas[t]),
            centroid=self.cell_centroids[t].copy(),
            normals=normals,
            lengths=self.edge_lengths[ids].copy(),
        )

    def shape_regularity(self) -> float:
        """Smallest ``inradius * d / h_T`` over all cells."""
        worst = np.inf
        for t, loop in enumerate(self.cells):
            normals = self.edge_normals[self.cell_edges[t]] * self.cell_edge_signs[t][:, None]
            r = _inradius(self.vertices[loop], normals)
            worst = min(worst, r * self.dim / self.cell_diameters[t])
        return float(worst)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_cells

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "cells": [loop.tolist() for loop in self.cells],
        }

    @classmethod
    def from_dict(cls, data: dict, check_shape: bool = True) -> "Mesh":
        try:
            vertices, cells = data["vertices"], data["cells"]
        except KeyError as exc:
            raise MeshValidationError(f"mesh document is missing {exc.args[0]!r}") from None
        return cls(vertices, cells, check_shape=check_shape)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    def __repr__(self) -> str:
        return f"Mesh(n_vertices={self.n_vertices}, n_cells={self.n_cells}, n_edges={self.n_edges}, h={self.h:.4g})"


def load_mesh(path) -> Mesh:
    return Mesh.from_dict(json.loads(Path(path).read_text()))


def _check_rectangle(n: int, bounds) -> tuple[float, float, float, float]:
    if int(n) != n or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n}")
    x0, y0, x1, y1 = map(float, bounds)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"rectangle {bounds} must have positive width and height")
    return x0, y0, x1, y1


def _grid_vertices(n, x0, y0, x1, y1):
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    xx, yy = np.meshgrid(xs, ys)
    return np.column_stack([xx.ravel(), yy.ravel()])


def build_structured_triangulation(n: int, bounds=(0.0, 0.0, 1.0, 1.0)) -> Mesh:
    """Split an ``n x n`` grid on the rectangle ``(x0, y0, x1, y1)`` into 2n^2 triangles.

    Each sub-square is cut along its lower-left to upper-right diagonal.
    """
    x0, y0, x1, y1 = _check_rectangle(n, bounds)
    vertices = _grid_vertices(n, x0, y0, x1, y1)
    cells = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            cells.append([v00, v10, v11])
            cells.append([v00, v11, v01])
    return Mesh(vertices, cells)


def build_structured_quadrilaterals(n: int, bounds=(0.0, 0.0, 1.0, 1.0)) -> Mesh:
    x0, y0, x1, y1 = _check_rectangle(n, bounds)
    vertices = _grid_vertices(n, x0, y0, x1, y1)
    cells = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            cells.append([v00, v00 + 1, v00 + n + 2, v00 + n + 1])
    return Mesh(vertices, cells)


def jump(mesh: Mesh, q: Callable[[int, np.ndarray], np.ndarray], e: int, points: np.ndarray) -> np.ndarray:
    """Jump of a piecewise field across edge ``e`` at ``points`` on the edge.

    ``q(cell, pts)`` evaluates the restriction of the field to ``cell``.  On an
    interior edge the result is ``q|T1 - q|T2`` where ``T1`` is the side with
    orientation sign +1; on a boundary edge it is the trace.
    """
    sides = mesh.edge_sides(e)
    value = np.asarray(q(sides[0].cell, points))
    if len(sides) == 2:
        value = value - np.asarray(q(sides[1].cell, points))
    return value
