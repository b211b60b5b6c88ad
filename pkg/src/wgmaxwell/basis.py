"""Quadrature, scaled polynomial bases and L2 projections on cells and edges.

Cell polynomials start from scaled monomials ``((x - x_c)/h_T)^a ((y - y_c)/h_T)^b``
ordered by total degree and are orthonormalized on each cell by an upper
triangular change of basis, so the first ``dim P_r`` functions of a ``P_k``
basis still span ``P_r``.  Raw monomials lose many digits on obtuse or
stretched cells once ``k >= 2``.  Edge polynomials use Legendre polynomials in the parameter
``t`` in [-1, 1] running from the endpoint with the smaller vertex index.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg
from scipy.special import roots_jacobi

from .mesh import Mesh

__all__ = [
    "BasisConditioningError",
    "Quadrature",
    "CellBasis",
    "EdgeBasis",
    "poly_dim",
    "monomial_exponents",
    "triangle_quadrature",
    "cell_quadrature",
    "edge_quadrature",
    "project_cell",
    "project_edge",
    "project_edge_vector",
    "gradient_coefficients",
]


class BasisConditioningError(np.linalg.LinAlgError):
    """A local Gram matrix could not be factored (degenerate cell)."""


@dataclass(frozen=True)
class Quadrature:
    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,)
    params: np.ndarray | None = None  # edge rules only: t in [-1, 1]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


def poly_dim(k: int) -> int:
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


@lru_cache(maxsize=None)
def monomial_exponents(k: int) -> np.ndarray:
    return np.array([(d - j, j) for d in range(k + 1) for j in range(d + 1)], dtype=int).reshape(-1, 2)


@lru_cache(maxsize=None)
def _reference_triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    # collapsed (Duffy) Gauss-Jacobi x Gauss-Legendre rule, exact for P_degree
    n = max(1, (degree + 2) // 2)
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xl, wl = legendre.leggauss(n)
    u = 0.5 * (1.0 + xj)
    w = 0.5 * (1.0 + xl)
    uu, ww = np.meshgrid(u, w, indexing="ij")
    bary = np.column_stack([uu.ravel(), ((1.0 - uu) * ww).ravel()])
    weights = np.outer(wj / 4.0, wl / 2.0).ravel()
    return bary, weights


def triangle_quadrature(vertices: np.ndarray, degree: int) -> Quadrature:
    """Quadrature on a triangle, exact for polynomials of total degree <= ``degree``."""
    ref, w = _reference_triangle_rule(degree)
    v = np.asarray(vertices, dtype=float)
    jac = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = abs(np.linalg.det(jac))
    return Quadrature(v[0] + ref @ jac.T, w * det)


@lru_cache(maxsize=None)
def _gauss_legendre(degree: int) -> tuple[np.ndarray, np.ndarray]:
    return legendre.leggauss(max(1, (degree + 2) // 2))


def cell_quadrature(mesh: Mesh, t: int, degree: int) -> Quadrature:
    """Cell rule; polygons with more than three vertices are fanned from the centroid."""
    if degree < 0:
        raise ValueError("quadrature degree must be non-negative")
    pts = mesh.vertices[mesh.cells[t]]
    if len(pts) == 3:
        return triangle_quadrature(pts, degree)
    c = mesh.cell_centroids[t]
    parts = [triangle_quadrature(np.array([c, a, b]), degree) for a, b in zip(pts, np.roll(pts, -1, axis=0))]
    return Quadrature(np.vstack([q.points for q in parts]), np.concatenate([q.weights for q in parts]))


def edge_quadrature(mesh: Mesh, e: int, degree: int) -> Quadrature:
    t, w = _gauss_legendre(degree)
    return Quadrature(mesh.edge_points(e, t), w * 0.5 * mesh.edge_lengths[e], params=t)


def _monomial_values(s: np.ndarray, exps: np.ndarray) -> np.ndarray:
    return s[:, :1] ** exps[:, 0] * s[:, 1:] ** exps[:, 1]


def _monomial_grads(s: np.ndarray, exps: np.ndarray) -> np.ndarray:
    a, b = exps[:, 0], exps[:, 1]
    x, y = s[:, :1], s[:, 1:]
    dx = a * x ** np.maximum(a - 1, 0) * y**b
    dy = b * x**a * y ** np.maximum(b - 1, 0)
    return np.stack([dx, dy], axis=-1)


_transforms: "weakref.WeakKeyDictionary[Mesh, dict]" = weakref.WeakKeyDictionary()


def _orthonormalizing_transform(mesh: Mesh, t: int, k: int) -> np.ndarray:
    """Upper triangular ``T`` with ``int_T (m T)_i (m T)_j = |T| delta_ij`` for scaled monomials ``m``.

    Two Cholesky passes; the second removes most of the error of the first on
    badly conditioned cells.
    """
    cache = _transforms.setdefault(mesh, {})
    if (t, k) in cache:
        return cache[t, k]
    quad = cell_quadrature(mesh, t, 2 * k + 2)
    s = (quad.points - mesh.cell_centroids[t]) / mesh.cell_diameters[t]
    m = _monomial_values(s, monomial_exponents(k))
    w = quad.weights / mesh.cell_areas[t]
    transform = np.eye(m.shape[1])
    for _ in range(2):
        phi = m @ transform
        try:
            r = linalg.cholesky((phi * w[:, None]).T @ phi, lower=False)
        except linalg.LinAlgError as exc:
            raise BasisConditioningError(f"cell {t}: monomial Gram matrix of degree {k} is not positive definite") from exc
        transform = transform @ linalg.solve_triangular(r, np.eye(len(r)), lower=False)
    cache[t, k] = transform
    return transform


class CellBasis:
    """Orthonormalized scaled monomial basis of ``P_k`` on one cell.

    Each function has mean square one over the cell, so the Gram matrix is
    ``|T|`` times the identity up to rounding.  Without a ``transform`` the
    raw scaled monomials are used.
    """

    def __init__(self, centroid: np.ndarray, diameter: float, k: int, transform: np.ndarray | None = None):
        self.centroid = np.asarray(centroid, dtype=float)
        self.diameter = float(diameter)
        self.k = k
        self.exponents = monomial_exponents(k)
        self.transform = np.eye(len(self.exponents)) if transform is None else np.asarray(transform)

    @classmethod
    def on_cell(cls, mesh: Mesh, t: int, k: int) -> "CellBasis":
        return cls(mesh.cell_centroids[t], mesh.cell_diameters[t], k, _orthonormalizing_transform(mesh, t, k))

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def _scaled(self, pts):
        return (np.atleast_2d(pts) - self.centroid) / self.diameter

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values, shape (npts, dim)."""
        return _monomial_values(self._scaled(pts), self.exponents) @ self.transform

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Basis gradients, shape (npts, dim, 2)."""
        g = _monomial_grads(self._scaled(pts), self.exponents) / self.diameter
        return np.einsum("nia,ij->nja", g, self.transform)

    def gram(self, quad: Quadrature) -> np.ndarray:
        phi = self.eval(quad.points)
        return (phi * quad.weights[:, None]).T @ phi

    def evaluate(self, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Evaluate coefficient arrays of shape (dim,) or (ncomp, dim)."""
        coeffs = np.asarray(coeffs)
        phi = self.eval(pts)[:, : coeffs.shape[-1]]
        return phi @ coeffs.T if coeffs.ndim == 2 else phi @ coeffs


class EdgeBasis:
    """Legendre basis of ``P_k(e)`` in the edge parameter t."""

    def __init__(self, length: float, k: int):
        self.length = float(length)
        self.k = k

    @property
    def dim(self) -> int:
        return self.k + 1

    def eval(self, t: np.ndarray) -> np.ndarray:
        return legendre.legvander(np.asarray(t, dtype=float), self.k)

    def gram(self) -> np.ndarray:
        # int_e P_i P_j ds = (L/2) * 2/(2i+1) delta_ij
        return np.diag(self.length / (2 * np.arange(self.k + 1) + 1.0))


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = linalg.cho_factor(gram)
    except linalg.LinAlgError as exc:
        raise BasisConditioningError("local Gram matrix is not positive definite") from exc
    return linalg.cho_solve(factor, rhs)


def _eval_field(f, pts):
    if callable(f):
        return np.asarray(f(pts))
    return np.broadcast_to(np.asarray(f), (len(pts),) + np.shape(f))


def project_cell(f, mesh: Mesh, t: int, order: int, degree: int | None = None) -> np.ndarray:
    """L2(T) projection onto ``P_order`` (scalar) or ``[P_order]^2`` (vector).

    Parameters
    ----------
    f : callable or constant
        ``f(pts)`` returns shape (npts,) or (npts, 2); complex values allowed.
    degree : int, optional
        Quadrature degree, ``2*order + 2`` by default.

    Returns
    -------
    ndarray
        Coefficients of shape (dim,) for scalar input or (2, dim) for vectors.
    """
    quad = cell_quadrature(mesh, t, 2 * order + 2 if degree is None else degree)
    basis = CellBasis.on_cell(mesh, t, order)
    phi = basis.eval(quad.points)
    vals = _eval_field(f, quad.points)
    rhs = (phi * quad.weights[:, None]).T @ vals
    coeffs = _solve_gram(basis.gram(quad), rhs)
    return coeffs.T if coeffs.ndim == 2 else coeffs


def project_edge(f, mesh: Mesh, e: int, order: int, degree: int | None = None) -> np.ndarray:
    """L2(e) projection of a scalar field onto Legendre coefficients of ``P_order(e)``."""
    quad = edge_quadrature(mesh, e, 2 * order + 2 if degree is None else degree)
    basis = EdgeBasis(mesh.edge_lengths[e], order)
    vals = _eval_field(f, quad.points)
    rhs = (basis.eval(quad.params) * quad.weights[:, None]).T @ vals
    return rhs / np.diag(basis.gram())[(slice(None),) + (None,) * (rhs.ndim - 1)]


def project_edge_vector(u, mesh: Mesh, e: int, side, coeff: np.ndarray, order: int,
                        degree: int | None = None) -> np.ndarray:
    """Project ``Q_b(coeff u . n) n + Q_b(n x (u x n))`` onto ``[P_order(e)]^2``.

    ``side`` is an :class:`~wgmaxwell.mesh.EdgeSide` or a cell id adjacent to
    ``e``; it fixes the outward normal ``n``.  The result is expressed in
    Cartesian components, shape (2, order + 1).
    """
    cell = getattr(side, "cell", side)
    sides = {s.cell: s.sign for s in mesh.edge_sides(e)}
    if cell not in sides:
        raise ValueError(f"cell {cell} is not adjacent to edge {e}")
    n = sides[cell] * mesh.edge_normals[e]
    tvec = np.array([-n[1], n[0]])
    coeff = np.asarray(coeff, dtype=float)

    def parts(pts):
        vals = _eval_field(u, pts)
        flux = vals @ (coeff.T @ n)
        tang = vals @ tvec
        return np.stack([flux, tang], axis=-1)

    nt = project_edge(parts, mesh, e, order, degree)  # (order+1, 2)
    return np.outer(n, nt[:, 0]) + np.outer(tvec, nt[:, 1])


@lru_cache(maxsize=None)
def _gradient_maps(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Maps P_k scaled-monomial coefficients to unscaled d/dx, d/dy coefficients in P_k."""
    exps = monomial_exponents(k)
    lookup = {tuple(e): i for i, e in enumerate(exps)}
    dx = np.zeros((len(exps), len(exps)))
    dy = np.zeros_like(dx)
    for j, (a, b) in enumerate(exps):
        if a > 0:
            dx[lookup[(a - 1, b)], j] = a
        if b > 0:
            dy[lookup[(a, b - 1)], j] = b
    return dx, dy


def gradient_coefficients(coeffs: np.ndarray, basis: CellBasis) -> np.ndarray:
    """Exact gradient of a cell polynomial, as (2, dim) coefficients in ``basis``.

    ``coeffs`` may belong to a lower-degree leading part of ``basis``.
    """
    dx, dy = _gradient_maps(basis.k)
    c = np.zeros(basis.dim, dtype=np.result_type(coeffs, float))
    c[: len(coeffs)] = coeffs
    mono = basis.transform @ c
    back = [linalg.solve_triangular(basis.transform, d @ mono, lower=False) for d in (dx, dy)]
    return np.stack(back) / basis.diameter
