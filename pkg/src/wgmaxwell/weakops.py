"""Discrete weak divergence and weak curl on a single cell.

Local degrees of freedom of a weak function on cell T are laid out as::

    [v0_x (dim P_k), v0_y (dim P_k), edge 0: a (k+1), b (k+1), edge 1: ...]

where on each edge ``v_b = a n_e + b t_e`` with ``t_e`` the normal ``n_e``
rotated by +90 degrees.  With the cell-outward normal ``n = s n_e`` this gives
``v_b . n = s a`` and ``v_b x n = -s b`` (2D cross product
``v x n = v_1 n_2 - v_2 n_1``).  The curl of a scalar test function is the
rotated gradient ``(d_y phi, -d_x phi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre

from .basis import (
    CellBasis,
    Quadrature,
    cell_quadrature,
    edge_quadrature,
    poly_dim,
    project_cell,
    project_edge_vector,
    _solve_gram,
)
from .mesh import Mesh

__all__ = [
    "LocalSpace",
    "WeakFunctionLocal",
    "weak_divergence",
    "weak_curl",
    "CommutativityResult",
    "check_commutativity",
    "cartesian_to_frame",
    "frame_to_cartesian",
]


def cartesian_to_frame(coeffs: np.ndarray, normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split Cartesian edge coefficients (2, nb) into ``n_e`` and ``t_e`` components."""
    tangent = np.array([-normal[1], normal[0]])
    return normal @ coeffs, tangent @ coeffs


def frame_to_cartesian(a: np.ndarray, b: np.ndarray, normal: np.ndarray) -> np.ndarray:
    tangent = np.array([-normal[1], normal[0]])
    return np.outer(normal, a) + np.outer(tangent, b)


class LocalSpace:
    """Basis evaluations and quadrature for the weak space ``V(k, T)`` on one cell."""

    def __init__(self, mesh: Mesh, cell: int, k: int, degree: int | None = None):
        if k < 1:
            raise ValueError(f"polynomial order must be >= 1, got {k}")
        self.mesh = mesh
        self.cell = cell
        self.k = k
        self.degree = 2 * k + 2 if degree is None else degree
        self.h = float(mesh.cell_diameters[cell])
        self.basis = CellBasis.on_cell(mesh, cell, k)
        self.quad = cell_quadrature(mesh, cell, self.degree)
        self.phi = self.basis.eval(self.quad.points)
        self.dphi = self.basis.grad(self.quad.points)
        self.edges = mesh.cell_edges[cell]
        self.signs = mesh.cell_edge_signs[cell]
        self.edge_normals = mesh.edge_normals[self.edges]  # n_e, not signed
        self.edge_quads: list[Quadrature] = [edge_quadrature(mesh, e, self.degree) for e in self.edges]
        self.edge_phi = [self.basis.eval(q.points) for q in self.edge_quads]
        self.edge_leg = [legendre.legvander(q.params, k) for q in self.edge_quads]
        self.n0 = poly_dim(k)
        self.nr = poly_dim(k - 1)
        self.nb = k + 1
        self.nloc = 2 * self.n0 + 2 * self.nb * len(self.edges)
        self.gram = (self.phi * self.quad.weights[:, None]).T @ self.phi

    # -- layout -----------------------------------------------------------

    def v0_slice(self, comp: int) -> slice:
        return slice(comp * self.n0, (comp + 1) * self.n0)

    def edge_slice(self, j: int, part: str) -> slice:
        start = 2 * self.n0 + 2 * self.nb * j + (self.nb if part == "b" else 0)
        return slice(start, start + self.nb)

    # -- test bases of arbitrary order --------------------------------------

    def _test_basis(self, r: int):
        if r <= self.k:
            n = poly_dim(r)
            return (self.phi[:, :n], self.dphi[:, :n], [p[:, :n] for p in self.edge_phi])
        basis = CellBasis.on_cell(self.mesh, self.cell, r)
        return (basis.eval(self.quad.points), basis.grad(self.quad.points),
                [basis.eval(q.points) for q in self.edge_quads])

    def test_gram(self, r: int) -> np.ndarray:
        phi, _, _ = self._test_basis(r)
        return (phi * self.quad.weights[:, None]).T @ phi

    @cached_property
    def gram_r(self) -> np.ndarray:
        return self.gram[: self.nr, : self.nr]

    # -- right-hand sides of the weak operator definitions ----------------

    def divergence_rhs(self, coeff: np.ndarray, r: int | None = None) -> np.ndarray:
        """Matrix of ``v -> -(coeff v0, grad phi) + <v_b . n, phi>`` over ``phi in P_r``."""
        r = self.k - 1 if r is None else r
        phi_t, dphi_t, edge_phi_t = self._test_basis(r)
        coeff = np.asarray(coeff, dtype=float)
        rhs = np.zeros((phi_t.shape[1], self.nloc))
        w = self.quad.weights
        for c in range(2):
            flux = dphi_t @ coeff[:, c]  # (nq, nr): grad phi . (coeff e_c)
            rhs[:, self.v0_slice(c)] = -(flux * w[:, None]).T @ self.phi
        for j, q in enumerate(self.edge_quads):
            rhs[:, self.edge_slice(j, "a")] = self.signs[j] * (edge_phi_t[j] * q.weights[:, None]).T @ self.edge_leg[j]
        return rhs

    def curl_rhs(self, r: int | None = None) -> np.ndarray:
        """Matrix of ``v -> (v0, curl phi) - <v_b x n, phi>`` over ``phi in P_r``."""
        r = self.k - 1 if r is None else r
        phi_t, dphi_t, edge_phi_t = self._test_basis(r)
        rhs = np.zeros((phi_t.shape[1], self.nloc))
        w = self.quad.weights[:, None]
        rhs[:, self.v0_slice(0)] = (dphi_t[:, :, 1] * w).T @ self.phi
        rhs[:, self.v0_slice(1)] = -(dphi_t[:, :, 0] * w).T @ self.phi
        for j, q in enumerate(self.edge_quads):
            rhs[:, self.edge_slice(j, "b")] = self.signs[j] * (edge_phi_t[j] * q.weights[:, None]).T @ self.edge_leg[j]
        return rhs

    def divergence_matrix(self, coeff: np.ndarray, r: int | None = None) -> np.ndarray:
        """Local dofs to coefficients of the weak divergence of ``coeff v`` in ``P_r``."""
        r = self.k - 1 if r is None else r
        return _solve_gram(self.test_gram(r), self.divergence_rhs(coeff, r))

    def curl_matrix(self, r: int | None = None) -> np.ndarray:
        r = self.k - 1 if r is None else r
        return _solve_gram(self.test_gram(r), self.curl_rhs(r))

    # -- element matrices -------------------------------------------------

    def mass_matrix(self, coeff=None) -> np.ndarray:
        """``(coeff v0, w0)_T`` on the full local layout; identity coefficient by default."""
        coeff = np.eye(2) if coeff is None else np.asarray(coeff, dtype=float)
        m = np.zeros((self.nloc, self.nloc))
        for i in range(2):
            for j in range(2):
                m[self.v0_slice(i), self.v0_slice(j)] = coeff[i, j] * self.gram
        return m

    def curl_curl_matrix(self) -> np.ndarray:
        """``(curl_w v, curl_w w)_T`` with the weak curl in ``P_{k-1}``."""
        rhs = self.curl_rhs()
        return rhs.T @ _solve_gram(self.gram_r, rhs)

    def jump_operators(self, coeff) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Per-edge evaluation of ``(coeff v0 - v_b) . n`` and ``(v0 - v_b) x n`` at edge nodes."""
        coeff = np.asarray(coeff, dtype=float)
        normal_ops, tangential_ops = [], []
        for j, q in enumerate(self.edge_quads):
            s = self.signs[j]
            n = s * self.edge_normals[j]
            nq = len(q.weights)
            nop = np.zeros((nq, self.nloc))
            top = np.zeros((nq, self.nloc))
            for c in range(2):
                nop[:, self.v0_slice(c)] = self.edge_phi[j] * (coeff[:, c] @ n)
            top[:, self.v0_slice(0)] = self.edge_phi[j] * n[1]
            top[:, self.v0_slice(1)] = -self.edge_phi[j] * n[0]
            nop[:, self.edge_slice(j, "a")] = -s * self.edge_leg[j]
            top[:, self.edge_slice(j, "b")] = s * self.edge_leg[j]
            normal_ops.append(nop)
            tangential_ops.append(top)
        return normal_ops, tangential_ops

    def stabilizer_matrices(self, coeff) -> tuple[np.ndarray, np.ndarray]:
        """Normal and tangential parts of the stabilizer, each scaled by ``1/h_T``."""
        normal_ops, tangential_ops = self.jump_operators(coeff)
        sn = np.zeros((self.nloc, self.nloc))
        st = np.zeros_like(sn)
        for q, nop, top in zip(self.edge_quads, normal_ops, tangential_ops):
            sn += (nop * q.weights[:, None]).T @ nop
            st += (top * q.weights[:, None]).T @ top
        return sn / self.h, st / self.h

    def edge_mass_matrix(self) -> np.ndarray:
        """``sum_e h_T int_e |v_b|^2`` restricted to the edge blocks of the layout."""
        m = np.zeros((self.nloc, self.nloc))
        for j in range(len(self.edges)):
            g = np.diag(self.mesh.edge_lengths[self.edges[j]] / (2 * np.arange(self.nb) + 1.0))
            for part in "ab":
                sl = self.edge_slice(j, part)
                m[sl, sl] = self.h * g
        return m


@dataclass
class WeakFunctionLocal:
    """A weak function ``{v0, v_b}`` on one cell with Cartesian coefficients.

    ``v0`` has shape (2, dim P_k); ``vb[j]`` has shape (2, k+1) and holds the
    Legendre coefficients of ``v_b`` on the j-th edge of the cell loop.
    """

    cell: int
    v0: np.ndarray
    vb: list = field(default_factory=list)

    def dofs(self, space: LocalSpace) -> np.ndarray:
        v0 = np.asarray(self.v0)
        x = np.zeros(space.nloc, dtype=np.result_type(v0, *self.vb, float))
        x[space.v0_slice(0)] = v0[0]
        x[space.v0_slice(1)] = v0[1]
        for j, coeffs in enumerate(self.vb):
            a, b = cartesian_to_frame(np.asarray(coeffs), space.edge_normals[j])
            x[space.edge_slice(j, "a")] = a
            x[space.edge_slice(j, "b")] = b
        return x

    @classmethod
    def from_dofs(cls, space: LocalSpace, x: np.ndarray) -> "WeakFunctionLocal":
        v0 = np.stack([x[space.v0_slice(0)], x[space.v0_slice(1)]])
        vb = [frame_to_cartesian(x[space.edge_slice(j, "a")], x[space.edge_slice(j, "b")], space.edge_normals[j])
              for j in range(len(space.edges))]
        return cls(space.cell, v0, vb)

    @classmethod
    def zero(cls, space: LocalSpace) -> "WeakFunctionLocal":
        return cls(space.cell, np.zeros((2, space.n0)), [np.zeros((2, space.nb)) for _ in space.edges])


def weak_divergence(v: WeakFunctionLocal, space: LocalSpace, coeff=None, r: int | None = None) -> np.ndarray:
    """Coefficients in ``P_r(T)`` of the discrete weak divergence of ``coeff v``."""
    coeff = np.eye(2) if coeff is None else coeff
    return space.divergence_matrix(coeff, r) @ v.dofs(space)


def weak_curl(v: WeakFunctionLocal, space: LocalSpace, r: int | None = None) -> np.ndarray:
    """Coefficients in ``P_r(T)`` of the scalar discrete weak curl of ``v``."""
    return space.curl_matrix(r) @ v.dofs(space)


@dataclass
class CommutativityResult:
    divergence: float
    curl: float
    cells: int
    rms: float = 0.0

    @property
    def max_residual(self) -> float:
        return max(self.divergence, self.curl)


def _central_jacobian(w, step: float):
    def jac(pts):
        pts = np.atleast_2d(pts)
        cols = []
        for d in range(2):
            shift = np.zeros(2)
            shift[d] = step
            cols.append((np.asarray(w(pts + shift)) - np.asarray(w(pts - shift))) / (2 * step))
        return np.stack(cols, axis=-1)  # J[..., i, j] = d w_i / d x_j

    return jac


def _cell_coefficient(coeff, t: int) -> np.ndarray:
    coeff = np.asarray(coeff, dtype=float)
    return coeff[t] if coeff.ndim == 3 else coeff


def check_commutativity(w, mesh: Mesh, k: int, coeff=None, jac=None, cells=None,
                        degree: int | None = None) -> CommutativityResult:
    """Largest cell residual of the commuting-projection identities.

    Measures ``||div_w(coeff Q_h w) - Q(div(coeff w))||_T`` and
    ``||curl_w(Q_h w) - Q(curl w)||_T`` with both weak operators landing in
    ``P_{k-1}``.  ``rms`` holds the largest residual divided by ``|T|^(1/2)``,
    which does not shrink with the cell size; rounding makes it grow like
    ``1/h_T``.  ``jac(pts)`` returns the Jacobian ``d w_i / d x_j`` with shape
    (npts, 2, 2); when omitted, central differences with step ``h * 1e-5`` are
    used and the residual is limited by differencing error.

    ``coeff`` is a single 2x2 matrix or a per-cell array (ncells, 2, 2).
    """
    coeff = np.eye(2) if coeff is None else coeff
    if jac is None:
        jac = _central_jacobian(w, mesh.h * 1e-5)
    cells = range(mesh.n_cells) if cells is None else cells
    div_res = curl_res = rms = 0.0
    count = 0
    for t in cells:
        kappa = _cell_coefficient(coeff, t)
        space = LocalSpace(mesh, t, k, degree)
        q0 = project_cell(w, mesh, t, k, space.degree)
        vb = [project_edge_vector(w, mesh, e, t, kappa, k, space.degree) for e in space.edges]
        v = WeakFunctionLocal(t, q0, vb)
        x = v.dofs(space)

        def div_exact(pts):
            j = jac(pts)
            return np.einsum("ij,nji->n", kappa, j)

        def curl_exact(pts):
            j = jac(pts)
            return j[:, 1, 0] - j[:, 0, 1]

        d = space.divergence_matrix(kappa) @ x - project_cell(div_exact, mesh, t, k - 1, space.degree)
        c = space.curl_matrix() @ x - project_cell(curl_exact, mesh, t, k - 1, space.degree)
        dn = float(np.sqrt(abs(np.conj(d) @ space.gram_r @ d)))
        cn = float(np.sqrt(abs(np.conj(c) @ space.gram_r @ c)))
        div_res = max(div_res, dn)
        curl_res = max(curl_res, cn)
        rms = max(rms, max(dn, cn) / np.sqrt(mesh.cell_areas[t]))
        count += 1
    return CommutativityResult(div_res, curl_res, count, rms)
