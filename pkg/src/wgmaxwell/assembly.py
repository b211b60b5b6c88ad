"""Global spaces, coefficient fields and assembly of the saddle-point systems.

Global unknowns are ordered as::

    [v0 of every cell | v_b of every edge | multiplier of every cell | mean-zero multiplier]

Per cell the ``v0`` block holds ``2 dim P_k`` coefficients, per edge the
``v_b`` block holds ``(a, b)`` with ``v_b = a n_e + b t_e`` (``k+1`` Legendre
coefficients each) and per cell the multiplier holds ``dim P_{k-1}``
coefficients.  The last unknown only exists for the magnetic problem, whose
multiplier space has zero mean.

Forms are bilinear (no complex conjugation) and assembled over real basis
functions, so the field block of the system matrix is complex symmetric.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .basis import poly_dim, project_cell, project_edge_vector
from .mesh import Mesh
from .weakops import LocalSpace, cartesian_to_frame

__all__ = [
    "ELECTRIC",
    "MAGNETIC",
    "CoefficientError",
    "CoercivityError",
    "CoefficientField",
    "DofMap",
    "WeakVector",
    "SourceData",
    "LinearSystem",
    "Discretization",
    "interpolate",
    "essential_values",
    "stabilizer",
    "field_form_matrix",
    "assemble_unconstrained",
    "apply_boundary_conditions",
    "assemble_electric",
    "assemble_magnetic",
    "assemble",
]

ELECTRIC = 1
MAGNETIC = 2


def _kind(kind) -> int:
    if kind in (1, "1", "electric"):
        return ELECTRIC
    if kind in (2, "2", "magnetic"):
        return MAGNETIC
    raise ValueError(f"unknown problem kind {kind!r}; expected 1/'electric' or 2/'magnetic'")


class CoefficientError(ValueError):
    """Material data that is not symmetric positive definite or has the wrong shape."""


class CoercivityError(ValueError):
    """Conductivity or frequency is not positive, so the field form is not coercive."""


def _as_cell_matrices(value, n_cells: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape == (2, 2):
        arr = np.broadcast_to(arr, (n_cells, 2, 2))
    elif np.ndim(arr) == 0:
        arr = np.broadcast_to(float(arr) * np.eye(2), (n_cells, 2, 2))
    if arr.shape != (n_cells, 2, 2):
        raise CoefficientError(f"{name} must be a 2x2 matrix or have shape ({n_cells}, 2, 2), got {arr.shape}")
    return np.array(arr)


def _as_cell_scalars(value, n_cells: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n_cells,))
    if not np.all(np.isfinite(arr)):
        raise CoefficientError(f"{name} has non-finite entries")
    return np.array(arr)


@dataclass
class CoefficientField:
    """Per-cell material data and the global frequency.

    ``eps`` and ``mu`` are 2x2 SPD matrices per cell.  The curl terms of the 2D
    forms need scalar coefficients; ``eps_z`` and ``mu_z`` supply them and
    default to half the trace of ``eps`` and ``mu``.
    """

    eps: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    omega: float
    eps_z: np.ndarray | None = None
    mu_z: np.ndarray | None = None

    def __post_init__(self):
        n = next((len(a) for a in (self.eps, self.mu) if np.ndim(a) == 3), np.size(self.sigma))
        self.eps = _as_cell_matrices(self.eps, n, "eps")
        self.mu = _as_cell_matrices(self.mu, n, "mu")
        self.sigma = _as_cell_scalars(self.sigma, n, "sigma")
        self.eps_z = 0.5 * np.trace(self.eps, axis1=1, axis2=2) if self.eps_z is None else _as_cell_scalars(self.eps_z, n, "eps_z")
        self.mu_z = 0.5 * np.trace(self.mu, axis1=1, axis2=2) if self.mu_z is None else _as_cell_scalars(self.mu_z, n, "mu_z")
        self.omega = float(self.omega)
        for name in ("eps", "mu"):
            m = getattr(self, name)
            if not np.allclose(m, np.swapaxes(m, 1, 2), rtol=0, atol=1e-14 * max(1.0, np.abs(m).max())):
                raise CoefficientError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise CoefficientError(f"{name} is not positive definite")
        if np.any(self.mu_z <= 0) or np.any(self.eps_z <= 0):
            raise CoefficientError("eps_z and mu_z must be positive")

    @classmethod
    def uniform(cls, n_cells: int, eps=1.0, mu=1.0, sigma=1.0, omega=1.0, eps_z=None, mu_z=None) -> "CoefficientField":
        return cls(_as_cell_matrices(eps, n_cells, "eps"), _as_cell_matrices(mu, n_cells, "mu"),
                   _as_cell_scalars(sigma, n_cells, "sigma"), omega, eps_z, mu_z)

    @classmethod
    def from_dict(cls, data: dict, n_cells: int, omega: float) -> "CoefficientField":
        """Build from ``{"default": {...}, "start:stop": {...}}`` cell-range entries.

        Each entry may set ``eps``, ``mu``, ``sigma``, ``eps_z`` and ``mu_z``;
        later ranges override earlier ones and the default.
        """
        eps = np.broadcast_to(np.eye(2), (n_cells, 2, 2)).copy()
        mu = eps.copy()
        sigma = np.ones(n_cells)
        eps_z = np.full(n_cells, np.nan)
        mu_z = np.full(n_cells, np.nan)
        entries = sorted(data.items(), key=lambda kv: kv[0] != "default")
        for key, entry in entries:
            if key == "default":
                cells = slice(None)
            else:
                try:
                    start, stop = (int(s) if s else None for s in key.split(":"))
                except ValueError:
                    raise CoefficientError(f"bad cell range {key!r}; expected 'start:stop' or 'default'") from None
                cells = slice(start, stop)
            if not isinstance(entry, dict):
                raise CoefficientError(f"entry {key!r} must be an object")
            unknown = set(entry) - {"eps", "mu", "sigma", "eps_z", "mu_z"}
            if unknown:
                raise CoefficientError(f"entry {key!r} has unknown keys {sorted(unknown)}")
            if "eps" in entry:
                eps[cells] = _as_cell_matrices(entry["eps"], 1, "eps")[0]
            if "mu" in entry:
                mu[cells] = _as_cell_matrices(entry["mu"], 1, "mu")[0]
            if "sigma" in entry:
                sigma[cells] = float(entry["sigma"])
            if "eps_z" in entry:
                eps_z[cells] = float(entry["eps_z"])
            if "mu_z" in entry:
                mu_z[cells] = float(entry["mu_z"])
        eps_z = np.where(np.isnan(eps_z), 0.5 * np.trace(eps, axis1=1, axis2=2), eps_z)
        mu_z = np.where(np.isnan(mu_z), 0.5 * np.trace(mu, axis1=1, axis2=2), mu_z)
        return cls(eps, mu, sigma, omega, eps_z, mu_z)

    @classmethod
    def from_file(cls, path, n_cells: int, omega: float) -> "CoefficientField":
        return cls.from_dict(json.loads(Path(path).read_text()), n_cells, omega)

    @property
    def n_cells(self) -> int:
        return len(self.sigma)

    @property
    def sigma0(self) -> float:
        return float(self.sigma.min())

    def require_coercive(self) -> None:
        if self.omega <= 0:
            raise CoercivityError(f"frequency must be positive, got omega = {self.omega}")
        if np.any(self.sigma <= 0):
            t = int(np.argmin(self.sigma))
            raise CoercivityError(f"conductivity must be positive, got sigma = {self.sigma[t]} on cell {t}")

    def kappa(self, kind) -> np.ndarray:
        """The divergence coefficient: ``eps`` for the electric problem, ``mu`` for the magnetic one."""
        return self.eps if _kind(kind) == ELECTRIC else self.mu

    def curl_coefficient(self, kind) -> np.ndarray:
        if _kind(kind) == ELECTRIC:
            return 1.0 / self.mu_z
        return 1.0 / (1j * self.omega * self.eps_z + self.sigma)


class DofMap:
    """Index layout of the global unknowns and the essential boundary mask.

    ``kind`` 1 removes the tangential component ``b`` of ``v_b`` on boundary
    edges (``v_b x n = 0``); ``kind`` 2 removes the normal component ``a``
    (``v_b . n = 0``) and appends one mean-zero Lagrange multiplier.
    """

    def __init__(self, mesh: Mesh, k: int, kind):
        if k < 1:
            raise ValueError(f"polynomial order must be >= 1, got {k}")
        self.mesh = mesh
        self.k = k
        self.kind = _kind(kind)
        self.n0 = poly_dim(k)
        self.nr = poly_dim(k - 1)
        self.nb = k + 1
        self.n_cells = mesh.n_cells
        self.n_edges = mesh.n_edges
        self.edge_offset = 2 * self.n0 * self.n_cells
        self.n_field = self.edge_offset + 2 * self.nb * self.n_edges
        self.multiplier_offset = self.n_field
        self.n_multiplier = self.nr * self.n_cells
        self.constraint_index = self.n_field + self.n_multiplier if self.kind == MAGNETIC else None
        self.n_total = self.n_field + self.n_multiplier + (1 if self.kind == MAGNETIC else 0)

        mask = np.zeros(self.n_total, dtype=bool)
        part = "b" if self.kind == ELECTRIC else "a"
        for e in mesh.boundary_edges:
            mask[self.edge_dofs(e, part)] = True
        self.essential = mask
        self.constrained = np.flatnonzero(mask)
        self.free = np.flatnonzero(~mask)
        self._cell_dofs = [self._build_cell_dofs(t) for t in range(self.n_cells)]

    def v0_dofs(self, t: int) -> np.ndarray:
        start = 2 * self.n0 * t
        return np.arange(start, start + 2 * self.n0)

    def edge_dofs(self, e: int, part: str | None = None) -> np.ndarray:
        start = self.edge_offset + 2 * self.nb * e
        if part == "a":
            return np.arange(start, start + self.nb)
        if part == "b":
            return np.arange(start + self.nb, start + 2 * self.nb)
        return np.arange(start, start + 2 * self.nb)

    def multiplier_dofs(self, t: int) -> np.ndarray:
        start = self.multiplier_offset + self.nr * t
        return np.arange(start, start + self.nr)

    def _build_cell_dofs(self, t: int) -> np.ndarray:
        parts = [self.v0_dofs(t)] + [self.edge_dofs(e) for e in self.mesh.cell_edges[t]]
        return np.concatenate(parts)

    def cell_dofs(self, t: int) -> np.ndarray:
        """Global field indices in the local layout order of :class:`LocalSpace`."""
        return self._cell_dofs[t]

    @property
    def n_free(self) -> int:
        return len(self.free)

    def __repr__(self) -> str:
        return f"DofMap(k={self.k}, kind={self.kind}, n_total={self.n_total}, n_free={self.n_free})"


@dataclass
class WeakVector:
    """Coefficients of a member of ``V_h x W_h`` in the global layout of ``dofmap``."""

    dofmap: DofMap
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.dofmap.n_total,):
            raise ValueError(f"expected {self.dofmap.n_total} coefficients, got {self.values.shape}")

    @classmethod
    def zeros(cls, dofmap: DofMap, dtype=complex) -> "WeakVector":
        return cls(dofmap, np.zeros(dofmap.n_total, dtype=dtype))

    def v0(self, t: int) -> np.ndarray:
        return self.values[self.dofmap.v0_dofs(t)].reshape(2, self.dofmap.n0)

    def edge_frame(self, e: int) -> tuple[np.ndarray, np.ndarray]:
        return self.values[self.dofmap.edge_dofs(e, "a")], self.values[self.dofmap.edge_dofs(e, "b")]

    def vb(self, e: int) -> np.ndarray:
        """Cartesian Legendre coefficients of ``v_b`` on edge ``e``, shape (2, k+1)."""
        a, b = self.edge_frame(e)
        n = self.dofmap.mesh.edge_normals[e]
        return np.outer(n, a) + np.outer([-n[1], n[0]], b)

    def p(self, t: int) -> np.ndarray:
        return self.values[self.dofmap.multiplier_dofs(t)]

    def local(self, t: int) -> np.ndarray:
        return self.values[self.dofmap.cell_dofs(t)]

    @property
    def field(self) -> np.ndarray:
        return self.values[: self.dofmap.n_field]

    @property
    def multiplier(self) -> np.ndarray:
        d = self.dofmap
        return self.values[d.multiplier_offset: d.multiplier_offset + d.n_multiplier]


@dataclass
class SourceData:
    """Right-hand side data of either problem.

    ``volume`` is ``j_e`` for the electric problem and ``eta`` for the
    magnetic one; both map points (n, 2) to complex vectors (n, 2).  ``rho``
    is the electric charge density.  ``boundary`` is the exact field whose
    essential trace component is imposed on the boundary; ``None`` means
    homogeneous data.
    """

    kind: int
    volume: Callable | None = None
    rho: Callable | None = None
    boundary: Callable | None = None

    def __post_init__(self):
        self.kind = _kind(self.kind)
        if self.kind == MAGNETIC and self.rho is not None:
            raise ValueError("the magnetic problem takes no charge density")


@dataclass
class LinearSystem:
    """A square complex system over the free unknowns of ``dofmap``.

    ``free`` lists the global indices of the unknowns, ``constrained`` the
    eliminated ones with prescribed ``values``.  The unreduced matrix and
    right-hand side are kept for post-solve checks.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    free: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    full_matrix: sp.csr_matrix | None = None
    full_rhs: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def expand(self, x: np.ndarray) -> WeakVector:
        """Insert prescribed values and return the full weak vector."""
        full = np.zeros(self.dofmap.n_total, dtype=complex)
        full[self.free] = x
        full[self.constrained] = self.values
        return WeakVector(self.dofmap, full)


class Discretization:
    """Per-cell local spaces of one mesh and order, built once and reused."""

    def __init__(self, mesh: Mesh, k: int, degree: int | None = None):
        self.mesh = mesh
        self.k = k
        self.spaces = [LocalSpace(mesh, t, k, degree) for t in range(mesh.n_cells)]
        self._curl_rhs = [s.curl_rhs() for s in self.spaces]
        self._cc = [r.T @ np.linalg.solve(s.gram_r, r) for s, r in zip(self.spaces, self._curl_rhs)]
        self._dofmaps: dict[int, DofMap] = {}

    def dofmap(self, kind) -> DofMap:
        kind = _kind(kind)
        if kind not in self._dofmaps:
            self._dofmaps[kind] = DofMap(self.mesh, self.k, kind)
        return self._dofmaps[kind]

    def curl_rhs(self, t: int) -> np.ndarray:
        return self._curl_rhs[t]

    def curl_curl(self, t: int) -> np.ndarray:
        return self._cc[t]

    def field_matrix(self, local: Callable[[int, LocalSpace], np.ndarray], kind=ELECTRIC) -> sp.csr_matrix:
        """Sum local field matrices ``local(t, space)`` into an ``n_field`` square matrix."""
        d = self.dofmap(kind)
        rows, cols, vals = [], [], []
        for t, space in enumerate(self.spaces):
            idx = d.cell_dofs(t)
            m = local(t, space)
            rows.append(np.repeat(idx, len(idx)))
            cols.append(np.tile(idx, len(idx)))
            vals.append(np.asarray(m).ravel())
        vals = np.concatenate(vals)
        return sp.coo_matrix((vals, (np.concatenate(rows), np.concatenate(cols))),
                             shape=(d.n_field, d.n_field)).tocsr()

    def stabilizer_matrix(self, kind, coeff: CoefficientField) -> sp.csr_matrix:
        kappa = coeff.kappa(kind)
        return self.field_matrix(lambda t, s: sum(s.stabilizer_matrices(kappa[t])), kind)


def interpolate(disc: Discretization, coeff: CoefficientField, kind, u: Callable, p: Callable | None = None) -> WeakVector:
    """The projection ``Q_h u`` with ``Q_h p`` in the multiplier slots.

    Cell parts are L2 projections.  On every edge the boundary part is
    ``Q_b(kappa u . n) n + Q_b(n x (u x n))`` evaluated from the adjacent
    cell with the smaller id, with ``kappa`` that cell's ``eps`` or ``mu``.
    """
    d = disc.dofmap(kind)
    mesh = disc.mesh
    kappa = coeff.kappa(kind)
    x = np.zeros(d.n_total, dtype=complex)
    for t, space in enumerate(disc.spaces):
        x[d.v0_dofs(t)] = project_cell(u, mesh, t, disc.k, space.degree).ravel()
        if p is not None:
            x[d.multiplier_dofs(t)] = project_cell(p, mesh, t, disc.k - 1, space.degree)
    for e in range(mesh.n_edges):
        t = int(mesh.edge_cells[e, 0])
        coeffs = project_edge_vector(u, mesh, e, t, kappa[t], disc.k, disc.spaces[t].degree)
        a, b = cartesian_to_frame(coeffs, mesh.edge_normals[e])
        x[d.edge_dofs(e, "a")] = a
        x[d.edge_dofs(e, "b")] = b
    return WeakVector(d, x)


def essential_values(disc: Discretization, coeff: CoefficientField, kind, u: Callable | None) -> np.ndarray:
    """Prescribed values of the constrained dofs, ordered as ``dofmap.constrained``."""
    d = disc.dofmap(kind)
    if u is None:
        return np.zeros(len(d.constrained), dtype=complex)
    mesh = disc.mesh
    kappa = coeff.kappa(kind)
    x = np.zeros(d.n_total, dtype=complex)
    part = "b" if d.kind == ELECTRIC else "a"
    for e in mesh.boundary_edges:
        t = int(mesh.edge_cells[e, 0])
        coeffs = project_edge_vector(u, mesh, e, t, kappa[t], disc.k, disc.spaces[t].degree)
        a, b = cartesian_to_frame(coeffs, mesh.edge_normals[e])
        x[d.edge_dofs(e, part)] = b if part == "b" else a
    return x[d.constrained]


def stabilizer(disc: Discretization, v: WeakVector, w: WeakVector, kind, coeff: CoefficientField) -> complex:
    """Bilinear stabilizer ``s(v, w)`` with ``eps`` (kind 1) or ``mu`` (kind 2)."""
    s = disc.stabilizer_matrix(kind, coeff)
    return complex(v.field @ (s @ w.field))


def _field_local(disc: Discretization, kind: int, coeff: CoefficientField):
    kappa = coeff.kappa(kind)
    curl_coef = coeff.curl_coefficient(kind)
    omega = coeff.omega

    def local(t: int, space: LocalSpace) -> np.ndarray:
        sn, st = space.stabilizer_matrices(kappa[t])
        m = curl_coef[t] * disc.curl_curl(t) + sn + st
        if kind == ELECTRIC:
            m = m + 1j * omega * coeff.sigma[t] * space.mass_matrix() - omega**2 * space.mass_matrix(coeff.eps[t])
        else:
            m = m + 1j * omega * space.mass_matrix(coeff.mu[t])
        return m

    return local


def field_form_matrix(disc: Discretization, coeff: CoefficientField, kind) -> sp.csr_matrix:
    """The complex field form ``a_1`` (kind 1) or ``a_2`` (kind 2) over all field unknowns."""
    kind = _kind(kind)
    return disc.field_matrix(_field_local(disc, kind, coeff), kind)


def _load_vector(space: LocalSpace, f: Callable) -> np.ndarray:
    vals = np.asarray(f(space.quad.points))
    wphi = space.phi * space.quad.weights[:, None]
    return np.concatenate([wphi.T @ vals[:, 0], wphi.T @ vals[:, 1]])


def assemble_unconstrained(disc: Discretization, coeff: CoefficientField, source: SourceData) -> LinearSystem:
    """Assemble ``[[A, -B^T], [B, 0]]`` over all unknowns, without boundary elimination."""
    kind = source.kind
    coeff.require_coercive()
    if coeff.n_cells != disc.mesh.n_cells:
        raise CoefficientError(f"coefficient field has {coeff.n_cells} cells, mesh has {disc.mesh.n_cells}")
    d = disc.dofmap(kind)
    kappa = coeff.kappa(kind)
    local = _field_local(disc, kind, coeff)
    rows, cols, vals = [], [], []
    rhs = np.zeros(d.n_total, dtype=complex)

    def add(r, c, m):
        rows.append(np.repeat(r, len(c)))
        cols.append(np.tile(c, len(r)))
        vals.append(np.asarray(m, dtype=complex).ravel())

    for t, space in enumerate(disc.spaces):
        idx = d.cell_dofs(t)
        mult = d.multiplier_dofs(t)
        b = space.divergence_rhs(kappa[t])
        add(idx, idx, local(t, space))
        add(idx, mult, -b.T)
        add(mult, idx, b)
        if d.constraint_index is not None:
            c = space.quad.weights @ space.phi[:, : d.nr]
            add(mult, [d.constraint_index], c[:, None])
            add([d.constraint_index], mult, c[None, :])
        if source.volume is not None:
            load = _load_vector(space, source.volume)
            rhs[d.v0_dofs(t)] += -1j * coeff.omega * load if kind == ELECTRIC else load
        if source.rho is not None:
            rho = np.asarray(source.rho(space.quad.points))
            rhs[mult] += (space.phi[:, : d.nr] * space.quad.weights[:, None]).T @ rho
    matrix = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(d.n_total, d.n_total)).tocsr()
    matrix.sum_duplicates()
    return LinearSystem(matrix, rhs, d, np.arange(d.n_total), full_matrix=matrix, full_rhs=rhs)


def apply_boundary_conditions(system: LinearSystem, kind, data=None) -> LinearSystem:
    """Eliminate the essential boundary component of ``v_b``.

    Edge unknowns are already stored in the ``(n_e, t_e)`` frame, which on a
    boundary edge is the outward normal/tangent frame, so the constrained
    component is a plain subset of unknowns.  Nonzero ``data`` (one value per
    constrained unknown, ordered as ``dofmap.constrained``) is lifted to the
    right-hand side.
    """
    d = system.dofmap
    if _kind(kind) != d.kind:
        raise ValueError(f"system was assembled for kind {d.kind}, not {kind}")
    full_matrix = system.full_matrix if system.full_matrix is not None else system.matrix
    full_rhs = system.full_rhs if system.full_rhs is not None else system.rhs
    if full_matrix.shape[0] != d.n_total:
        raise ValueError("boundary conditions must be applied to an unconstrained system")
    values = np.zeros(len(d.constrained), dtype=complex) if data is None else np.asarray(data, dtype=complex)
    if values.shape != (len(d.constrained),):
        raise ValueError(f"expected {len(d.constrained)} boundary values, got {values.shape}")
    a_fc = full_matrix[d.free][:, d.constrained]
    matrix = full_matrix[d.free][:, d.free].tocsr()
    rhs = full_rhs[d.free] - a_fc @ values
    return LinearSystem(matrix, rhs, d, d.free, d.constrained, values, full_matrix, full_rhs)


def assemble(disc: Discretization, coeff: CoefficientField, source: SourceData) -> LinearSystem:
    """Assemble either problem with its essential boundary data applied."""
    if disc.mesh.n_cells == 0:
        raise ValueError("cannot assemble on an empty mesh")
    system = assemble_unconstrained(disc, coeff, source)
    data = essential_values(disc, coeff, source.kind, source.boundary)
    return apply_boundary_conditions(system, source.kind, data)


def _ensure_disc(mesh_or_disc, k: int) -> Discretization:
    if isinstance(mesh_or_disc, Discretization):
        if mesh_or_disc.k != k:
            raise ValueError(f"discretization has order {mesh_or_disc.k}, requested {k}")
        return mesh_or_disc
    return Discretization(mesh_or_disc, k)


def assemble_electric(mesh, coeff: CoefficientField, k: int, source: SourceData) -> LinearSystem:
    """System of the electric problem; ``mesh`` may also be a prebuilt :class:`Discretization`."""
    if source.kind != ELECTRIC:
        raise ValueError("source data is not for the electric problem")
    return assemble(_ensure_disc(mesh, k), coeff, source)


def assemble_magnetic(mesh, coeff: CoefficientField, k: int, source: SourceData) -> LinearSystem:
    """System of the magnetic problem; ``mesh`` may also be a prebuilt :class:`Discretization`."""
    if source.kind != MAGNETIC:
        raise ValueError("source data is not for the magnetic problem")
    return assemble(_ensure_disc(mesh, k), coeff, source)
