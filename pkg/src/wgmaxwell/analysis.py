"""Discrete norms, error measures and numerical probes of the stability estimates.

Complex vectors are measured by adding the quadratic forms of their real and
imaginary parts, which for the real symmetric matrices used here equals
``Re(x^H M x)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import linalg

from .assembly import (
    ELECTRIC,
    MAGNETIC,
    CoefficientField,
    Discretization,
    WeakVector,
    _kind,
    field_form_matrix,
    interpolate,
)
from .basis import CellBasis, cell_quadrature, edge_quadrature, gradient_coefficients, project_cell
from .mesh import Mesh

__all__ = [
    "NormBundle",
    "NormOperators",
    "triple_bar_norm",
    "multiplier_matrix",
    "multiplier_norm",
    "WitnessResult",
    "infsup_witness",
    "DivergenceResidual",
    "divergence_residual",
    "ErrorReport",
    "error_report",
    "CoercivityProbe",
    "coercivity_probe",
    "random_field_vector",
    "random_multiplier",
    "InequalityProbe",
    "trace_inverse_probe",
    "projection_errors",
    "observed_rates",
]


def _qform(m, x) -> float:
    return float(np.real(np.conj(x) @ (m @ x)))


@dataclass
class NormBundle:
    """The triple-bar norm with its four squared summands and related quantities."""

    total: float
    curl: float
    l2: float
    normal: float
    tangential: float
    seminorm: float
    edge: float
    multiplier: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


class NormOperators:
    """Global real symmetric matrices of the norm summands for one problem kind."""

    def __init__(self, disc: Discretization, coeff: CoefficientField, kind):
        self.disc = disc
        self.kind = _kind(kind)
        kappa = coeff.kappa(self.kind)
        self.curl = disc.field_matrix(lambda t, s: disc.curl_curl(t), self.kind)
        self.mass = disc.field_matrix(lambda t, s: s.mass_matrix(), self.kind)
        stab = [s.stabilizer_matrices(kappa[t]) for t, s in enumerate(disc.spaces)]
        self.normal = disc.field_matrix(lambda t, s: stab[t][0], self.kind)
        self.tangential = disc.field_matrix(lambda t, s: stab[t][1], self.kind)
        self.edge = disc.field_matrix(lambda t, s: s.edge_mass_matrix(), self.kind)
        self.multiplier = multiplier_matrix(disc, coeff, self.kind)

    def bundle(self, field: np.ndarray, multiplier: np.ndarray | None = None) -> NormBundle:
        parts = [_qform(m, field) for m in (self.curl, self.mass, self.normal, self.tangential)]
        total = np.sqrt(max(sum(parts), 0.0))
        mult = None if multiplier is None else float(np.sqrt(max(_qform(self.multiplier, multiplier), 0.0)))
        return NormBundle(float(total), *parts, seminorm=float(np.sqrt(max(parts[2] + parts[3], 0.0))),
                          edge=float(np.sqrt(max(_qform(self.edge, field), 0.0))), multiplier=mult)


def triple_bar_norm(v: WeakVector, kind, coeff: CoefficientField, disc: Discretization,
                    ops: NormOperators | None = None) -> NormBundle:
    """Energy norm of the field part of ``v`` and its summands.

    ``total**2 == curl + l2 + normal + tangential`` where the summands are the
    squared weak-curl, cell L2 and the two ``1/h_T``-weighted stabilizer terms
    with ``eps`` (kind 1) or ``mu`` (kind 2).
    """
    ops = NormOperators(disc, coeff, kind) if ops is None else ops
    return ops.bundle(v.field, v.multiplier)


def _jump_operator(disc: Discretization, e: int, quad) -> list[tuple[int, np.ndarray]]:
    """Per adjacent cell: values of its multiplier basis on ``e``, signed for ``[q]``."""
    mesh = disc.mesh
    nr = disc.dofmap(ELECTRIC).nr
    out = []
    for side in mesh.edge_sides(e):
        basis = CellBasis.on_cell(mesh, side.cell, disc.k)
        out.append((side.cell, side.sign * basis.eval(quad.points)[:, :nr]))
    return out


def multiplier_matrix(disc: Discretization, coeff: CoefficientField, kind) -> sp.csr_matrix:
    """Matrix of ``h^2 sum_T (kappa grad q, grad q)_T + h sum_e ||[q]||_e^2``.

    Jumps are taken over all edges for kind 1 and over interior edges for
    kind 2; ``h`` is the global mesh size.
    """
    kind = _kind(kind)
    mesh = disc.mesh
    kappa = coeff.kappa(kind)
    nr = disc.dofmap(kind).nr
    h = mesh.h
    rows, cols, vals = [], [], []

    def add(ids_r, ids_c, m):
        rows.append(np.repeat(ids_r, len(ids_c)))
        cols.append(np.tile(ids_c, len(ids_r)))
        vals.append(np.ravel(m))

    for t, s in enumerate(disc.spaces):
        g = s.dphi[:, :nr, :]
        flux = np.einsum("qia,ab->qib", g, kappa[t])
        m = np.einsum("q,qia,qja->ij", s.quad.weights, flux, g)
        ids = np.arange(t * nr, (t + 1) * nr)
        add(ids, ids, h**2 * m)
    edges = range(mesh.n_edges) if kind == ELECTRIC else mesh.interior_edges
    for e in edges:
        quad = edge_quadrature(mesh, e, disc.spaces[0].degree)
        parts = _jump_operator(disc, e, quad)
        for ti, phi_i in parts:
            for tj, phi_j in parts:
                m = (phi_i * quad.weights[:, None]).T @ phi_j
                add(np.arange(ti * nr, (ti + 1) * nr), np.arange(tj * nr, (tj + 1) * nr), h * m)
    n = nr * mesh.n_cells
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


def multiplier_norm(q: np.ndarray, kind, coeff: CoefficientField, disc: Discretization) -> float:
    """Mesh-dependent norm of piecewise ``P_{k-1}`` multiplier coefficients ``q`` (cell-major)."""
    if isinstance(q, WeakVector):
        q = q.multiplier
    return float(np.sqrt(max(_qform(multiplier_matrix(disc, coeff, kind), np.asarray(q)), 0.0)))


@dataclass
class WitnessResult:
    v_q: WeakVector
    lhs: float
    rhs: float
    curl_edge_part: float  # largest weak curl of the edge-only part {0; h v_qb}

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return abs(self.lhs - self.rhs) / scale if scale > 0 else abs(self.lhs - self.rhs)


def _edge_legendre_of_jump(disc: Discretization, q: np.ndarray, e: int, nr: int) -> np.ndarray:
    # [q] is a polynomial of degree k-1 on e, so its P_k Legendre projection is exact
    quad = edge_quadrature(disc.mesh, e, disc.spaces[0].degree)
    vals = sum(phi @ q[t * nr:(t + 1) * nr] for t, phi in _jump_operator(disc, e, quad))
    leg = np.polynomial.legendre.legvander(quad.params, disc.k)
    norms = disc.mesh.edge_lengths[e] / (2 * np.arange(disc.k + 1) + 1.0)
    return (leg * quad.weights[:, None]).T @ vals / norms


def infsup_witness(q: np.ndarray, kind, disc: Discretization, coeff: CoefficientField) -> WitnessResult:
    """Build ``v_q = {-h^2 grad q; h v_qb}`` and evaluate both sides of its identity.

    ``v_qb = [q] n_e`` on interior edges; on boundary edges it is ``q n`` for
    kind 1 and zero for kind 2.  The left side is the assembled ``b(v_q, q)``;
    the right side ``h^2 sum_T (kappa grad q, grad q)_T + h sum_e ||[q]||_e^2``
    is integrated independently by quadrature.
    """
    kind = _kind(kind)
    mesh = disc.mesh
    d = disc.dofmap(kind)
    nr, h = d.nr, mesh.h
    q = np.asarray(q, dtype=float)
    if q.shape != (d.n_multiplier,):
        raise ValueError(f"expected {d.n_multiplier} multiplier coefficients, got {q.shape}")
    kappa = coeff.kappa(kind)
    x = np.zeros(d.n_total)
    for t in range(mesh.n_cells):
        grad = gradient_coefficients(q[t * nr:(t + 1) * nr], disc.spaces[t].basis)
        x[d.v0_dofs(t)] = -h**2 * grad.ravel()
    edges = range(mesh.n_edges) if kind == ELECTRIC else mesh.interior_edges
    for e in edges:
        x[d.edge_dofs(e, "a")] = h * _edge_legendre_of_jump(disc, q, e, nr)
    x[d.multiplier_offset:d.multiplier_offset + d.n_multiplier] = q
    v_q = WeakVector(d, x)

    lhs = 0.0
    curl_edge = 0.0
    for t, s in enumerate(disc.spaces):
        local = v_q.local(t)
        lhs += q[t * nr:(t + 1) * nr] @ s.divergence_rhs(kappa[t]) @ local
        edge_only = local.copy()
        edge_only[: 2 * d.n0] = 0.0
        c = s.curl_matrix() @ edge_only
        curl_edge = max(curl_edge, float(np.sqrt(abs(c @ s.gram_r @ c))))

    rhs = 0.0
    for t in range(mesh.n_cells):
        quad = cell_quadrature(mesh, t, 2 * disc.k + 2)
        basis = CellBasis.on_cell(mesh, t, disc.k - 1)
        g = np.einsum("qia,i->qa", basis.grad(quad.points), q[t * nr:(t + 1) * nr])
        rhs += h**2 * quad.weights @ np.einsum("qa,ab,qb->q", g, kappa[t], g)
    for e in edges:
        quad = edge_quadrature(mesh, e, 2 * disc.k + 2)
        jump = 0.0
        for side in mesh.edge_sides(e):
            basis = CellBasis.on_cell(mesh, side.cell, disc.k - 1)
            jump = jump + side.sign * (basis.eval(quad.points) @ q[side.cell * nr:(side.cell + 1) * nr])
        rhs += h * quad.weights @ (jump * jump)
    return WitnessResult(v_q, float(lhs), float(rhs), curl_edge)


@dataclass
class DivergenceResidual:
    absolute: float
    scale: float

    @property
    def relative(self) -> float:
        return self.absolute / self.scale if self.scale > 0 else self.absolute


def divergence_residual(solution: WeakVector, disc: Discretization, coeff: CoefficientField, kind,
                        rho: Callable | None = None) -> DivergenceResidual:
    """Largest cell norm of ``div_w(kappa u_h) - Q rho`` (``rho`` is zero for kind 2).

    The scale is the largest cell value of ``||div_w(kappa {u_0; 0})||`` plus
    the norms of the single-edge contributions ``div_w(kappa {0; u_b|e})``,
    the sizes of the parts that must balance.
    """
    kind = _kind(kind)
    kappa = coeff.kappa(kind)
    n0 = disc.dofmap(kind).n0
    worst = scale = 0.0

    def norm(space, c):
        return float(np.sqrt(abs(np.real(np.conj(c) @ space.gram_r @ c))))

    for t, s in enumerate(disc.spaces):
        x = solution.local(t)
        op = s.divergence_matrix(kappa[t])
        interior = op[:, : 2 * n0] @ x[: 2 * n0]
        edge_parts = [op[:, sl] @ x[sl] for sl in
                      (slice(s.edge_slice(j, "a").start, s.edge_slice(j, "b").stop) for j in range(len(s.edges)))]
        r = interior + sum(edge_parts)
        target = np.zeros_like(r)
        if rho is not None and kind == ELECTRIC:
            target = project_cell(rho, disc.mesh, t, disc.k - 1, s.degree)
            r = r - target
        worst = max(worst, norm(s, r))
        scale = max(scale, norm(s, interior) + sum(norm(s, c) for c in edge_parts), norm(s, target))
    return DivergenceResidual(worst, scale)


@dataclass
class ErrorReport:
    """Errors of the discrete solution against projections of the exact one."""

    energy: float
    multiplier: float
    l2: float
    edge: float

    def to_dict(self) -> dict:
        return asdict(self)


def error_report(solution: WeakVector, u: Callable, p: Callable, disc: Discretization,
                 coeff: CoefficientField, kind, ops: NormOperators | None = None) -> ErrorReport:
    """Triple-bar error of ``Q_h u - u_h``, ``W_h`` error of ``Q_h p - p_h``, cell L2
    error of ``Q_0 u - u_0`` and edge error of ``Q_b u - u_b``."""
    ops = NormOperators(disc, coeff, kind) if ops is None else ops
    exact = interpolate(disc, coeff, kind, u, p)
    e = exact.values - solution.values
    d = disc.dofmap(kind)
    field = e[: d.n_field]
    mult = e[d.multiplier_offset:d.multiplier_offset + d.n_multiplier]
    b = ops.bundle(field, mult)
    return ErrorReport(b.total, b.multiplier, float(np.sqrt(b.l2)), b.edge)


@dataclass
class CoercivityProbe:
    """Sampled lower bounds of the field forms on the constrained space.

    ``margin`` is the smallest ``Im a_1(v,v) - omega sigma_0 ||v_0||^2``
    (kind 1) or ``Re a_2(v,v)`` (kind 2).  ``ratio`` is the smallest
    ``|a(v,v)| / |||v|||^2``, reported as a measured constant.
    """

    kind: int
    samples: int
    margin: float
    ratio: float

    def passed(self, tol: float = 1e-10) -> bool:
        return self.margin >= -tol

    def to_dict(self) -> dict:
        return asdict(self)


def random_field_vector(disc: Discretization, kind, rng: np.random.Generator) -> np.ndarray:
    """Random real field coefficients with the essential boundary component zeroed."""
    d = disc.dofmap(kind)
    x = rng.standard_normal(d.n_field)
    x[d.constrained] = 0.0
    return x


def random_multiplier(disc: Discretization, kind, rng: np.random.Generator) -> np.ndarray:
    """Random multiplier coefficients; kind 2 samples are shifted to zero mean."""
    kind = _kind(kind)
    d = disc.dofmap(kind)
    q = rng.standard_normal(d.n_multiplier)
    if kind == MAGNETIC:
        c = np.concatenate([s.quad.weights @ s.phi[:, : d.nr] for s in disc.spaces])
        # subtract a multiple of the piecewise constant 1
        ones = np.zeros(d.n_multiplier)
        ones[:: d.nr] = 1.0
        q = q - (c @ q) / (c @ ones) * ones
    return q


def coercivity_probe(disc: Discretization, coeff: CoefficientField, kind, samples: int = 200,
                     seed: int = 0, ops: NormOperators | None = None) -> CoercivityProbe:
    kind = _kind(kind)
    rng = np.random.default_rng(seed)
    a = field_form_matrix(disc, coeff, kind)
    ops = NormOperators(disc, coeff, kind) if ops is None else ops
    margin = ratio = np.inf
    for _ in range(samples):
        v = random_field_vector(disc, kind, rng)
        val = complex(v @ (a @ v))
        if kind == ELECTRIC:
            m = val.imag - coeff.omega * coeff.sigma0 * _qform(ops.mass, v)
        else:
            m = val.real
        margin = min(margin, m)
        ratio = min(ratio, abs(val) / ops.bundle(v).total ** 2)
    return CoercivityProbe(kind, samples, float(margin), float(ratio))


@dataclass
class InequalityProbe:
    """Largest trace and inverse inequality ratios per refinement level."""

    h: list
    trace: list
    inverse: list

    def spread(self, values: list) -> float:
        return max(values) / min(values)

    def to_dict(self) -> dict:
        return asdict(self)


def trace_inverse_probe(meshes: list[Mesh], k: int) -> InequalityProbe:
    """Largest ``||phi||_e^2 / (h_T^-1 ||phi||_T^2)`` and ``h_T ||grad phi||_T / ||phi||_T``
    over all cells and all ``phi`` in ``P_k(T)``, for each mesh.

    Both maxima are generalized eigenvalue problems against the cell Gram
    matrix; bounded values across levels confirm the inequalities.
    """
    hs, traces, inverses = [], [], []
    for mesh in meshes:
        tr = inv = 0.0
        for t in range(mesh.n_cells):
            basis = CellBasis.on_cell(mesh, t, k)
            quad = cell_quadrature(mesh, t, 2 * k + 2)
            g = basis.gram(quad)
            dphi = basis.grad(quad.points)
            stiff = np.einsum("q,qia,qja->ij", quad.weights, dphi, dphi)
            ht = mesh.cell_diameters[t]
            inv = max(inv, float(np.sqrt(linalg.eigh(ht**2 * stiff, g, eigvals_only=True)[-1])))
            for e in mesh.cell_edges[t]:
                eq = edge_quadrature(mesh, e, 2 * k + 2)
                phi = basis.eval(eq.points)
                m = (phi * eq.weights[:, None]).T @ phi
                tr = max(tr, float(linalg.eigh(ht * m, g, eigvals_only=True)[-1]))
        hs.append(mesh.h)
        traces.append(tr)
        inverses.append(inv)
    return InequalityProbe(hs, traces, inverses)


def projection_errors(w: Callable, curl_w: Callable, mesh: Mesh, k: int, extra: int = 6) -> tuple[float, float]:
    """``||w - Q_0 w||`` onto ``[P_k]^2`` and ``||curl w - Q(curl w)||`` onto ``P_{k-1}``.

    The projections use the standard quadrature; the errors are integrated
    with ``extra`` additional degrees so they are not quadrature-limited.
    """
    e0 = e1 = 0.0
    for t in range(mesh.n_cells):
        c0 = project_cell(w, mesh, t, k)
        c1 = project_cell(curl_w, mesh, t, k - 1)
        quad = cell_quadrature(mesh, t, 2 * k + 2 + extra)
        phi = CellBasis.on_cell(mesh, t, k).eval(quad.points)
        r0 = np.asarray(w(quad.points)) - phi @ c0.T
        r1 = np.asarray(curl_w(quad.points)) - phi[:, : len(c1)] @ c1
        e0 += quad.weights @ np.sum(np.abs(r0) ** 2, axis=1)
        e1 += quad.weights @ np.abs(r1) ** 2
    return float(np.sqrt(e0)), float(np.sqrt(e1))


def observed_rates(h, errors) -> list[float]:
    """Rates ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` between consecutive levels."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    return [float(v) for v in r]
