"""Exact solutions with closed-form derivatives and the source data they induce.

Every case lives on the unit square.  Material data is piecewise constant
over at most two regions (left and right of ``x = 1/2``), so a structured
mesh with an even number of subdivisions resolves the interface.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import ELECTRIC, MAGNETIC, CoefficientField, SourceData, _kind
from .mesh import Mesh

__all__ = [
    "CaseValidationError",
    "Medium",
    "ExactCase",
    "CASES",
    "get_case",
    "case_names",
    "derive_sources",
    "boundary_violation",
]

PI = np.pi


class CaseValidationError(ValueError):
    """An exact case violates a boundary condition its problem requires."""


@dataclass(frozen=True)
class Medium:
    eps: tuple = ((1.0, 0.0), (0.0, 1.0))
    mu: tuple = ((1.0, 0.0), (0.0, 1.0))
    sigma: float = 1.0
    eps_z: float | None = None
    mu_z: float | None = None

    def scalars(self) -> tuple[float, float]:
        ez = 0.5 * np.trace(self.eps) if self.eps_z is None else self.eps_z
        mz = 0.5 * np.trace(self.mu) if self.mu_z is None else self.mu_z
        return float(ez), float(mz)


def _one_region(pts):
    return np.zeros(len(pts), dtype=int)


def _split_at_half(pts):
    return (np.asarray(pts)[:, 0] > 0.5).astype(int)


@dataclass
class ExactCase:
    """A manufactured pair ``(u, p)`` with derivatives and material data.

    ``jac_u(pts)`` has shape (n, 2, 2) with entry ``[i, j] = d u_i / d x_j``.
    ``curl_u`` is the scalar ``d_x u_2 - d_y u_1`` and ``grad_curl_u`` its
    gradient.  ``region(pts)`` indexes ``media``.  ``degree`` is the polynomial
    degree of ``u`` for exactness cases and ``None`` otherwise.
    ``homogeneous`` states whether ``u`` satisfies the essential boundary
    condition of its problem exactly; ``smooth`` is false when ``u`` is only
    piecewise smooth, in which case convergence rates carry no threshold.
    """

    name: str
    kind: int
    u: Callable
    jac_u: Callable
    curl_u: Callable
    grad_curl_u: Callable
    p: Callable
    grad_p: Callable
    media: list = field(default_factory=lambda: [Medium()])
    region: Callable = _one_region
    omega: float = 1.0
    degree: int | None = None
    homogeneous: bool = True
    smooth: bool = True
    note: str = ""

    def material_at(self, pts):
        """Per-point ``(eps, mu, sigma, eps_z, mu_z)`` arrays."""
        idx = self.region(pts)
        eps = np.array([m.eps for m in self.media], dtype=float)[idx]
        mu = np.array([m.mu for m in self.media], dtype=float)[idx]
        sigma = np.array([m.sigma for m in self.media], dtype=float)[idx]
        ez, mz = np.array([m.scalars() for m in self.media]).T
        return eps, mu, sigma, ez[idx], mz[idx]

    def coefficients(self, mesh: Mesh, omega: float | None = None) -> CoefficientField:
        eps, mu, sigma, ez, mz = self.material_at(mesh.cell_centroids)
        return CoefficientField(eps, mu, sigma, self.omega if omega is None else omega, ez, mz)

    def curl_coefficient_at(self, pts):
        eps, mu, sigma, ez, mz = self.material_at(pts)
        if self.kind == ELECTRIC:
            return 1.0 / mz
        return 1.0 / (1j * self.omega * ez + sigma)

    def curl_curl(self, pts):
        """``curl(coef curl u)`` as a vector field, with the piecewise constant curl coefficient."""
        g = self.grad_curl_u(pts)
        coef = self.curl_coefficient_at(pts)
        return coef[:, None] * np.column_stack([g[:, 1], -g[:, 0]])

    def divergence(self, pts):
        """``div(kappa u)`` with ``kappa = eps`` or ``mu`` per the problem kind."""
        eps, mu, *_ = self.material_at(pts)
        kappa = eps if self.kind == ELECTRIC else mu
        return np.einsum("nij,nji->n", kappa, self.jac_u(pts))


def _u_field(f):
    def wrapped(pts):
        x, y = np.asarray(pts, dtype=float).T
        return f(x, y)
    return wrapped


def _vec(f):
    return _u_field(lambda x, y: np.column_stack(np.broadcast_arrays(*f(x, y))).astype(float))


def _jac(f):
    def wrapped(pts):
        x, y = np.asarray(pts, dtype=float).T
        rows = [np.broadcast_arrays(*row, x) for row in f(x, y)]
        return np.stack([np.stack(r[:2], axis=-1) for r in rows], axis=1)
    return wrapped


def _scalar(f):
    return _u_field(lambda x, y: np.broadcast_to(f(x, y), x.shape).astype(float))


_ZERO = _scalar(lambda x, y: 0.0 * x)
_ZERO_VEC = _vec(lambda x, y: (0.0 * x, 0.0 * x))
_ANISO = ((2.0, 0.5), (0.5, 1.0))


def _electric_poly_k1() -> ExactCase:
    return ExactCase(
        "electric_poly_k1", ELECTRIC,
        u=_vec(lambda x, y: (1 + 2 * x - y, 3 + x + 4 * y)),
        jac_u=_jac(lambda x, y: ((2.0, -1.0), (1.0, 4.0))),
        curl_u=_scalar(lambda x, y: 2.0 + 0 * x),
        grad_curl_u=_ZERO_VEC,
        p=_ZERO, grad_p=_ZERO_VEC,
        degree=1, homogeneous=False,
        note="linear field with nonzero tangential boundary data",
    )


def _electric_poly_k2() -> ExactCase:
    return ExactCase(
        "electric_poly_k2", ELECTRIC,
        u=_vec(lambda x, y: (x * x - x * y + y, 2 * x * y + y * y - x)),
        jac_u=_jac(lambda x, y: ((2 * x - y, 1 - x), (2 * y - 1, 2 * x + 2 * y))),
        curl_u=_scalar(lambda x, y: x + 2 * y - 2),
        grad_curl_u=_vec(lambda x, y: (1.0 + 0 * x, 2.0 + 0 * x)),
        p=_ZERO, grad_p=_ZERO_VEC,
        media=[Medium(eps=_ANISO, mu_z=1.0)],
        degree=2, homogeneous=False,
        note="quadratic field, anisotropic permittivity, nonzero tangential boundary data",
    )


def _magnetic_poly_k1() -> ExactCase:
    return ExactCase(
        "magnetic_poly_k1", MAGNETIC,
        u=_vec(lambda x, y: (2 * x + y, x - 2 * y)),
        jac_u=_jac(lambda x, y: ((2.0, 1.0), (1.0, -2.0))),
        curl_u=_ZERO, grad_curl_u=_ZERO_VEC,
        p=_ZERO, grad_p=_ZERO_VEC,
        degree=1, homogeneous=False,
        note="curl-free and divergence-free linear field with nonzero normal boundary data",
    )


def _magnetic_poly_k2() -> ExactCase:
    return ExactCase(
        "magnetic_poly_k2", MAGNETIC,
        u=_vec(lambda x, y: (3 * x * x - 3 * y * y + 2 * x + y, -6 * x * y + x - 2 * y)),
        jac_u=_jac(lambda x, y: ((6 * x + 2, 1 - 6 * y), (1 - 6 * y, -6 * x - 2))),
        curl_u=_ZERO, grad_curl_u=_ZERO_VEC,
        p=_scalar(lambda x, y: x + y - 1),
        grad_p=_vec(lambda x, y: (1.0 + 0 * x, 1.0 + 0 * x)),
        media=[Medium(mu=((2.0, 0.0), (0.0, 2.0)))],
        degree=2, homogeneous=False,
        note="harmonic quadratic field with nonzero normal boundary data and linear multiplier",
    )


def _electric_trig() -> ExactCase:
    s, c, ex = np.sin, np.cos, np.exp
    return ExactCase(
        "electric_trig", ELECTRIC,
        u=_vec(lambda x, y: (ex(x) * s(PI * y), ex(y) * s(PI * x))),
        jac_u=_jac(lambda x, y: ((ex(x) * s(PI * y), PI * ex(x) * c(PI * y)),
                                 (PI * ex(y) * c(PI * x), ex(y) * s(PI * x)))),
        curl_u=_scalar(lambda x, y: PI * ex(y) * c(PI * x) - PI * ex(x) * c(PI * y)),
        grad_curl_u=_vec(lambda x, y: (-PI**2 * ex(y) * s(PI * x) - PI * ex(x) * c(PI * y),
                                       PI * ex(y) * c(PI * x) + PI**2 * ex(x) * s(PI * y))),
        p=_scalar(lambda x, y: s(PI * x) * s(PI * y)),
        grad_p=_vec(lambda x, y: (PI * c(PI * x) * s(PI * y), PI * s(PI * x) * c(PI * y))),
        media=[Medium(eps=_ANISO, mu_z=1.0)],
    )


def _magnetic_trig(m1: float = 1.0, m2: float = 2.0) -> ExactCase:
    s, c = np.sin, np.cos
    k = PI**2 * (1 / m1 + 1 / m2)
    return ExactCase(
        "magnetic_trig", MAGNETIC,
        u=_vec(lambda x, y: (PI * s(PI * x) * c(PI * y) / m1, -PI * c(PI * x) * s(PI * y) / m2)),
        jac_u=_jac(lambda x, y: ((PI**2 * c(PI * x) * c(PI * y) / m1, -PI**2 * s(PI * x) * s(PI * y) / m1),
                                 (PI**2 * s(PI * x) * s(PI * y) / m2, -PI**2 * c(PI * x) * c(PI * y) / m2))),
        curl_u=_scalar(lambda x, y: k * s(PI * x) * s(PI * y)),
        grad_curl_u=_vec(lambda x, y: (k * PI * c(PI * x) * s(PI * y), k * PI * s(PI * x) * c(PI * y))),
        p=_scalar(lambda x, y: c(PI * x) * c(PI * y)),
        grad_p=_vec(lambda x, y: (-PI * s(PI * x) * c(PI * y), -PI * c(PI * x) * s(PI * y))),
        media=[Medium(mu=((m1, 0.0), (0.0, m2)))],
        note="mu u is the rotated gradient of sin(pi x) sin(pi y)",
    )


def _electric_hetero(contrast: float = 4.0) -> ExactCase:
    s, c = np.sin, np.cos

    def e_at(x):
        return np.where(x > 0.5, contrast, 1.0)

    def grad_curl(x, y):
        e = e_at(x)
        return (-PI**2 * s(PI * x) * s(PI * y) - 2 * PI**2 * c(PI * y) * c(2 * PI * x) / e,
                PI**2 * c(PI * x) * c(PI * y) + PI**2 * s(PI * y) * s(2 * PI * x) / e)

    return ExactCase(
        "electric_hetero", ELECTRIC,
        u=_vec(lambda x, y: (s(PI * y) * s(2 * PI * x) / e_at(x), s(PI * x) * s(PI * y))),
        jac_u=_jac(lambda x, y: ((2 * PI * s(PI * y) * c(2 * PI * x) / e_at(x), PI * c(PI * y) * s(2 * PI * x) / e_at(x)),
                                 (PI * c(PI * x) * s(PI * y), PI * s(PI * x) * c(PI * y)))),
        curl_u=_scalar(lambda x, y: PI * c(PI * x) * s(PI * y) - PI * c(PI * y) * s(2 * PI * x) / e_at(x)),
        grad_curl_u=_vec(grad_curl),
        p=_scalar(lambda x, y: s(PI * x) * s(PI * y)),
        grad_p=_vec(lambda x, y: (PI * c(PI * x) * s(PI * y), PI * s(PI * x) * c(PI * y))),
        media=[Medium(), Medium(eps=((contrast, 0.0), (0.0, contrast)))],
        region=_split_at_half,
        smooth=False,
        note=f"permittivity jumps by a factor {contrast:g} across x = 1/2; only piecewise smooth",
    )


CASES: dict[str, Callable[[], ExactCase]] = {
    "electric_poly_k1": _electric_poly_k1,
    "electric_poly_k2": _electric_poly_k2,
    "magnetic_poly_k1": _magnetic_poly_k1,
    "magnetic_poly_k2": _magnetic_poly_k2,
    "electric_trig": _electric_trig,
    "magnetic_trig": _magnetic_trig,
    "electric_hetero": _electric_hetero,
}


def case_names() -> list[str]:
    return list(CASES)


def get_case(name: str) -> ExactCase:
    try:
        return CASES[name]()
    except KeyError:
        raise KeyError(f"unknown case {name!r}; available: {', '.join(CASES)}") from None


def _boundary_samples(n: int):
    """``n`` points spread over the four sides of the unit square with outward normals."""
    per_side = max(1, n // 4)
    s = (np.arange(per_side) + 0.5) / per_side
    zero, one = np.zeros_like(s), np.ones_like(s)
    pts = np.vstack([np.column_stack([s, zero]), np.column_stack([one, s]),
                     np.column_stack([s, one]), np.column_stack([zero, s])])
    normals = np.repeat([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], per_side, axis=0)
    return pts, normals


def boundary_violation(case: ExactCase, n: int = 200) -> dict[str, float]:
    """Largest boundary-condition violations at ``n`` boundary sample points.

    Electric cases report ``u x n`` and ``p``; magnetic cases report
    ``mu u . n``, the natural condition ``coef curl u`` and the mean of ``p``.
    """
    pts, normals = _boundary_samples(n)
    u = case.u(pts)
    if case.kind == ELECTRIC:
        tangential = u[:, 0] * normals[:, 1] - u[:, 1] * normals[:, 0]
        return {"tangential": float(np.abs(tangential).max()), "multiplier": float(np.abs(case.p(pts)).max())}
    _, mu, *_ = case.material_at(pts)
    flux = np.einsum("nij,nj,ni->n", mu, u, normals)
    natural = np.abs(case.curl_coefficient_at(pts) * case.curl_u(pts)).max()
    # mean of p by a tensor Gauss rule on the unit square
    g, w = np.polynomial.legendre.leggauss(12)
    g, w = 0.5 * (g + 1), 0.5 * w
    xx, yy = np.meshgrid(g, g, indexing="ij")
    mean = float(np.outer(w, w).ravel() @ case.p(np.column_stack([xx.ravel(), yy.ravel()])))
    return {"normal": float(np.abs(flux).max()), "natural": float(natural), "mean": abs(mean)}


def derive_sources(case: ExactCase, tol: float = 1e-12) -> SourceData:
    """Source terms and essential data for which ``(u, p)`` solves the problem.

    Electric: ``j_e = (i/omega)[curl(mu_z^-1 curl u) + (i omega sigma - omega^2 eps) u + eps grad p]``
    and ``rho = div(eps u)``.  Magnetic:
    ``eta = curl((i omega eps_z + sigma)^-1 curl u) + i omega mu u + mu grad p``.

    Raises
    ------
    CaseValidationError
        For a magnetic case whose curl term does not vanish on the boundary;
        that condition is imposed naturally and cannot be lifted.
    """
    kind = _kind(case.kind)
    omega = case.omega
    if kind == MAGNETIC:
        natural = boundary_violation(case)["natural"]
        if natural > tol:
            raise CaseValidationError(
                f"case {case.name!r}: curl term is {natural:.3g} on the boundary, but the magnetic problem needs it to vanish")

    if kind == ELECTRIC:
        def volume(pts):
            eps, mu, sigma, *_ = case.material_at(pts)
            u = case.u(pts)
            lu = (case.curl_curl(pts) + (1j * omega * sigma)[:, None] * u
                  - omega**2 * np.einsum("nij,nj->ni", eps, u) + np.einsum("nij,nj->ni", eps, case.grad_p(pts)))
            return (1j / omega) * lu

        return SourceData(ELECTRIC, volume=volume, rho=case.divergence, boundary=case.u)

    def eta(pts):
        _, mu, *_ = case.material_at(pts)
        return (case.curl_curl(pts) + 1j * omega * np.einsum("nij,nj->ni", mu, case.u(pts))
                + np.einsum("nij,nj->ni", mu, case.grad_p(pts)))

    return SourceData(MAGNETIC, volume=eta, boundary=case.u)
