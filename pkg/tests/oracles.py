"""Independent reference computations used by the tests.

Nothing here calls the package's quadrature, bases or weak operators; the
integrals use a collapsed Gauss-Legendre rule in both directions and plain
(unscaled) monomials, so agreement with the package is a genuine cross-check.
"""
from __future__ import annotations

from fractions import Fraction
from math import factorial

import numpy as np


def triangle_rule(vertices, n: int = 12):
    """Collapsed Gauss-Legendre x Gauss-Legendre rule on a triangle (degree 2n-2)."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    u, v = np.meshgrid(s, s, indexing="ij")
    wu, wv = np.meshgrid(ws, ws, indexing="ij")
    ref = np.column_stack([u.ravel(), ((1 - u) * v).ravel()])
    weights = (wu * wv * (1 - u)).ravel()
    p = np.asarray(vertices, dtype=float)
    jac = np.column_stack([p[1] - p[0], p[2] - p[0]])
    return p[0] + ref @ jac.T, weights * abs(np.linalg.det(jac))


def polygon_rule(vertices, n: int = 12):
    p = np.asarray(vertices, dtype=float)
    if len(p) == 3:
        return triangle_rule(p, n)
    pts, wts = [], []
    for i in range(1, len(p) - 1):  # fan from the first vertex, unlike the package
        a, b = triangle_rule([p[0], p[i], p[i + 1]], n)
        pts.append(a)
        wts.append(b)
    return np.vstack(pts), np.concatenate(wts)


def segment_rule(a, b, n: int = 12):
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = np.asarray(a, float), np.asarray(b, float)
    s = 0.5 * (x + 1)
    return a + s[:, None] * (b - a), 0.5 * w * np.linalg.norm(b - a)


def monomials(r: int):
    return [(d - j, j) for d in range(r + 1) for j in range(d + 1)]


def eval_monomials(pts, r: int):
    pts = np.atleast_2d(pts)
    return np.column_stack([pts[:, 0] ** a * pts[:, 1] ** b for a, b in monomials(r)])


def grad_monomials(pts, r: int):
    x, y = np.atleast_2d(pts).T
    gx = [a * x ** max(a - 1, 0) * y**b for a, b in monomials(r)]
    gy = [b * x**a * y ** max(b - 1, 0) for a, b in monomials(r)]
    return np.stack([np.column_stack(gx), np.column_stack(gy)], axis=-1)


def reference_triangle_moment(a: int, b: int) -> Fraction:
    """Exact ``int x^a y^b`` over the unit right triangle: ``a! b! / (a+b+2)!``."""
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


def polygon_edges(vertices):
    p = np.asarray(vertices, dtype=float)
    for i in range(len(p)):
        a, b = p[i], p[(i + 1) % len(p)]
        t = (b - a) / np.linalg.norm(b - a)
        yield a, b, np.array([t[1], -t[0]])  # outward for a counterclockwise loop


def weak_operator(vertices, v0, vb, r: int, kind: str, kappa=None, n: int = 12):
    """Evaluate a weak divergence or curl directly from its defining identity.

    ``v0(pts)`` returns (npts, 2); ``vb(i, pts)`` the boundary field on the
    i-th edge of the counterclockwise loop.  Returns a function evaluating
    the resulting ``P_r`` polynomial.
    """
    kappa = np.eye(2) if kappa is None else np.asarray(kappa)
    pts, w = polygon_rule(vertices, n)
    phi = eval_monomials(pts, r)
    gram = (phi * w[:, None]).T @ phi
    g = grad_monomials(pts, r)
    vals = v0(pts)
    if kind == "div":
        rhs = -np.einsum("q,qa,qia->i", w, vals @ kappa.T, g)
    else:
        rhs = np.einsum("q,q,qi->i", w, vals[:, 0], g[:, :, 1]) - np.einsum("q,q,qi->i", w, vals[:, 1], g[:, :, 0])
    for i, (a, b, nrm) in enumerate(polygon_edges(vertices)):
        ep, ew = segment_rule(a, b, n)
        vbv = vb(i, ep)
        if kind == "div":
            trace = vbv @ nrm
        else:
            trace = vbv[:, 0] * nrm[1] - vbv[:, 1] * nrm[0]
            trace = -trace
        rhs = rhs + (eval_monomials(ep, r) * ew[:, None]).T @ trace
    coef = np.linalg.solve(gram, rhs)
    return lambda x: eval_monomials(x, r) @ coef


def stabilizer_value(vertices, h_t, v0, vb, w0, wb, kappa, n: int = 12):
    """``h_T^-1 <(k v0 - vb).n, (k w0 - wb).n> + h_T^-1 <(v0 - vb) x n, (w0 - wb) x n>`` on one cell."""
    total = 0.0
    for i, (a, b, nrm) in enumerate(polygon_edges(vertices)):
        ep, ew = segment_rule(a, b, n)
        dv = v0(ep) @ np.asarray(kappa).T - vb(i, ep)
        dw = w0(ep) @ np.asarray(kappa).T - wb(i, ep)
        tv = v0(ep) - vb(i, ep)
        tw = w0(ep) - wb(i, ep)
        total += ew @ ((dv @ nrm) * (dw @ nrm))
        total += ew @ ((tv[:, 0] * nrm[1] - tv[:, 1] * nrm[0]) * (tw[:, 0] * nrm[1] - tw[:, 1] * nrm[0]))
    return total / h_t


def central_difference(f, pts, step):
    """Jacobian ``d f_i / d x_j`` of a vector field by central differences, (n, 2, 2)."""
    cols = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = step
        cols.append((f(pts + e) - f(pts - e)) / (2 * step))
    return np.stack(cols, axis=-1)


def central_gradient(f, pts, step):
    cols = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = step
        cols.append((f(pts + e) - f(pts - e)) / (2 * step))
    return np.stack(cols, axis=-1)
