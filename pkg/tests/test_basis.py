from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import polygon_rule, reference_triangle_moment
from wgmaxwell.basis import (
    BasisConditioningError,
    CellBasis,
    EdgeBasis,
    _solve_gram,
    cell_quadrature,
    edge_quadrature,
    gradient_coefficients,
    poly_dim,
    project_cell,
    project_edge,
    project_edge_vector,
    triangle_quadrature,
)
from wgmaxwell.mesh import Mesh, build_structured_quadrilaterals, build_structured_triangulation

RIGHT = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
SQUARE = Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]])


def test_area_of_unit_right_triangle():
    assert cell_quadrature(RIGHT, 0, 0).integrate(np.ones(1)) == pytest.approx(0.5, rel=1e-14)


def test_moment_x2y_on_unit_right_triangle():
    q = cell_quadrature(RIGHT, 0, 3)
    x, y = q.points.T
    assert q.integrate(x**2 * y) == pytest.approx(1 / 60, rel=1e-13)


def test_moment_xy_on_unit_square():
    q = cell_quadrature(SQUARE, 0, 2)
    x, y = q.points.T
    assert q.integrate(x * y) == pytest.approx(0.25, rel=1e-13)


@pytest.mark.parametrize("degree", range(0, 11))
def test_triangle_rule_exact_for_all_monomials(degree):
    q = triangle_quadrature(np.array([[0, 0], [1, 0], [0, 1]]), degree)
    assert np.all(q.weights > 0)
    x, y = q.points.T
    for a in range(degree + 1):
        b = degree - a
        exact = float(reference_triangle_moment(a, b))
        assert q.integrate(x**a * y**b) == pytest.approx(exact, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 8), st.integers(0, 10_000))
def test_polygon_rule_exact_against_independent_rule(degree, seed):
    rng = np.random.default_rng(seed)
    m = build_structured_quadrilaterals(1)
    pts = m.vertices[m.cells[0]] + 0.15 * rng.uniform(-1, 1, (4, 2))
    try:
        cell = Mesh(pts, [[0, 1, 2, 3]], check_shape=False)
    except ValueError:
        return
    a = int(rng.integers(0, degree + 1))
    f = lambda p: p[:, 0] ** a * p[:, 1] ** (degree - a)  # noqa: E731
    q = cell_quadrature(cell, 0, degree)
    op, ow = polygon_rule(cell.vertices[cell.cells[0]], 10)
    assert q.integrate(f(q.points)) == pytest.approx(ow @ f(op), rel=1e-12, abs=1e-14)


def test_edge_rule_integrates_polynomials():
    m = build_structured_triangulation(1)
    e = int(np.flatnonzero((m.edge_vertices == [0, 3]).all(axis=1))[0])  # diagonal
    q = edge_quadrature(m, e, 5)
    # int over the diagonal of x^5 ds = sqrt(2)/6
    assert q.integrate(q.points[:, 0] ** 5) == pytest.approx(np.sqrt(2) / 6, rel=1e-13)


def test_negative_degree_rejected():
    with pytest.raises(ValueError):
        cell_quadrature(RIGHT, 0, -1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_basis_dimension_and_gram(k):
    b = CellBasis.on_cell(RIGHT, 0, k)
    assert b.dim == poly_dim(k) == (k + 1) * (k + 2) // 2
    g = b.gram(cell_quadrature(RIGHT, 0, 2 * k + 2))
    np.testing.assert_allclose(g, g.T, atol=1e-15)
    assert np.linalg.eigvalsh(g).min() > 0
    assert EdgeBasis(2.0, k).dim == k + 1
    assert np.all(np.diag(EdgeBasis(2.0, k).gram()) > 0)


def test_gram_conditioning_independent_of_scale():
    conds = []
    for n in (1, 4, 16):
        m = build_structured_triangulation(n)
        b = CellBasis.on_cell(m, 0, 3)
        conds.append(np.linalg.cond(b.gram(cell_quadrature(m, 0, 8))))
    assert max(conds) / min(conds) < 1 + 1e-8


def test_projection_reproduces_linear_field():
    c = project_cell(lambda p: p[:, 0] + 2 * p[:, 1], RIGHT, 0, 1)
    pts = np.random.default_rng(0).uniform(0, 0.5, (5, 2))
    np.testing.assert_allclose(CellBasis.on_cell(RIGHT, 0, 1).evaluate(c, pts), pts[:, 0] + 2 * pts[:, 1], atol=1e-13)


def test_projection_of_x_squared_matches_exact_normal_equations():
    # normal equations in the basis 1, x, y with exact rational moments
    mons = [(0, 0), (1, 0), (0, 1)]
    gram = [[reference_triangle_moment(a1 + a2, b1 + b2) for a2, b2 in mons] for a1, b1 in mons]
    rhs = [reference_triangle_moment(a + 2, b) for a, b in mons]
    n = 3
    aug = [row[:] + [r] for row, r in zip(gram, rhs)]
    for i in range(n):
        for j in range(i + 1, n):
            f = aug[j][i] / aug[i][i]
            aug[j] = [x - f * y for x, y in zip(aug[j], aug[i])]
    coef = [Fraction(0)] * n
    for i in reversed(range(n)):
        coef[i] = (aug[i][n] - sum(aug[i][j] * coef[j] for j in range(i + 1, n))) / aug[i][i]
    assert coef == [Fraction(-1, 10), Fraction(4, 5), Fraction(0)]
    c = project_cell(lambda p: p[:, 0] ** 2, RIGHT, 0, 1)
    pts = np.array([[0.1, 0.2], [0.7, 0.1], [0.3, 0.3]])
    expected = sum(float(ci) * pts[:, 0] ** a * pts[:, 1] ** b for ci, (a, b) in zip(coef, mons))
    np.testing.assert_allclose(CellBasis.on_cell(RIGHT, 0, 1).evaluate(c, pts), expected, rtol=1e-13)


def test_projection_of_zero():
    np.testing.assert_array_equal(project_cell(lambda p: np.zeros(len(p)), RIGHT, 0, 2), 0.0)


def test_vector_projection_shape_and_complex_values():
    c = project_cell(lambda p: np.column_stack([p[:, 0], 1j * p[:, 1]]), RIGHT, 0, 1)
    assert c.shape == (2, 3)
    assert np.iscomplexobj(c)


@pytest.mark.parametrize("k", [1, 2])
def test_projection_is_idempotent(k):
    m = build_structured_triangulation(2)
    basis = CellBasis.on_cell(m, 3, k)
    f = lambda p: np.sin(3 * p[:, 0]) * np.exp(p[:, 1])  # noqa: E731
    c1 = project_cell(f, m, 3, k)
    c2 = project_cell(lambda p: basis.evaluate(c1, p), m, 3, k)
    np.testing.assert_allclose(c2, c1, rtol=1e-13, atol=1e-13)


def test_edge_projection_of_polynomial_is_exact():
    m = build_structured_triangulation(1)
    for e in range(m.n_edges):
        c = project_edge(lambda p: p[:, 0] ** 2 - p[:, 1], m, e, 2)
        t = np.linspace(-1, 1, 7)
        pts = m.edge_points(e, t)
        np.testing.assert_allclose(EdgeBasis(m.edge_lengths[e], 2).eval(t) @ c, pts[:, 0] ** 2 - pts[:, 1], atol=1e-14)


def _edge_with_normal(m, normal):
    for e in range(m.n_edges):
        for s in m.edge_sides(e):
            if np.allclose(s.sign * m.edge_normals[e], normal):
                return e, s
    raise AssertionError


def test_edge_vector_identity_coefficient_reassembles_field():
    m = build_structured_triangulation(2)
    for e in (0, 5, 9):
        side = m.edge_sides(e)[0]
        c = project_edge_vector(lambda p: np.tile([1.0, 2.0], (len(p), 1)), m, e, side, np.eye(2), 1)
        np.testing.assert_allclose(c, [[1, 0], [2, 0]], atol=1e-14)


def test_edge_vector_doubles_normal_flux():
    m = build_structured_quadrilaterals(1)
    e, side = _edge_with_normal(m, [1.0, 0.0])
    c = project_edge_vector(lambda p: np.tile([1.0, 0.0], (len(p), 1)), m, e, side, 2 * np.eye(2), 1)
    np.testing.assert_allclose(c, [[2, 0], [0, 0]], atol=1e-14)


def test_edge_vector_tangential_field_is_unchanged_by_coefficient():
    m = build_structured_quadrilaterals(1)
    e, side = _edge_with_normal(m, [0.0, -1.0])
    u = lambda p: np.column_stack([p[:, 0], np.zeros(len(p))])  # noqa: E731
    kappa = np.array([[3.0, 0.0], [0.0, 5.0]])
    c = project_edge_vector(u, m, e, side, kappa, 1)
    np.testing.assert_allclose(c[1], 0.0, atol=1e-15)
    np.testing.assert_allclose(c, project_edge_vector(u, m, e, side, np.eye(2), 1), atol=1e-15)


def test_edge_vector_rejects_foreign_cell():
    m = build_structured_triangulation(2)
    with pytest.raises(ValueError):
        project_edge_vector(lambda p: p, m, 0, 7, np.eye(2), 1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_gradient_coefficients_are_exact(k):
    m = build_structured_triangulation(2)
    t = 5
    basis = CellBasis.on_cell(m, t, k)
    rng = np.random.default_rng(k)
    c = rng.standard_normal(poly_dim(k - 1))
    g = gradient_coefficients(c, basis)
    pts = m.cell_centroids[t] + 0.05 * rng.standard_normal((6, 2))
    expected = np.einsum("nia,i->na", basis.grad(pts)[:, : len(c)], c)
    np.testing.assert_allclose(basis.evaluate(g, pts), expected, atol=1e-12)


def test_singular_gram_raises_conditioning_error():
    with pytest.raises(BasisConditioningError):
        _solve_gram(np.zeros((3, 3)), np.ones(3))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_basis_is_orthonormal_on_obtuse_cell(k):
    m = Mesh([[0.55633116, 0.65165178], [0.55225397, 0.6561426], [0.5561566, 0.64778456]], [[0, 1, 2]],
             check_shape=False)
    b = CellBasis.on_cell(m, 0, k)
    g = b.gram(cell_quadrature(m, 0, 2 * k + 2)) / m.cell_areas[0]
    np.testing.assert_allclose(g, np.eye(b.dim), atol=1e-12)


@pytest.mark.parametrize("k", [2, 3])
def test_lower_degree_basis_is_leading_part(k):
    m = build_structured_quadrilaterals(2)
    pts = np.random.default_rng(k).uniform(0, 0.5, (7, 2))
    hi = CellBasis.on_cell(m, 0, k).eval(pts)
    lo = CellBasis.on_cell(m, 0, k - 1).eval(pts)
    np.testing.assert_allclose(hi[:, : lo.shape[1]], lo, atol=1e-12)
