import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import weak_operator
from wgmaxwell.basis import CellBasis, project_cell, project_edge
from wgmaxwell.mesh import Mesh, build_structured_quadrilaterals, build_structured_triangulation
from wgmaxwell.weakops import (
    LocalSpace,
    WeakFunctionLocal,
    check_commutativity,
    weak_curl,
    weak_divergence,
)

RIGHT = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
QUAD = Mesh([[0, 0], [2, 0.2], [1.8, 1.5], [0.3, 1.1]], [[0, 1, 2, 3]])


def _trace_function(space, field):
    """Weak function with v0 = Q0 field and v_b = Q_b field (Cartesian)."""
    m, t, k = space.mesh, space.cell, space.k
    v0 = project_cell(field, m, t, k)
    vb = [project_edge(field, m, e, k).T for e in space.edges]
    return WeakFunctionLocal(t, v0, vb)


def _outward(space, j):
    return space.signs[j] * space.edge_normals[j]


def _value(space, coeffs, pts):
    return CellBasis.on_cell(space.mesh, space.cell, space.k).evaluate(coeffs, pts)


def test_divergence_of_identity_field_is_two():
    s = LocalSpace(RIGHT, 0, 1)
    v = _trace_function(s, lambda p: p)
    np.testing.assert_allclose(weak_divergence(v, s), [2.0], atol=1e-13)


def test_divergence_of_pure_normal_boundary_data():
    s = LocalSpace(RIGHT, 0, 1)
    v = WeakFunctionLocal.zero(s)
    v.vb = [np.outer(_outward(s, j), [1.0, 0.0]) for j in range(3)]
    np.testing.assert_allclose(weak_divergence(v, s, r=0), [4 + 2 * np.sqrt(2)], rtol=1e-14)


def test_divergence_of_constant_interior_without_boundary_part():
    s = LocalSpace(RIGHT, 0, 2)
    v = WeakFunctionLocal.zero(s)
    v.v0[:, 0] = [3.0, -1.0]
    np.testing.assert_allclose(weak_divergence(v, s, r=0), [0.0], atol=1e-14)


def test_curl_of_rotation_field_is_two():
    s = LocalSpace(QUAD, 0, 1)
    v = _trace_function(s, lambda p: np.column_stack([-p[:, 1], p[:, 0]]))
    np.testing.assert_allclose(weak_curl(v, s), [2.0], atol=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_curl_of_normal_boundary_data_vanishes(k):
    s = LocalSpace(QUAD, 0, k)
    rng = np.random.default_rng(k)
    v = WeakFunctionLocal.zero(s)
    v.vb = [np.outer(_outward(s, j), rng.standard_normal(k + 1)) for j in range(4)]
    np.testing.assert_allclose(weak_curl(v, s), 0.0, atol=1e-13)


@pytest.mark.parametrize("mesh", [RIGHT, QUAD])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_weak_operators_match_dense_quadrature_oracle(mesh, k):
    s = LocalSpace(mesh, 0, k)
    rng = np.random.default_rng(10 * k + mesh.n_vertices)
    v = WeakFunctionLocal(0, rng.standard_normal((2, s.n0)), [rng.standard_normal((2, k + 1)) for _ in s.edges])
    basis = CellBasis.on_cell(mesh, 0, k)
    kappa = np.array([[2.0, 0.3], [0.3, 1.5]])
    loop = mesh.vertices[mesh.cells[0]]
    loop_edges = []
    for i in range(len(loop)):
        a, b = mesh.cells[0][i], mesh.cells[0][(i + 1) % len(loop)]
        loop_edges.append(int(np.flatnonzero((mesh.edge_vertices == sorted([a, b])).all(axis=1))[0]))

    def vb(i, pts):
        j = list(s.edges).index(loop_edges[i])
        e = s.edges[j]
        p0 = mesh.vertices[mesh.edge_vertices[e, 0]]
        tpar = 2 * np.linalg.norm(pts - p0, axis=1) / mesh.edge_lengths[e] - 1
        return np.polynomial.legendre.legvander(tpar, k) @ v.vb[j].T

    v0 = lambda p: basis.evaluate(v.v0, p)  # noqa: E731
    pts = mesh.cell_centroids[0] + 0.1 * rng.standard_normal((5, 2))
    for r in (k - 1, k):
        div_oracle = weak_operator(loop, v0, vb, r, "div", kappa)
        curl_oracle = weak_operator(loop, v0, vb, r, "curl")
        rb = CellBasis.on_cell(mesh, 0, r)
        np.testing.assert_allclose(rb.evaluate(weak_divergence(v, s, kappa, r), pts), div_oracle(pts), rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(rb.evaluate(weak_curl(v, s, r), pts), curl_oracle(pts), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("k", [2, 3])
def test_curl_of_gradient_interior_matches_oracle(k):
    s = LocalSpace(RIGHT, 0, k)
    q = lambda p: np.column_stack([2 * p[:, 0] * p[:, 1], p[:, 0] ** 2 + 1])  # grad(x^2 y + y)  # noqa: E731
    v = WeakFunctionLocal(0, project_cell(q, RIGHT, 0, k), [np.zeros((2, k + 1))] * 3)
    oracle = weak_operator(RIGHT.vertices, q, lambda i, p: np.zeros((len(p), 2)), k - 1, "curl")
    pts = np.array([[0.2, 0.2], [0.5, 0.1]])
    rb = CellBasis.on_cell(RIGHT, 0, k - 1)
    np.testing.assert_allclose(rb.evaluate(weak_curl(v, s), pts), oracle(pts), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_weak_operators_are_linear(k, seed, alpha, beta):
    s = LocalSpace(QUAD, 0, k)
    rng = np.random.default_rng(seed)

    def rand():
        return WeakFunctionLocal(0, rng.standard_normal((2, s.n0)), [rng.standard_normal((2, k + 1)) for _ in s.edges])

    v, w = rand(), rand()
    comb = WeakFunctionLocal(0, alpha * v.v0 + beta * w.v0, [alpha * a + beta * b for a, b in zip(v.vb, w.vb)])
    kappa = np.array([[1.0, 0.2], [0.2, 3.0]])
    for op in (lambda x: weak_divergence(x, s, kappa), lambda x: weak_curl(x, s)):
        np.testing.assert_allclose(op(comb), alpha * op(v) + beta * op(w), atol=1e-12 * (1 + abs(alpha) + abs(beta)) * 10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_consistency_with_matching_boundary_data(k):
    s = LocalSpace(QUAD, 0, k)
    kappa = np.array([[2.0, 0.5], [0.5, 1.0]])
    u = lambda p: np.column_stack([p[:, 0] ** k + p[:, 1], p[:, 0] * p[:, 1] ** (k - 1)])  # noqa: E731
    v0 = project_cell(u, QUAD, 0, k)
    from wgmaxwell.basis import project_edge_vector

    vb = [project_edge_vector(u, QUAD, e, 0, kappa, k) for e in s.edges]
    v = WeakFunctionLocal(0, v0, vb)
    res = check_commutativity(u, QUAD, k, kappa)
    assert res.max_residual < 1e-7  # finite differences
    x = v.dofs(s)
    assert np.allclose(WeakFunctionLocal.from_dofs(s, x).dofs(s), x)


def test_commutativity_linear_field_k1():
    m = build_structured_triangulation(3)
    jac = lambda p: np.broadcast_to(np.eye(2), (len(p), 2, 2))  # noqa: E731
    res = check_commutativity(lambda p: p.copy(), m, 1, jac=jac)
    assert res.max_residual <= 1e-11


def test_commutativity_quadratic_field_k2():
    m = build_structured_quadrilaterals(3)
    w = lambda p: np.column_stack([p[:, 1] ** 2, -p[:, 0] ** 2])  # noqa: E731

    def jac(p):
        z = np.zeros(len(p))
        return np.stack([np.stack([z, 2 * p[:, 1]], -1), np.stack([-2 * p[:, 0], z], -1)], axis=1)

    res = check_commutativity(w, m, 2, jac=jac)
    assert res.max_residual <= 1e-11
    assert res.cells == m.n_cells


def test_commutativity_smooth_field_does_not_grow_under_refinement():
    w = lambda p: np.column_stack([np.sin(p[:, 1]), np.cos(p[:, 0])])  # noqa: E731
    res = [check_commutativity(w, build_structured_triangulation(n), 1).max_residual for n in (2, 4, 8)]
    assert res[2] <= res[0] * 1.01 + 1e-12


def test_commutativity_uses_per_cell_coefficients():
    m = build_structured_triangulation(2)
    kappa = np.array([np.eye(2) * (1 + t) for t in range(m.n_cells)])
    w = lambda p: np.column_stack([p[:, 0] * p[:, 1], p[:, 1]])  # noqa: E731

    def jac(p):
        z, o = np.zeros(len(p)), np.ones(len(p))
        return np.stack([np.stack([p[:, 1], p[:, 0]], -1), np.stack([z, o], -1)], axis=1)

    assert check_commutativity(w, m, 2, kappa, jac=jac).max_residual < 1e-11


def test_hundred_random_cells_are_fast():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    for _ in range(100):
        pts = rng.uniform(0, 1, (3, 2))
        if abs(np.linalg.det(np.column_stack([pts[1] - pts[0], pts[2] - pts[0]]))) < 0.05:
            continue
        m = Mesh(pts, [[0, 1, 2]], check_shape=False)
        check_commutativity(lambda p: p.copy(), m, 1, jac=lambda p: np.broadcast_to(np.eye(2), (len(p), 2, 2)))
    assert time.perf_counter() - start < 10
