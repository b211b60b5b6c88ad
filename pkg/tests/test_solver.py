import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from wgmaxwell.assembly import ELECTRIC, CoefficientField, Discretization, SourceData, assemble
from wgmaxwell.manufactured import derive_sources, get_case
from wgmaxwell.mesh import build_structured_triangulation
from wgmaxwell.solver import AccuracyWarning, SingularSystemError, dump_system, solve


def test_identity_returns_right_hand_side():
    b = np.array([1.0, -2j, 3 + 1j])
    report = solve(sp.identity(3, format="csr"), b)
    np.testing.assert_array_equal(report.solution, b)
    assert report.residual == 0.0
    assert report.pivot_health == 1.0 and report.accurate


def test_two_by_two_complex_system():
    a = sp.csr_matrix(np.array([[1, 1j], [-1j, 2]]))
    report = solve(a, np.array([1.0, 0.0]))
    np.testing.assert_allclose(report.solution, [2, 1j], atol=1e-15)


def test_zero_matrix_is_singular():
    with pytest.raises(SingularSystemError) as info:
        solve(sp.csr_matrix((3, 3)), np.ones(3))
    assert info.value.pivot_index == 0


def test_numerically_singular_matrix_reports_pivot():
    a = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularSystemError):
        solve(a, np.ones(2))


def test_shape_and_finiteness_checks():
    with pytest.raises(ValueError):
        solve(sp.identity(3), np.ones(2))
    with pytest.raises(ValueError):
        solve(sp.identity(2), np.array([1.0, np.nan]))


def test_residual_above_tolerance_is_warned(monkeypatch):
    import wgmaxwell.solver as solver

    monkeypatch.setattr(solver, "RESIDUAL_TOL", -1.0)
    with pytest.warns(AccuracyWarning):
        report = solve(sp.identity(2, format="csr"), np.ones(2))
    assert not report.accurate


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_random_well_conditioned_systems(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) + 4 * n * np.eye(n)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    report = solve(sp.csr_matrix(a), a @ x)
    np.testing.assert_allclose(report.solution, x, rtol=1e-10, atol=1e-12)
    assert report.residual <= 1e-12


def _small_system():
    case = get_case("electric_trig")
    m = build_structured_triangulation(3)
    return assemble(Discretization(m, 1), case.coefficients(m), derive_sources(case))


def test_solve_is_deterministic():
    system = _small_system()
    a, b = solve(system), solve(system)
    assert np.array_equal(a.solution, b.solution)
    assert a.residual <= 1e-10


def test_dump_round_trip(tmp_path):
    system = _small_system()
    path = tmp_path / "system.mtx"
    dump_system(system, path)
    assert path.read_text().startswith("%%MatrixMarket matrix coordinate complex")
    matrix = scipy.io.mmread(str(path))
    rhs = scipy.io.mmread(str(tmp_path / "system_rhs.mtx")).ravel()
    assert abs(sp.csr_matrix(matrix) - system.matrix).max() == 0
    np.testing.assert_array_equal(rhs, system.rhs)


def test_homogeneous_system_has_zero_solution():
    m = build_structured_triangulation(2)
    system = assemble(Discretization(m, 1), CoefficientField.uniform(m.n_cells), SourceData(ELECTRIC))
    report = solve(system)
    assert np.all(report.solution == 0)
