"""Sparse direct solves of the assembled complex systems."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = ["SingularSystemError", "AccuracyWarning", "SolveReport", "solve", "dump_system"]

RESIDUAL_TOL = 1e-10
PIVOT_RATIO_MIN = 1e-13


class SingularSystemError(np.linalg.LinAlgError):
    """The matrix is structurally or numerically singular.

    ``pivot_index`` is the column (in the original ordering) where the
    factorization broke down, or ``None`` when it cannot be identified.
    """

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class AccuracyWarning(UserWarning):
    pass


@dataclass
class SolveReport:
    solution: np.ndarray
    residual: float
    pivot_health: float
    wall_time: float
    accurate: bool

    def to_dict(self) -> dict:
        return {"residual": self.residual, "pivot_health": self.pivot_health,
                "wall_time": self.wall_time, "accurate": self.accurate}


def _as_matrix_rhs(system, rhs):
    if rhs is None:
        return system.matrix, system.rhs
    return system, rhs


def _structural_defect(a: sp.csc_matrix) -> int | None:
    empty_cols = np.flatnonzero(np.diff(a.indptr) == 0)
    if len(empty_cols):
        return int(empty_cols[0])
    empty_rows = np.flatnonzero(np.bincount(a.indices, minlength=a.shape[0]) == 0)
    if len(empty_rows):
        return int(empty_rows[0])
    return None


def solve(system, rhs=None) -> SolveReport:
    """Solve ``A x = b`` by sparse LU with partial pivoting.

    Parameters
    ----------
    system : LinearSystem or sparse matrix
        With a matrix, ``rhs`` must be given.

    Returns
    -------
    SolveReport
        The residual ``||A x - b|| / ||b||`` is recomputed from the original
        matrix.  Pivot health is the ratio of the smallest to the largest
        magnitude on the diagonal of ``U``.

    Raises
    ------
    SingularSystemError
        For an empty row or column, a failed factorization, or a pivot ratio
        below ``1e-13``.
    """
    a, b = _as_matrix_rhs(system, rhs)
    a = sp.csc_matrix(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"incompatible shapes: matrix {a.shape}, right-hand side {b.shape}")
    if not (np.all(np.isfinite(a.data)) and np.all(np.isfinite(b))):
        raise ValueError("system has non-finite entries")
    start = time.perf_counter()
    a.eliminate_zeros()
    defect = _structural_defect(a)
    if defect is not None:
        raise SingularSystemError(f"matrix is structurally singular at index {defect}", defect)
    try:
        lu = splu(a, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    health = float(diag.min() / diag.max()) if diag.max() > 0 else 0.0
    if health < PIVOT_RATIO_MIN:
        pivot = int(lu.perm_c[np.argmin(diag)]) if len(diag) else None
        raise SingularSystemError(f"matrix is numerically singular (pivot ratio {health:.2e})", pivot)
    x = lu.solve(b)
    elapsed = time.perf_counter() - start
    scale = np.linalg.norm(b)
    residual = float(np.linalg.norm(a @ x - b) / scale) if scale > 0 else float(np.linalg.norm(a @ x))
    accurate = residual <= RESIDUAL_TOL
    if not accurate:
        warnings.warn(f"relative residual {residual:.2e} exceeds {RESIDUAL_TOL:g}", AccuracyWarning, stacklevel=2)
    return SolveReport(x, residual, health, elapsed, accurate)


def dump_system(system, path, rhs_path=None) -> None:
    """Write the matrix in Matrix Market coordinate format and the right-hand side alongside."""
    path = Path(path)
    rhs_path = Path(rhs_path) if rhs_path is not None else path.with_name(path.stem + "_rhs.mtx")
    # file handles keep mmwrite from appending its own suffix
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, sp.coo_matrix(system.matrix), comment="weak Galerkin saddle-point system")
    with open(rhs_path, "wb") as fh:
        scipy.io.mmwrite(fh, np.asarray(system.rhs, dtype=complex)[:, None])
