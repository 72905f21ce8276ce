"""Cyclic pentadiagonal linear solves for the implicit part of the stepper.

The periodic wrap puts six entries in the matrix corners; these are handled
as a rank-4 Woodbury correction on top of a banded LU (LAPACK gbtrf/gbtrs).
One step of iterative refinement keeps the residual near machine precision,
which in particular keeps the discrete mass identity of the implicit operator
exact to roundoff rather than to roundoff times the condition number.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

__all__ = ["solve_cyclic_pentadiagonal", "cyclic_pentadiagonal_dense"]

_KL = 2
_KU = 2


def cyclic_pentadiagonal_dense(sub2, sub1, diag, sup1, sup2) -> np.ndarray:
    """Assemble the full matrix A[i, (i+o) mod n] = band_o[i] for o = -2..2."""
    n = diag.size
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, idx] = diag
    a[idx, (idx + 1) % n] = sup1
    a[idx, (idx + 2) % n] = sup2
    a[idx, (idx - 1) % n] = sub1
    a[idx, (idx - 2) % n] = sub2
    return a


def _matvec(sub2, sub1, diag, sup1, sup2, x) -> np.ndarray:
    return (
        sub2 * np.roll(x, 2)
        + sub1 * np.roll(x, 1)
        + diag * x
        + sup1 * np.roll(x, -1)
        + sup2 * np.roll(x, -2)
    )


def solve_cyclic_pentadiagonal(sub2, sub1, diag, sup1, sup2, rhs) -> np.ndarray:
    """Solve A x = rhs for the cyclic pentadiagonal A given by its five bands.

    Band arrays are indexed by row: A[i, (i+o) mod n] = band_o[i].  Requires
    n >= 8 so the corner entries do not overlap the interior bands.
    """
    n = diag.size
    if n < 8:
        raise ValueError(f"cyclic pentadiagonal solve needs n >= 8, got {n}")

    # LAPACK banded storage (with _KL extra fill rows) for the non-cyclic core.
    ab = np.zeros((2 * _KL + _KU + 1, n))
    row0 = _KL + _KU
    ab[row0, :] = diag
    ab[row0 - 1, 1:] = sup1[: n - 1]
    ab[row0 - 2, 2:] = sup2[: n - 2]
    ab[row0 + 1, : n - 1] = sub1[1:]
    ab[row0 + 2, : n - 2] = sub2[2:]

    # Corner entries as A = B + sum_r e_{i_r} vt_r over the four corner rows.
    corner_rows = (0, 1, n - 2, n - 1)
    vt = np.zeros((4, n))
    vt[0, n - 2] = sub2[0]
    vt[0, n - 1] = sub1[0]
    vt[1, n - 1] = sub2[1]
    vt[2, 0] = sup2[n - 2]
    vt[3, 0] = sup1[n - 1]
    vt[3, 1] = sup2[n - 1]

    def dense_fallback():
        dense = cyclic_pentadiagonal_dense(sub2, sub1, diag, sup1, sup2)
        return np.linalg.solve(dense, rhs)

    lu, ipiv, info = lapack.dgbtrf(ab, _KL, _KU)
    if info != 0:
        return dense_fallback()

    stacked = np.zeros((n, 5), order="F")
    stacked[:, 0] = rhs
    for col, row in enumerate(corner_rows, start=1):
        stacked[row, col] = 1.0
    sol, info = lapack.dgbtrs(lu, _KL, _KU, stacked, ipiv)
    if info != 0:
        return dense_fallback()
    z = sol[:, 1:]
    h = np.eye(4) + vt @ z

    def cyclic_solve(core_solution):
        try:
            w = np.linalg.solve(h, vt @ core_solution)
        except np.linalg.LinAlgError:
            return None
        return core_solution - z @ w

    x = cyclic_solve(sol[:, 0])
    if x is None or not np.all(np.isfinite(x)):
        return dense_fallback()

    # One iterative-refinement step on the full cyclic system.
    residual = rhs - _matvec(sub2, sub1, diag, sup1, sup2, x)
    core, info = lapack.dgbtrs(lu, _KL, _KU, residual, ipiv)
    if info == 0:
        dx = cyclic_solve(core)
        if dx is not None and np.all(np.isfinite(dx)):
            x = x + dx
    return x
