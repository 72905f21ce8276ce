"""Cyclic pentadiagonal solver against dense reference solves."""
import numpy as np
import pytest

from stfe.linalg import cyclic_pentadiagonal_dense, solve_cyclic_pentadiagonal


def test_matches_dense_on_random_systems():
    rng = np.random.default_rng(100)
    for _ in range(100):
        n = int(rng.integers(8, 160))
        bands = [rng.standard_normal(n) for _ in range(5)]
        bands[2] += 8.0  # keep the systems comfortably nonsingular
        rhs = rng.standard_normal(n)
        x = solve_cyclic_pentadiagonal(*bands, rhs)
        dense = cyclic_pentadiagonal_dense(*bands)
        x_ref = np.linalg.solve(dense, rhs)
        assert np.max(np.abs(x - x_ref)) <= 1e-10 * (1 + np.max(np.abs(x_ref)))
        # true residual near machine precision after refinement
        assert np.max(np.abs(dense @ x - rhs)) <= 1e-12 * np.max(np.abs(rhs) + 1)


def test_stiff_system_small_residual():
    # Condition numbers like the implicit stepper's (dt/dx^4 scale).
    rng = np.random.default_rng(5)
    n = 128
    scale = 5e4
    m = rng.uniform(0.5, 1.5, n)
    mm = np.roll(m, 1)
    sub2 = scale * mm
    sub1 = -scale * (m + 3 * mm)
    sup1 = -scale * (3 * m + mm)
    sup2 = scale * m
    diag = 1.0 - (np.roll(sup1, 1) + np.roll(sup2, 2) + np.roll(sub1, -1) + np.roll(sub2, -2))
    rhs = rng.standard_normal(n)
    x = solve_cyclic_pentadiagonal(sub2, sub1, diag, sup1, sup2, rhs)
    dense = cyclic_pentadiagonal_dense(sub2, sub1, diag, sup1, sup2)
    assert np.max(np.abs(dense @ x - rhs)) <= 1e-10
    # column sums exactly one -> solution mass equals rhs mass to roundoff
    assert np.sum(x) == pytest.approx(np.sum(rhs), abs=1e-9)


def test_rejects_tiny_systems():
    with pytest.raises(ValueError):
        solve_cyclic_pentadiagonal(*(np.ones(4) for _ in range(5)), np.ones(4))


def test_dense_assembly_layout():
    n = 8
    bands = [np.full(n, v) for v in (1.0, 2.0, 5.0, 3.0, 4.0)]
    a = cyclic_pentadiagonal_dense(*bands)
    assert a[0, 0] == 5.0
    assert a[0, 1] == 3.0
    assert a[0, 2] == 4.0
    assert a[0, n - 1] == 2.0
    assert a[0, n - 2] == 1.0
    assert a[n - 1, 0] == 3.0
    assert a[n - 1, 1] == 4.0
