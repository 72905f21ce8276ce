"""Grid operators: exact pairing identities and truncation orders."""
import numpy as np
import pytest

from stfe.grid import Grid


def random_field(grid, rng):
    return rng.standard_normal(grid.n_cells)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(length=-1.0, n_cells=64)
    with pytest.raises(ValueError):
        Grid(length=1.0, n_cells=6)
    with pytest.raises(ValueError):
        Grid(length=1.0, n_cells=65)


def test_dx_times_n_is_length():
    for length, n in [(1.0, 64), (2.5, 96), (np.pi, 128)]:
        g = Grid(length, n)
        assert g.dx * n == pytest.approx(length, abs=np.finfo(float).eps * length)


def test_field_validation():
    g = Grid(1.0, 16)
    with pytest.raises(ValueError):
        g.field(np.zeros(8))
    with pytest.raises(ValueError):
        g.field(np.full(16, np.nan))
    u = g.field(np.ones(16))
    assert u.dtype == float


def test_derivative_of_constant_is_zero():
    g = Grid(2.0, 32)
    c = np.full(32, 3.7)
    for op in (g.d1_forward, g.d1_backward, g.d1_central, g.d2, g.d3, g.d4):
        assert np.all(op(c) == 0.0)


def test_d1_sine_mode_accuracy():
    # Oracle: analytic derivative of sin(2 pi x / L) sampled on the nodes.
    g = Grid(1.0, 64)
    f = np.sin(2 * np.pi * g.x)
    exact = 2 * np.pi * np.cos(2 * np.pi * g.x)
    for op in (g.d1_forward, g.d1_backward):
        err = np.max(np.abs(op(f) - exact))
        assert err < 2 * np.pi * 2 * np.pi * g.dx  # first order: O(dx)
    err_c = np.max(np.abs(g.d1_central(f) - exact))
    assert err_c < (2 * np.pi) ** 3 * g.dx**2  # central: O(dx^2)


def test_summation_by_parts_exact():
    rng = np.random.default_rng(42)
    g = Grid(1.5, 48)
    for _ in range(100):
        f = random_field(g, rng)
        h = random_field(g, rng)
        lhs = g.inner(g.d1_forward(f), h)
        rhs = -g.inner(f, g.d1_backward(h))
        scale = np.linalg.norm(f) * np.linalg.norm(h)
        assert abs(lhs - rhs) <= 1e-12 * scale


def test_central_derivative_integrates_to_zero():
    rng = np.random.default_rng(7)
    g = Grid(3.0, 64)
    for _ in range(20):
        f = random_field(g, rng)
        assert abs(g.integrate(g.d1_central(f))) <= 1e-12 * np.max(np.abs(f))


def test_d2_negative_semidefinite_d4_positive_semidefinite():
    rng = np.random.default_rng(3)
    g = Grid(1.0, 40)
    for _ in range(50):
        f = random_field(g, rng)
        assert g.inner(f, g.d2(f)) <= 1e-12
        assert g.inner(f, g.d4(f)) >= -1e-12


def test_d2_second_order_refinement():
    # Oracle: analytic second derivative of cos(2 pi x / L); the max-error
    # ratio between N and 2N must sit near 4 (second order).
    L = 1.0

    def max_err(n):
        g = Grid(L, n)
        f = np.cos(2 * np.pi * g.x / L)
        exact = -((2 * np.pi / L) ** 2) * f
        return np.max(np.abs(g.d2(f) - exact))

    ratio = max_err(64) / max_err(128)
    assert 3.6 <= ratio <= 4.4


def test_d3_d4_on_sine_mode():
    g = Grid(2.0, 256)
    w = 2 * np.pi / g.length
    f = np.sin(w * g.x)
    exact3 = -(w**3) * np.cos(w * g.x)
    exact4 = w**4 * np.sin(w * g.x)
    assert np.max(np.abs(g.d3(f) - exact3)) < w**5 * g.dx**2
    assert np.max(np.abs(g.d4(f) - exact4)) < 2 * w**6 * g.dx**2


def test_d4_refinement_second_order():
    L = 1.0

    def max_err(n):
        g = Grid(L, n)
        f = np.sin(2 * np.pi * g.x / L)
        exact = (2 * np.pi / L) ** 4 * f
        return np.max(np.abs(g.d4(f) - exact))

    ratio = max_err(64) / max_err(128)
    assert 3.6 <= ratio <= 4.4


def test_integrate_constant():
    g = Grid(2.5, 64)
    assert g.integrate(np.ones(64)) == pytest.approx(2.5, rel=1e-15)


def test_integrate_matches_brute_force_quadrature():
    # Oracle: 10^6-point rectangle rule for int_0^L sin^2(2 pi x / L).
    L = 1.7
    g = Grid(L, 64)
    f = np.sin(2 * np.pi * g.x / L) ** 2
    xs = np.linspace(0.0, L, 1_000_000, endpoint=False)
    brute = np.sum(np.sin(2 * np.pi * xs / L) ** 2) * (L / xs.size)
    assert g.integrate(f) == pytest.approx(brute, abs=1e-9)
