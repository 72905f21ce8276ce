"""Constitutive functions: closed forms, finite-difference oracles, bounds."""
import math

import numpy as np
import pytest

from stfe.errors import NonpositiveFieldError
from stfe.grid import Grid
from stfe.model import (
    ModelParams,
    alpha_entropy,
    energy_value,
    functionals,
    interface_potential,
    interface_potential_d1,
    interface_potential_d2,
    min_bound_check,
    mobility,
    mobility_mean,
    regularized_potential,
    strat_potential,
    strat_potential_d1,
    strat_potential_d2,
)


def params(eps=1e-2, p=3.0, theta=0.2, alpha=-0.25, c_strat=0.5):
    return ModelParams(eps=eps, p=p, theta=theta, alpha=alpha, c_strat=c_strat)


def central_diff(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


# parameter admissibility ----------------------------------------------------

def test_params_validation_labels():
    with pytest.raises(ValueError, match=r"\(H4ε\)"):
        params(p=2.0)
    with pytest.raises(ValueError, match=r"\(H2ε\)"):
        params(theta=0.5, p=3.0)  # theta >= 1/p
    with pytest.raises(ValueError, match="alpha"):
        params(alpha=-0.5)
    with pytest.raises(ValueError, match="alpha"):
        params(alpha=0.0)
    with pytest.raises(ValueError):
        params(eps=1.5)
    # eps = 0 deterministic-limit mode is admitted
    params(eps=0.0)


def test_floor_value():
    pr = params(eps=1e-3, theta=0.2)
    assert pr.floor == pytest.approx(10 ** (-0.6), rel=1e-12)
    assert params(eps=0.0).floor == 0.0


# mobility --------------------------------------------------------------------

def test_mobility_square():
    assert mobility(3.0) == 9.0


def test_mobility_mean_consistency():
    assert mobility_mean(2.0, 2.0) == 4.0


def test_mobility_mean_harmonic_integral_oracle():
    # Oracle: M(a,b) = ((1/(b-a)) int_a^b s^-2 ds)^-1; for a=1, b=4 the
    # integral is 3/4, so M = 3 / (3/4) = 4.
    a, b = 1.0, 4.0
    integral = 1.0 / a - 1.0 / b  # int_a^b s^-2 ds
    oracle = (b - a) / integral
    assert mobility_mean(a, b) == pytest.approx(oracle, rel=1e-15)
    assert mobility_mean(1.0, 4.0) == 4.0


def test_mobility_mean_between_endpoint_squares():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = rng.uniform(0.05, 5.0, size=2)
        m = mobility_mean(a, b)
        assert min(a, b) ** 2 - 1e-14 <= m <= max(a, b) ** 2 + 1e-14


# interface potential ----------------------------------------------------------

def test_interface_potential_p3_values():
    assert interface_potential(1.0, 3.0) == 1.0
    assert interface_potential_d1(1.0, 3.0) == -3.0
    assert interface_potential_d2(1.0, 3.0) == 12.0


def test_interface_potential_p4_values():
    assert interface_potential(2.0, 4.0) == pytest.approx(1 / 16)
    assert interface_potential_d2(2.0, 4.0) == pytest.approx(20 * 2.0 ** (-6))
    assert interface_potential_d2(2.0, 4.0) == pytest.approx(0.3125)


def test_interface_potential_derivative_oracles():
    p = 3.5
    u = 0.7
    fd1 = central_diff(lambda s: interface_potential(s, p), u)
    fd2 = central_diff(lambda s: interface_potential_d1(s, p), u)
    assert interface_potential_d1(u, p) == pytest.approx(fd1, rel=1e-6)
    assert interface_potential_d2(u, p) == pytest.approx(fd2, rel=1e-6)


def test_interface_potential_rejects_nonpositive():
    with pytest.raises(NonpositiveFieldError):
        interface_potential(0.0, 3.0)
    with pytest.raises(NonpositiveFieldError):
        interface_potential(-1.0, 3.0)


# Stratonovich potential ---------------------------------------------------------

def test_strat_potential_minimum_at_one():
    cs = 0.5
    assert strat_potential_d1(1.0, cs) == 0.0
    assert strat_potential(1.0, cs) == cs


def test_strat_potential_value():
    val = strat_potential(2.0, 0.5)
    assert val == pytest.approx(0.5 * (2.0 - math.log(2.0)), rel=1e-12)
    assert val == pytest.approx(0.653426, abs=1e-6)


def test_strat_potential_derivative_oracles():
    cs = 0.8
    u = 0.6
    fd1 = central_diff(lambda s: strat_potential(s, cs), u)
    fd2 = central_diff(lambda s: strat_potential_d1(s, cs), u)
    assert strat_potential_d1(u, cs) == pytest.approx(fd1, rel=1e-6)
    assert strat_potential_d2(u, cs) == pytest.approx(fd2, rel=1e-6)


# regularized potential ----------------------------------------------------------

def test_regularized_potential_infinite_below_zero():
    pr = params(eps=0.01, c_strat=0.5)
    assert regularized_potential(0.0, pr) == math.inf
    assert regularized_potential(-1.0, pr) == math.inf


def test_regularized_potential_value():
    pr = params(eps=0.01, p=3.0, c_strat=0.5)
    assert regularized_potential(1.0, pr) == pytest.approx(0.51, rel=1e-14)


def test_regularized_potential_lower_bound():
    # Pi_eps(u) >= eps*u^-p pointwise because S(u) >= S(1) = c_strat >= 0.
    pr = params(eps=1e-2, p=3.0, c_strat=0.5)
    u = np.linspace(0.05, 6.0, 500)
    pi = regularized_potential(u, pr)
    assert np.all(strat_potential(u, pr.c_strat) >= pr.c_strat - 1e-13)
    assert np.all(pi >= pr.eps * u ** (-pr.p) - 1e-13)


def test_regularized_potential_deterministic_mode_off():
    pr = params(eps=0.0, c_strat=0.0)
    u = np.linspace(-1.0, 2.0, 7)
    assert np.all(regularized_potential(u, pr) == 0.0)


def test_regularized_potential_h4_curvature_bounds():
    # c1*u^(-p-2) - c2 <= Pi'' <= C1*(u^(-p-2) + 1) with eps-dependent
    # constants: Pi'' = eps*p*(p+1)*u^(-p-2) + c_strat/u^2.
    pr = params(eps=1e-2, p=3.0, c_strat=0.5)
    u = np.linspace(0.05, 10.0, 400)
    pi_dd = (
        pr.eps * interface_potential_d2(u, pr.p)
        + strat_potential_d2(u, pr.c_strat)
    )
    c1 = pr.eps * pr.p * (pr.p + 1.0)
    big_c1 = c1 + pr.c_strat * 25.0  # covers 1/u^2 <= 25 + u^(-p-2) on u > 0
    assert np.all(pi_dd >= c1 * u ** (-pr.p - 2.0) - 1e-12)
    assert np.all(pi_dd <= big_c1 * (u ** (-pr.p - 2.0) + 1.0) + 1e-12)


# alpha entropy -------------------------------------------------------------------

def test_alpha_entropy_zero_at_one():
    for alpha in (-0.05, -0.15, -0.25, -0.30):
        assert alpha_entropy(1.0, alpha) == pytest.approx(0.0, abs=1e-14)


def test_alpha_entropy_at_zero_by_continuity():
    assert alpha_entropy(0.0, -0.25) == pytest.approx(4.0 / 3.0, rel=1e-14)
    for alpha in (-0.05, -0.3):
        assert alpha_entropy(0.0, alpha) == pytest.approx(1 / (alpha + 1), rel=1e-13)


def test_alpha_entropy_nonnegative_vanishes_only_at_one():
    u = np.linspace(0.0, 5.0, 1001)
    for alpha in (-0.05, -0.15, -0.25, -0.30):
        vals = alpha_entropy(u, alpha)
        assert np.all(vals >= -1e-14)
        near_zero = u[np.abs(vals) < 1e-10]
        assert np.all(np.abs(near_zero - 1.0) < 1e-4)


def test_alpha_entropy_convexity_oracle():
    # G'' = u^(alpha-1) > 0, checked by finite differences at 20 points.
    alpha = -0.25
    for u in np.linspace(0.2, 4.0, 20):
        fd2 = (
            alpha_entropy(u + 1e-4, alpha)
            - 2 * alpha_entropy(u, alpha)
            + alpha_entropy(u - 1e-4, alpha)
        ) / 1e-8
        assert fd2 == pytest.approx(u ** (alpha - 1.0), rel=1e-5)
        assert fd2 > 0


def test_alpha_entropy_rejects_negative():
    with pytest.raises(NonpositiveFieldError):
        alpha_entropy(-0.1, -0.25)


# functionals ----------------------------------------------------------------------

def test_functionals_constant_state():
    g = Grid(1.0, 64)
    pr = params(eps=0.01, p=3.0, c_strat=0.5)
    rec = functionals(np.ones(64), pr, g)
    assert rec.mass == pytest.approx(1.0, rel=1e-14)
    assert rec.e1 == 0.0
    assert rec.e2 == pytest.approx(0.01, rel=1e-13)
    assert rec.g_alpha == pytest.approx(0.0, abs=1e-14)
    assert rec.energy == pytest.approx(0.51, rel=1e-13)
    assert rec.h_eps == rec.e1 + rec.e2
    assert rec.min_u == 1.0


def test_functionals_e1_vanishes_for_any_constant():
    g = Grid(2.0, 32)
    pr = params()
    for c in (0.3, 1.7, 5.0):
        assert functionals(np.full(32, c), pr, g).e1 == 0.0


def test_functionals_single_mode_gradient_energy():
    # u = 1 + 0.1 g_1 has e1 ~ (1/2)*0.01*(2 pi / L)^2 up to O(dx^2).
    L = 1.0
    g = Grid(L, 256)
    pr = params(eps=0.0, c_strat=0.0)
    gk = math.sqrt(2.0 / L) * np.sin(2 * np.pi * g.x / L)
    rec = functionals(1.0 + 0.1 * gk, pr, g)
    target = 0.5 * 0.01 * (2 * np.pi / L) ** 2
    assert rec.e1 == pytest.approx(target, rel=1e-3)


def test_functionals_infinite_on_touching_zero():
    g = Grid(1.0, 16)
    pr = params(eps=0.01)
    u = np.ones(16)
    u[3] = 0.0
    rec = functionals(u, pr, g)
    assert rec.e2 == math.inf
    assert rec.energy == math.inf
    assert rec.g_alpha < math.inf  # finite at zero by continuity


def test_energy_value_matches_functionals():
    g = Grid(1.0, 64)
    pr = params(eps=0.01, c_strat=0.3)
    rng = np.random.default_rng(8)
    u = 1.0 + 0.3 * rng.random(64)
    assert energy_value(u, pr, g) == pytest.approx(
        functionals(u, pr, g).energy, rel=1e-13
    )


# minimum bound -------------------------------------------------------------------

def _random_positive_trig_field(grid, rng, min_floor=None):
    u = np.zeros(grid.n_cells)
    for j in range(1, 6):
        amp = rng.uniform(-1.0, 1.0) / j
        phase = rng.uniform(0, 2 * np.pi)
        u += amp * np.sin(2 * np.pi * j * grid.x / grid.length + phase)
    u -= np.min(u)
    floor = min_floor if min_floor is not None else rng.uniform(0.01, 0.5)
    return u + floor


def test_min_bound_constant_state_has_slack():
    g = Grid(1.0, 64)
    pr = params(eps=1e-2, p=3.0)
    u = np.full(64, 2.0)
    chk = min_bound_check(u, pr, g)
    assert chk.satisfied
    # sup u^-1 equals (mean u)^-1 exactly; the rest of the bound is slack
    assert chk.lhs == pytest.approx(0.5, rel=1e-12)
    assert chk.rhs > chk.lhs


def test_min_bound_random_fields_all_p():
    # Property test of the derived constant chain over 200 random positive
    # trig-polynomial fields; a violation indicates a wrong constant.
    rng = np.random.default_rng(17)
    g = Grid(1.0, 64)
    count = 0
    for p in (2.5, 3.0, 4.0):
        pr = params(eps=1e-2, p=p, theta=0.15 if p > 3 else 0.2)
        for _ in range(67):
            u = _random_positive_trig_field(g, rng)
            chk = min_bound_check(u, pr, g)
            assert chk.satisfied, (p, chk)
            count += 1
    assert count >= 200


def test_min_bound_deep_dip():
    g = Grid(1.0, 128)
    pr = params(eps=1e-2, p=3.0)
    u = _random_positive_trig_field(g, np.random.default_rng(3), min_floor=1e-3)
    assert min_bound_check(u, pr, g).satisfied


def test_min_bound_rejects_nonpositive():
    g = Grid(1.0, 16)
    u = np.ones(16)
    u[0] = 0.0
    with pytest.raises(NonpositiveFieldError):
        min_bound_check(u, params(), g)
