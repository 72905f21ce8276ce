"""Time stepper: stationarity, dispersion, conservation, dissipation, stopping."""
import math

import numpy as np
import pytest

from stfe.errors import NonpositiveFieldError
from stfe.grid import Grid
from stfe.model import ModelParams, functionals
from stfe.noise import NoiseSpec, basis_eval, c_strat
from stfe.stepper import SimState, StepperConfig, check_stop, drift, run, step


def make_params(eps=0.0, c_strat_val=0.0, p=3.0, theta=0.2, alpha=-0.25):
    return ModelParams(eps=eps, p=p, theta=theta, alpha=alpha, c_strat=c_strat_val)


def cos_bump(grid, height=1.0, center=None, radius=None):
    center = grid.length / 2 if center is None else center
    radius = grid.length / 4 if radius is None else radius
    d = grid.x - center
    return np.where(
        np.abs(d) <= radius, height * np.cos(np.pi * d / (2 * radius)) ** 2, 0.0
    )


# drift ------------------------------------------------------------------------

def test_drift_zero_on_constants():
    g = Grid(1.0, 64)
    for params in (make_params(), make_params(eps=1e-2, c_strat_val=0.5)):
        d = drift(np.full(64, 1.7), params, g)
        assert np.all(d == 0.0)


def test_drift_conserves_mass():
    g = Grid(2.0, 128)
    rng = np.random.default_rng(0)
    params = make_params(eps=1e-2, c_strat_val=0.3)
    for _ in range(20):
        u = 1.0 + 0.5 * rng.random(128)
        d = drift(u, params, g)
        assert abs(g.integrate(d)) <= 1e-12 * np.max(np.abs(d)) * g.length


def test_drift_linearization_about_constant():
    # For u = ubar + delta*g_1 with eps = 0 the linearized decay is
    # -(ubar^2 k^4 + c_strat k^2) per unit amplitude, k = 2 pi / L.
    L = 1.0
    g = Grid(L, 128)
    cs = 0.37
    params = make_params(eps=0.0, c_strat_val=cs)
    delta = 1e-4
    g1 = basis_eval(1, g)
    u = 1.0 + delta * g1
    k = 2 * np.pi / L
    expected = -(k**4 + cs * k**2) * delta * g1
    d = drift(u, params, g)
    assert np.max(np.abs(d - expected)) <= 0.01 * np.max(np.abs(expected))


def test_drift_requires_positive_field_when_eps_positive():
    g = Grid(1.0, 16)
    u = np.ones(16)
    u[2] = -0.5
    with pytest.raises(NonpositiveFieldError):
        drift(u, make_params(eps=1e-2), g)
    # eps = 0 mode tolerates sign changes
    drift(u, make_params(eps=0.0), g)


# step/run basics -----------------------------------------------------------------

def test_zero_noise_constant_unchanged():
    g = Grid(1.0, 64)
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-5, dt_min=1e-9)
    traj = run(np.full(64, 2.0), 1e-3, params, cfg, NoiseSpec.silent(), g,
               seed=0, n_records=3)
    final = traj.records[-1].functionals
    assert traj.status == "completed"
    assert abs(final.mass - 2.0) <= 1e-12
    assert final.e1 <= 1e-20


def test_dispersion_mode_decay_oracle():
    # Oracle: exact exponential exp(-(2 pi k / L)^4 t) for the linearized
    # deterministic equation about ubar = 1.
    L = 1.0
    g = Grid(L, 64)
    params = make_params(eps=0.0)
    cfg = StepperConfig(dt_init=1e-6, dt_min=1e-10)
    gk = basis_eval(1, g)
    u0 = 1.0 + 1e-4 * gk
    horizon = 1e-3
    traj = run(u0, horizon, params, cfg, NoiseSpec.silent(), g,
               seed=0, n_records=2, store_fields=True)
    a0 = g.inner(traj.snapshots[0][1], gk)
    a1 = g.inner(traj.snapshots[-1][1], gk)
    rate = -math.log(a1 / a0) / horizon
    assert rate == pytest.approx((2 * np.pi / L) ** 4, rel=0.01)


def test_mass_conservation_noisy_run():
    g = Grid(1.0, 128)
    spec = NoiseSpec.power_law(0.5, 3.0, 16)
    params = make_params(eps=1e-3, c_strat_val=c_strat(spec, 1.0))
    cfg = StepperConfig(dt_init=1e-5, dt_min=1e-10)
    u0 = cos_bump(g) + params.floor
    traj = run(u0, 0.02, params, cfg, spec, g, seed=7, n_records=11)
    m0 = traj.records[0].functionals.mass
    m1 = traj.records[-1].functionals.mass
    assert abs(m1 - m0) / m0 <= 1e-9


def test_deterministic_energy_dissipation_per_step():
    g = Grid(1.0, 128)
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-7, dt_min=1e-12)
    u0 = cos_bump(g) + params.floor
    n_steps = 200
    traj = run(u0, n_steps * cfg.dt_init, params, cfg, NoiseSpec.silent(), g,
               seed=0, n_records=n_steps + 1)
    energies = np.array([r.functionals.energy for r in traj.records])
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-10 * energies[:-1])


def test_positivity_preserved_from_shifted_bump():
    g = Grid(1.0, 64)
    spec = NoiseSpec.power_law(0.5, 3.0, 8)
    params = make_params(eps=1e-3, c_strat_val=c_strat(spec, 1.0))
    cfg = StepperConfig(dt_init=1e-5, dt_min=1e-10)
    u0 = cos_bump(g) + params.floor
    traj = run(u0, 0.01, params, cfg, spec, g, seed=3, n_records=21)
    assert traj.status == "completed"
    assert all(r.functionals.min_u > 0.0 for r in traj.records)


def test_run_rejects_initial_data_below_floor():
    g = Grid(1.0, 32)
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-6, dt_min=1e-10)
    with pytest.raises(NonpositiveFieldError, match=r"\(H2ε\)"):
        run(np.full(32, 0.5 * params.floor), 1e-4, params, cfg,
            NoiseSpec.silent(), g, seed=0)


def test_zero_horizon_single_record():
    g = Grid(1.0, 32)
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-6, dt_min=1e-10)
    u0 = np.full(32, 1.0) + params.floor
    traj = run(u0, 0.0, params, cfg, NoiseSpec.silent(), g, seed=0)
    assert len(traj.records) == 1
    assert traj.records[0].t == 0.0
    rec0 = functionals(u0, params, g)
    assert traj.records[0].functionals.e1 == rec0.e1
    assert traj.records[0].functionals.energy == rec0.energy


def test_same_seed_bit_identical():
    g = Grid(1.0, 64)
    spec = NoiseSpec.power_law(0.5, 3.0, 8)
    params = make_params(eps=1e-3, c_strat_val=c_strat(spec, 1.0))
    cfg = StepperConfig(dt_init=1e-5, dt_min=1e-10)
    u0 = cos_bump(g) + params.floor
    t1 = run(u0, 5e-3, params, cfg, spec, g, seed=11, n_records=6, store_fields=True)
    t2 = run(u0, 5e-3, params, cfg, spec, g, seed=11, n_records=6, store_fields=True)
    assert [r.t for r in t1.records] == [r.t for r in t2.records]
    for (ta, ua), (tb, ub) in zip(t1.snapshots, t2.snapshots):
        assert ta == tb
        assert np.array_equal(ua, ub)
    assert all(
        a.functionals == b.functionals for a, b in zip(t1.records, t2.records)
    )


# stopping ---------------------------------------------------------------------

def test_stop_at_time_zero_when_energy_already_high():
    g = Grid(1.0, 64)
    spec = NoiseSpec.silent()
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-6, dt_min=1e-10, sigma=1.0)
    u0 = cos_bump(g) + params.floor  # energy ~ 5 >= 1/sigma = 1
    assert functionals(u0, params, g).energy >= 1.0
    traj = run(u0, 1e-4, params, cfg, spec, g, seed=0, n_records=5)
    assert traj.status == "stopped"
    assert traj.stopped_at == 0.0
    u_first = traj.records[0].functionals
    for r in traj.records:
        assert r.stopped
        assert r.functionals == u_first


def test_no_stop_when_threshold_unreachable():
    g = Grid(1.0, 64)
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-6, dt_min=1e-10, sigma=1e-9)
    u0 = cos_bump(g) + params.floor
    traj = run(u0, 1e-4, params, cfg, NoiseSpec.silent(), g, seed=0, n_records=5)
    assert traj.status == "completed"
    assert traj.stopped_at is None


def test_stop_mid_run_freezes_field():
    # Strong noise pumps the gradient energy of a flat state over the
    # threshold within the horizon.
    g = Grid(1.0, 64)
    spec = NoiseSpec.power_law(3.0, 3.0, 8)
    params = make_params(eps=1e-3, c_strat_val=c_strat(spec, 1.0))
    u0 = np.full(64, 1.0) + params.floor
    e0 = functionals(u0, params, g).energy
    assert e0 < 5.1
    cfg = StepperConfig(dt_init=1e-5, dt_min=1e-12, sigma=1.0 / 5.1)
    traj = run(u0, 0.05, params, cfg, spec, g, seed=2, n_records=51,
               store_fields=True)
    assert traj.status == "stopped"
    assert traj.stopped_at is not None and 0.0 < traj.stopped_at < 0.05
    frozen = [u for t, u in traj.snapshots if t >= traj.stopped_at]
    assert len(frozen) >= 2
    for u in frozen[1:]:
        assert np.array_equal(u, frozen[0])


def test_step_identity_once_stopped():
    g = Grid(1.0, 32)
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-6, dt_min=1e-10, sigma=1.0)
    u0 = cos_bump(g) + params.floor
    rng = np.random.Generator(np.random.Philox(key=0))
    state = SimState(t=0.0, u=u0.copy(), dt_current=cfg.dt_init, rng=rng)
    check_stop(state, params, cfg, g)
    assert state.stopped_at == 0.0
    before = state.u.copy()
    step(state, params, cfg, NoiseSpec.silent(), g)
    assert state.t == 0.0
    assert np.array_equal(state.u, before)


# failure ------------------------------------------------------------------------

def test_dt_underflow_marks_failed():
    g = Grid(1.0, 64)
    spec = NoiseSpec.power_law(3.0, 3.0, 8)
    params = ModelParams(eps=1e-10, p=3.0, theta=0.3, alpha=-0.25,
                         c_strat=c_strat(spec, 1.0))
    cfg = StepperConfig(dt_init=1e-2, dt_min=6e-3)
    u0 = np.full(64, 2e-3)
    traj = run(u0, 1.0, params, cfg, spec, g, seed=1, n_records=3)
    assert traj.status == "failed"
    assert traj.rejections >= 1


# scheme cross-validation -----------------------------------------------------------

def test_fully_implicit_matches_semi_implicit_small_n():
    g = Grid(1.0, 32)
    spec = NoiseSpec.silent()
    params = make_params(eps=1e-2, c_strat_val=0.1)
    u0 = 1.0 + 0.2 * np.sin(2 * np.pi * g.x) + params.floor
    horizon = 20e-6
    results = {}
    for scheme in ("semi_implicit", "fully_implicit"):
        cfg = StepperConfig(dt_init=1e-6, dt_min=1e-12, scheme=scheme)
        traj = run(u0, horizon, params, cfg, spec, g, seed=0,
                   n_records=2, store_fields=True)
        assert traj.status == "completed"
        results[scheme] = traj.snapshots[-1][1]
    diff = np.max(np.abs(results["semi_implicit"] - results["fully_implicit"]))
    assert diff <= 1e-6 * np.max(np.abs(results["fully_implicit"]))


def test_fully_implicit_energy_dissipation():
    g = Grid(1.0, 32)
    params = make_params(eps=1e-2)
    cfg = StepperConfig(dt_init=1e-6, dt_min=1e-12, scheme="fully_implicit")
    u0 = cos_bump(g) + params.floor
    traj = run(u0, 50e-6, params, cfg, NoiseSpec.silent(), g, seed=0,
               n_records=51)
    energies = np.array([r.functionals.energy for r in traj.records])
    assert np.all(np.diff(energies) <= 1e-10 * energies[:-1])
