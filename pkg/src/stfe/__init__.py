"""Structure-preserving simulator for the 1D periodic stochastic thin-film
equation with quadratic mobility and transport noise, plus the Monte Carlo
harness that checks its conservation, positivity, moment-bound, and martingale
properties empirically."""

__version__ = "0.1.0"

from .grid import Grid
from .model import ModelParams, functionals, min_bound_check
from .noise import NoiseSpec, c_strat, noise_term, sample_increment, verify_identities
from .stepper import SimState, StepperConfig, drift, run, step
from .diagnostics import (
    DiagnosticsRecord,
    Trajectory,
    dissipation_terms,
    martingale_residual,
    qv_rate,
    test_function,
    touchdown_exponent,
)
from .montecarlo import EnsembleConfig, EnsembleStats, eps_sweep, run_ensemble
from .config import RunConfig, build_initial, load_config, parse_config, serialize_config

__all__ = [
    "__version__",
    "Grid",
    "ModelParams",
    "NoiseSpec",
    "StepperConfig",
    "SimState",
    "DiagnosticsRecord",
    "Trajectory",
    "EnsembleConfig",
    "EnsembleStats",
    "RunConfig",
    "functionals",
    "min_bound_check",
    "c_strat",
    "noise_term",
    "sample_increment",
    "verify_identities",
    "drift",
    "step",
    "run",
    "dissipation_terms",
    "martingale_residual",
    "qv_rate",
    "test_function",
    "touchdown_exponent",
    "run_ensemble",
    "eps_sweep",
    "build_initial",
    "load_config",
    "parse_config",
    "serialize_config",
]
