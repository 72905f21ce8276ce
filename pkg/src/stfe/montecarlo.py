"""Ensemble execution, moment estimation, and the regularization sweep.

Sample i always runs on the stream keyed by base_seed + i, so ensembles are
reproducible bit for bit regardless of the worker count, and sweeps over the
regularization strength reuse identical Brownian paths (common random
numbers) as long as no step rejections occur.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .diagnostics import martingale_residual, test_function
from .errors import AllSamplesFailedError, ConfigError
from .grid import Grid
from .model import ModelParams
from .noise import NoiseSpec
from .stepper import StepperConfig, run

__all__ = [
    "EnsembleConfig",
    "EnsembleStats",
    "MartingaleRow",
    "SweepReport",
    "default_workers",
    "run_ensemble",
    "eps_sweep",
    "MOMENT_STATISTICS",
    "EXTRA_STATISTICS",
]

# The six supremum/time-integral statistics tracked across the eps sweep.
MOMENT_STATISTICS = (
    "sup_e1",
    "sup_e1_plus_e2",
    "int_diss_pressure",
    "int_diss_quartic",
    "int_diss_hessian",
    "int_diss_potential",
)
# Regularization-dependent diagnostics reported alongside.
EXTRA_STATISTICS = ("sup_e2", "init_e2")

MAX_FAILED_FRACTION = 0.05


def default_workers() -> int:
    """Worker count: STFE_THREADS if set, else hardware parallelism."""
    env = os.environ.get("STFE_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"STFE_THREADS must be an integer, got {env!r}") from exc
        if value < 1:
            raise ConfigError(f"STFE_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EnsembleConfig:
    n_samples: int
    base_seed: int
    q_list: tuple[float, ...] = (1.0,)
    phi_modes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_samples < 2:
            raise ConfigError(
                f"n_samples must be >= 2, got {self.n_samples}"
            )
        if self.base_seed < 0:
            raise ConfigError(f"base_seed must be nonnegative, got {self.base_seed}")
        if any(q < 1.0 for q in self.q_list):
            raise ConfigError(f"moment exponents must be >= 1, got {self.q_list}")
        seeds = self.seeds()
        if len(set(seeds)) != len(seeds):
            raise ConfigError("per-sample seeds collide")

    def seeds(self) -> tuple[int, ...]:
        return tuple(self.base_seed + i for i in range(self.n_samples))


@dataclass(frozen=True)
class MartingaleRow:
    phi_mode: int
    t: float
    mean_m: float
    se_m: float
    mean_m2: float
    mean_qv_int: float
    ratio: float


@dataclass
class EnsembleStats:
    eps: float
    n_samples: int
    n_failed: int
    total_rejections: int
    invalid: bool
    q_list: tuple[float, ...]
    moments: dict[tuple[float, str], tuple[float, float]]
    martingale: list[MartingaleRow] = field(default_factory=list)
    record_times: np.ndarray | None = None


@dataclass(frozen=True)
class _SampleTask:
    index: int
    seed: int
    u0: np.ndarray
    horizon: float
    params: ModelParams
    stepper_config: StepperConfig
    spec: NoiseSpec
    grid: Grid
    n_records: int
    phi_modes: tuple[int, ...]


@dataclass
class _SampleResult:
    index: int
    status: str
    rejections: int
    stats: dict[str, float]
    times: np.ndarray | None = None
    mart_m: dict[int, np.ndarray] = field(default_factory=dict)
    mart_qv: dict[int, np.ndarray] = field(default_factory=dict)


def _run_sample(task: _SampleTask) -> _SampleResult:
    traj = run(
        task.u0,
        task.horizon,
        task.params,
        task.stepper_config,
        task.spec,
        task.grid,
        seed=task.seed,
        n_records=task.n_records,
        store_fields=bool(task.phi_modes),
    )
    result = _SampleResult(index=task.index, status=traj.status, rejections=traj.rejections, stats={})
    if traj.status == "failed":
        return result
    recs = traj.records
    times = traj.times
    e1 = np.array([r.functionals.e1 for r in recs])
    e2 = np.array([r.functionals.e2 for r in recs])
    result.stats = {
        "sup_e1": float(np.max(e1)),
        "sup_e1_plus_e2": float(np.max(e1 + e2)),
        "sup_e2": float(np.max(e2)),
        "init_e2": float(e2[0]),
        "int_diss_pressure": float(
            np.trapezoid([r.diss_pressure for r in recs], times)
        ),
        "int_diss_quartic": float(
            np.trapezoid([r.diss_quartic for r in recs], times)
        ),
        "int_diss_hessian": float(
            np.trapezoid([r.diss_hessian for r in recs], times)
        ),
        "int_diss_potential": float(
            np.trapezoid([r.diss_potential for r in recs], times)
        ),
    }
    result.times = times
    for mode in task.phi_modes:
        phi = test_function(task.grid, mode)
        series = martingale_residual(traj, phi, task.params, task.spec, task.grid)
        result.mart_m[mode] = series.values
        result.mart_qv[mode] = series.qv_integral
    return result


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n >= 2 else 0.0
    return mean, se


def run_ensemble(
    ens: EnsembleConfig,
    params: ModelParams,
    stepper_config: StepperConfig,
    spec: NoiseSpec,
    grid: Grid,
    u0: np.ndarray,
    horizon: float,
    n_records: int = 100,
    workers: int | None = None,
) -> EnsembleStats:
    """Run n independent trajectories and estimate the tracked moments.

    Failed trajectories (time-step underflow) are excluded from the estimates
    and counted; the result is marked invalid when more than 5% fail.  Results
    are bit-identical for any worker count: per-sample reductions depend only
    on the sample's own stream, and aggregation is ordered by sample index.
    """
    tasks = [
        _SampleTask(
            index=i,
            seed=seed,
            u0=u0,
            horizon=horizon,
            params=params,
            stepper_config=stepper_config,
            spec=spec,
            grid=grid,
            n_records=n_records,
            phi_modes=ens.phi_modes,
        )
        for i, seed in enumerate(ens.seeds())
    ]
    n_workers = workers if workers is not None else default_workers()
    n_workers = max(1, min(n_workers, len(tasks)))
    if n_workers == 1:
        results = [_run_sample(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_sample, tasks, chunksize=1))
    results.sort(key=lambda r: r.index)

    survivors = [r for r in results if r.status != "failed"]
    n_failed = len(results) - len(survivors)
    if not survivors:
        raise AllSamplesFailedError(
            f"all {len(results)} trajectories failed (time-step underflow)"
        )
    invalid = n_failed > MAX_FAILED_FRACTION * ens.n_samples

    moments: dict[tuple[float, str], tuple[float, float]] = {}
    for stat in MOMENT_STATISTICS + EXTRA_STATISTICS:
        values = np.array([r.stats[stat] for r in survivors])
        for q in ens.q_list:
            moments[(q, stat)] = _mean_se(values**q)

    martingale: list[MartingaleRow] = []
    record_times = survivors[0].times
    for mode in ens.phi_modes:
        m_mat = np.vstack([r.mart_m[mode] for r in survivors])
        qv_mat = np.vstack([r.mart_qv[mode] for r in survivors])
        for j, t in enumerate(record_times):
            mean_m, se_m = _mean_se(m_mat[:, j])
            mean_m2 = float(np.mean(m_mat[:, j] ** 2))
            mean_qv = float(np.mean(qv_mat[:, j]))
            ratio = mean_m2 / mean_qv if mean_qv > 0.0 else math.nan
            martingale.append(
                MartingaleRow(
                    phi_mode=mode,
                    t=float(t),
                    mean_m=mean_m,
                    se_m=se_m,
                    mean_m2=mean_m2,
                    mean_qv_int=mean_qv,
                    ratio=ratio,
                )
            )

    return EnsembleStats(
        eps=params.eps,
        n_samples=ens.n_samples,
        n_failed=n_failed,
        total_rejections=sum(r.rejections for r in results),
        invalid=invalid,
        q_list=ens.q_list,
        moments=moments,
        martingale=martingale,
        record_times=record_times,
    )


@dataclass(frozen=True)
class SweepRatio:
    min_value: float
    max_value: float
    ratio: float
    flagged: bool


@dataclass
class SweepReport:
    eps_list: tuple[float, ...]
    stats: dict[float, EnsembleStats]
    ratios: dict[tuple[float, str], SweepRatio]

    def flagged(self) -> list[tuple[float, str]]:
        return [key for key, value in self.ratios.items() if value.flagged]


def eps_sweep(
    ens: EnsembleConfig,
    params: ModelParams,
    stepper_config: StepperConfig,
    spec: NoiseSpec,
    grid: Grid,
    u0_factory: Callable[[ModelParams], np.ndarray],
    horizon: float,
    eps_list,
    n_records: int = 100,
    workers: int | None = None,
    growth_factor: float = 4.0,
) -> SweepReport:
    """Rerun the ensemble for each regularization strength with shared seeds.

    Reports every tracked moment against eps and flags any of the six
    supremum/dissipation statistics whose ensemble mean varies by more than
    ``growth_factor`` across the sweep.  The eps-dependent columns (sup_e2,
    init_e2) are reported but never flagged; they are expected to fade.
    """
    eps_list = tuple(float(e) for e in eps_list)
    if len(eps_list) < 3:
        raise ConfigError(f"eps sweep needs >= 3 values, got {len(eps_list)}")
    if any(e <= 0.0 for e in eps_list):
        raise ConfigError("eps sweep values must be positive")
    if max(eps_list) / min(eps_list) < 100.0:
        raise ConfigError("eps sweep must span at least two decades")

    stats: dict[float, EnsembleStats] = {}
    for eps in eps_list:
        p_eps = replace(params, eps=eps)
        u0 = u0_factory(p_eps)
        stats[eps] = run_ensemble(
            ens, p_eps, stepper_config, spec, grid, u0, horizon,
            n_records=n_records, workers=workers,
        )

    ratios: dict[tuple[float, str], SweepRatio] = {}
    for q in ens.q_list:
        for stat in MOMENT_STATISTICS:
            values = [stats[eps].moments[(q, stat)][0] for eps in eps_list]
            lo, hi = min(values), max(values)
            ratio = hi / lo if lo > 0.0 else math.inf
            ratios[(q, stat)] = SweepRatio(
                min_value=lo, max_value=hi, ratio=ratio,
                flagged=ratio > growth_factor,
            )
    return SweepReport(eps_list=eps_list, stats=stats, ratios=ratios)
