"""Per-state and per-trajectory diagnostics.

Everything the verification harness measures lives here: the four dissipation
integrals of the combined entropy-energy estimate, the weak-form process
M(t) for a smooth test function together with its quadratic-variation rate,
and the log-log touchdown-exponent fit used to assess contact-angle behaviour
near film minima.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonpositiveFieldError
from .grid import Grid
from .model import FunctionalRecord, ModelParams, interface_potential_d1, interface_potential_d2
from .noise import NoiseSpec, _basis_matrices, basis_derivatives

__all__ = [
    "DiagnosticsRecord",
    "Trajectory",
    "TestFunction",
    "TouchdownFit",
    "MartingaleSeries",
    "dissipation_terms",
    "test_function",
    "qv_rate",
    "weak_form_rate",
    "martingale_residual",
    "touchdown_exponent",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One sampled instant along a trajectory."""

    t: float
    functionals: FunctionalRecord
    diss_pressure: float    # int u^2 ((u_xx - eps F'(u))_x)^2
    diss_quartic: float     # int ((u^((a+3)/4))_x)^4
    diss_hessian: float     # int ((u^((a+3)/2))_xx)^2
    diss_potential: float   # int u^(a+1) u_x^2 eps F''(u)
    stopped: bool
    rejections: int
    martingale_value: float | None = None
    qv_integrand: float | None = None


@dataclass
class Trajectory:
    """Ordered diagnostics records plus run outcome and provenance."""

    records: list[DiagnosticsRecord]
    status: str  # "completed" | "stopped" | "failed"
    seed: int
    horizon: float
    stopped_at: float | None = None
    rejections: int = 0
    metadata: dict = field(default_factory=dict)
    snapshots: list[tuple[float, np.ndarray]] | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


def dissipation_terms(
    u: np.ndarray,
    params: ModelParams,
    grid: Grid,
    clip_negative: bool = False,
) -> tuple[float, float, float, float]:
    """Dissipation integrals (pressure, quartic, hessian, potential).

    Fractional powers are taken nodewise and then differentiated with the
    central stencil.  ``clip_negative`` evaluates the powers by continuity at
    zero for limit analyses; otherwise negative nodes raise.
    """
    u = grid.field(u)
    if np.any(u < 0.0):
        if not clip_negative:
            raise NonpositiveFieldError(
                "dissipation terms require a nonnegative field"
            )
        u = np.maximum(u, 0.0)

    a = params.alpha
    ux = grid.d1_central(u)

    if params.eps > 0.0:
        if np.any(u <= 0.0):
            raise NonpositiveFieldError(
                "dissipation terms require a positive field when eps > 0"
            )
        ptilde = -grid.d2(u) + params.eps * interface_potential_d1(u, params.p)
        diss_potential = grid.integrate(
            u ** (a + 1.0) * ux * ux
            * params.eps * interface_potential_d2(u, params.p)
        )
    else:
        ptilde = -grid.d2(u)
        diss_potential = 0.0

    px = grid.d1_central(ptilde)
    diss_pressure = grid.integrate(u * u * px * px)

    v = u ** ((a + 3.0) / 4.0)
    vx = grid.d1_central(v)
    diss_quartic = grid.integrate(vx**4)

    w = u ** ((a + 3.0) / 2.0)
    wxx = grid.d2(w)
    diss_hessian = grid.integrate(wxx * wxx)

    return diss_pressure, diss_quartic, diss_hessian, diss_potential


@dataclass(frozen=True)
class TestFunction:
    """Smooth periodic test function with analytic derivatives on the nodes."""

    coeffs: tuple[tuple[int, float], ...]
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


def test_function(grid: Grid, coeffs) -> TestFunction:
    """Build a test function as a combination of basis modes.

    ``coeffs`` maps mode number k to its coefficient; a bare integer is
    shorthand for the single mode g_k with unit coefficient.
    """
    if isinstance(coeffs, (int, np.integer)):
        coeffs = {int(coeffs): 1.0}
    items = tuple(sorted((int(k), float(c)) for k, c in dict(coeffs).items()))
    vals = np.zeros(grid.n_cells)
    d1 = np.zeros(grid.n_cells)
    d2 = np.zeros(grid.n_cells)
    d3 = np.zeros(grid.n_cells)
    for k, c in items:
        g, gx, gxx, gxxx = basis_derivatives(k, grid)
        vals += c * g
        d1 += c * gx
        d2 += c * gxx
        d3 += c * gxxx
    return TestFunction(coeffs=items, values=vals, d1=d1, d2=d2, d3=d3)


def qv_rate(u: np.ndarray, phi: TestFunction, spec: NoiseSpec, grid: Grid) -> float:
    """Instantaneous quadratic-variation rate sum_k lam_k^2 (int (u g_k)_x phi)^2."""
    g, _, _, lam = _basis_matrices(spec, grid)
    gu = g * u[np.newaxis, :]
    dgu = (np.roll(gu, -1, axis=1) - np.roll(gu, 1, axis=1)) / (2.0 * grid.dx)
    proj = dgu @ phi.values * grid.dx
    return float(np.sum(lam**2 * proj**2))


def weak_form_rate(
    u: np.ndarray, phi: TestFunction, params: ModelParams, spec: NoiseSpec, grid: Grid
) -> float:
    """Deterministic rate W(s) whose time integral enters the weak-form process.

    W = int u_x^3 phi_x + 3 int u u_x^2 phi_xx + int u^2 u_x phi_xxx
        - int u^2 u_x eps F''(u) phi_x
        - (1/2) sum_k lam_k^2 int g_k (g_k u)_x phi_x
    """
    ux = grid.d1_central(u)
    w = grid.integrate(ux**3 * phi.d1)
    w += 3.0 * grid.integrate(u * ux * ux * phi.d2)
    w += grid.integrate(u * u * ux * phi.d3)
    if params.eps > 0.0:
        w -= grid.integrate(
            u * u * ux * params.eps * interface_potential_d2(u, params.p) * phi.d1
        )
    if not spec.is_silent():
        g, _, _, lam = _basis_matrices(spec, grid)
        gu = g * u[np.newaxis, :]
        dgu = (np.roll(gu, -1, axis=1) - np.roll(gu, 1, axis=1)) / (2.0 * grid.dx)
        combo = (lam**2) @ (g * dgu)
        w -= 0.5 * grid.integrate(combo * phi.d1)
    return float(w)


@dataclass(frozen=True)
class MartingaleSeries:
    """Weak-form process M(t) and its accumulated quadratic variation."""

    times: np.ndarray
    values: np.ndarray
    qv_integral: np.ndarray


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def martingale_residual(
    trajectory: Trajectory,
    phi: TestFunction,
    params: ModelParams,
    spec: NoiseSpec,
    grid: Grid,
) -> MartingaleSeries:
    """Evaluate the weak-form process along stored snapshots.

    M(t) = int (u(t) - u(0)) phi - int_0^t W(s) ds with trapezoidal time
    integrals over the record cadence.  M(0) = 0 exactly; for zero noise M is
    the deterministic weak-form residual of the scheme.
    """
    if not trajectory.snapshots:
        raise ValueError("trajectory was run without field snapshots")
    times = np.array([t for t, _ in trajectory.snapshots])
    base_dt = trajectory.metadata.get("dt_init")
    if base_dt and times.size > 1 and np.max(np.diff(times)) > 10.0 * base_dt:
        warnings.warn(
            "record spacing exceeds 10x the base time step; "
            "weak-form time integrals may be under-resolved",
            stacklevel=2,
        )
    boundary = np.empty(times.size)
    rate = np.empty(times.size)
    qv = np.empty(times.size)
    for j, (_, u) in enumerate(trajectory.snapshots):
        boundary[j] = grid.inner(u, phi.values)
        rate[j] = weak_form_rate(u, phi, params, spec, grid)
        qv[j] = qv_rate(u, phi, spec, grid)
    m = (boundary - boundary[0]) - _cumtrapz(rate, times)
    return MartingaleSeries(times=times, values=m, qv_integral=_cumtrapz(qv, times))


@dataclass(frozen=True)
class TouchdownFit:
    """Least-squares exponent of log u against log distance near a minimum."""

    location: float
    exponent: float
    r_squared: float
    n_points: int
    min_value: float


def _refine_minimum(x0: float, um: float, ul: float, ur: float, dx: float) -> float:
    """Sub-node vertex of the parabola through the minimum and its neighbours."""
    denom = ul - 2.0 * um + ur
    if denom <= 0.0:
        return x0
    shift = 0.5 * dx * (ul - ur) / denom
    return x0 + float(np.clip(shift, -0.5 * dx, 0.5 * dx))


def touchdown_exponent(
    u: np.ndarray,
    grid: Grid,
    threshold: float,
    noise_floor: float | None = None,
    exclude_nodes: int = 2,
    min_points: int = 6,
) -> list[TouchdownFit]:
    """Fit power-law exponents at every local minimum below ``threshold``.

    For each detected minimum the fit uses nodes with
    u in [u_min + noise_floor, 10*threshold], walking outward monotonically
    and excluding the ``exclude_nodes`` nearest nodes on each side (the
    discrete minimum contaminates the log-log fit).  Windows with fewer than
    ``min_points`` points are skipped with a warning.
    """
    if not threshold > 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    u = grid.field(u)
    n = grid.n_cells
    left = np.roll(u, 1)
    right = np.roll(u, -1)
    is_min = (u < left) & (u <= right) & (u < threshold)
    fits: list[TouchdownFit] = []
    upper = 10.0 * threshold
    for i0 in np.flatnonzero(is_min):
        u_min = float(u[i0])
        if noise_floor is None:
            floor = max(0.5 * u_min, grid.dx * (float(np.max(u)) - u_min))
        else:
            floor = noise_floor
        lower = u_min + floor
        x0 = _refine_minimum(
            float(grid.x[i0]), u_min, float(u[(i0 - 1) % n]), float(u[(i0 + 1) % n]),
            grid.dx,
        )
        dists: list[float] = []
        heights: list[float] = []
        for direction in (+1, -1):
            prev = None
            for m in range(exclude_nodes + 1, n // 2):
                j = (i0 + direction * m) % n
                uj = float(u[j])
                if uj > upper:
                    break
                if uj < lower or uj <= 0.0:
                    if prev is not None:
                        break  # dropped out of the window after the flank
                    continue  # still crossing the noise floor near the minimum
                if prev is not None and uj < prev:
                    break  # flank no longer rises
                prev = uj
                d = abs(float(grid.x[j]) - x0)
                d = min(d, grid.length - d)
                if d <= 0.0:
                    continue
                dists.append(d)
                heights.append(uj)
        if len(dists) < min_points:
            warnings.warn(
                f"touchdown fit at x={x0:.6g} skipped: window has "
                f"{len(dists)} points (< {min_points})",
                stacklevel=2,
            )
            continue
        log_d = np.log(np.asarray(dists))
        log_u = np.log(np.asarray(heights))
        slope, intercept = np.polyfit(log_d, log_u, 1)
        pred = slope * log_d + intercept
        ss_res = float(np.sum((log_u - pred) ** 2))
        ss_tot = float(np.sum((log_u - np.mean(log_u)) ** 2))
        r_sq = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 0.0
        fits.append(
            TouchdownFit(
                location=x0,
                exponent=float(slope),
                r_squared=r_sq,
                n_points=len(dists),
                min_value=u_min,
            )
        )
    return fits
