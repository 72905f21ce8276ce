"""Constitutive functions and functionals of the film-height model.

Mobility m(u) = u^2, interface potential F(u) = u^(-p), Stratonovich potential
S(u) = c_strat*(u - log u), regularized potential Pi_eps = eps*F + S (set to
+inf for u <= 0), the alpha-entropy density G_alpha, and the assembled
functionals (mass, gradient energy, potential energy, total energy, positivity
functional) used by the stepper and the diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveFieldError
from .grid import Grid

__all__ = [
    "ModelParams",
    "FunctionalRecord",
    "MinBoundCheck",
    "mobility",
    "mobility_mean",
    "interface_potential",
    "interface_potential_d1",
    "interface_potential_d2",
    "strat_potential",
    "strat_potential_d1",
    "strat_potential_d2",
    "regularized_potential",
    "alpha_entropy",
    "functionals",
    "min_bound_check",
]


@dataclass(frozen=True)
class ModelParams:
    """Admissible model parameters.

    eps = 0 is the deterministic-limit mode: the interface potential is
    switched off entirely and positivity is not enforced by the stepper.
    """

    eps: float
    p: float
    theta: float
    alpha: float
    c_strat: float

    def __post_init__(self):
        if not (self.eps == 0.0 or 0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must be 0 or in (0, 1], got {self.eps}")
        if not self.p > 2.0:
            raise ValueError(f"(H4ε) requires p > 2, got p={self.p}")
        if not 0.0 < self.theta < 1.0 / self.p:
            raise ValueError(
                f"(H2ε) requires theta in (0, 1/p) = (0, {1.0 / self.p:.6g}), "
                f"got theta={self.theta}"
            )
        if not -1.0 / 3.0 < self.alpha < 0.0:
            raise ValueError(f"alpha must lie in (-1/3, 0), got {self.alpha}")
        if not (self.c_strat >= 0.0 and math.isfinite(self.c_strat)):
            raise ValueError(f"c_strat must be nonnegative, got {self.c_strat}")

    @property
    def floor(self) -> float:
        """Initial-data shift eps^theta (zero in the deterministic limit)."""
        return self.eps**self.theta if self.eps > 0.0 else 0.0


@dataclass(frozen=True)
class FunctionalRecord:
    """Spatial functionals of one state."""

    mass: float
    e1: float        # (1/2) int u_x^2
    e2: float        # eps int u^(-p)
    g_alpha: float   # int G_alpha(u)
    energy: float    # e1 + int Pi_eps(u)
    h_eps: float     # e1 + e2
    min_u: float


def _positive(u, what: str) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 0.0):
        raise NonpositiveFieldError(f"{what} requires a positive argument")
    return arr


def _scalar_or_array(out: np.ndarray, like) -> float | np.ndarray:
    if np.isscalar(like) or np.ndim(like) == 0:
        return float(out)
    return out


def mobility(u):
    """m(u) = u^2."""
    return u * u


def mobility_mean(a, b):
    """Flux mobility between adjacent nodes.

    Harmonic-integral average of m(s) = s^2 over [a, b], which reduces to the
    product a*b (and to a^2 at coincident arguments).  It vanishes whenever an
    endpoint vanishes, giving degenerate fluxes at touchdown.
    """
    return a * b


def interface_potential(u, p: float):
    """F(u) = u^(-p) for u > 0."""
    arr = _positive(u, "interface potential")
    return _scalar_or_array(arr ** (-p), u)


def interface_potential_d1(u, p: float):
    arr = _positive(u, "interface potential")
    return _scalar_or_array(-p * arr ** (-p - 1.0), u)


def interface_potential_d2(u, p: float):
    arr = _positive(u, "interface potential")
    return _scalar_or_array(p * (p + 1.0) * arr ** (-p - 2.0), u)


def strat_potential(u, c_strat: float):
    """S(u) = c_strat * (u - log u) for u > 0."""
    arr = _positive(u, "Stratonovich potential")
    return _scalar_or_array(c_strat * (arr - np.log(arr)), u)


def strat_potential_d1(u, c_strat: float):
    arr = _positive(u, "Stratonovich potential")
    return _scalar_or_array(c_strat * (1.0 - 1.0 / arr), u)


def strat_potential_d2(u, c_strat: float):
    arr = _positive(u, "Stratonovich potential")
    return _scalar_or_array(c_strat / (arr * arr), u)


def regularized_potential(u, params: ModelParams):
    """Pi_eps(u) = eps*u^(-p) + S(u) for u > 0, +inf for u <= 0.

    With eps = 0 the interface part is skipped; if additionally c_strat = 0
    the potential is identically zero (deterministic limit).
    """
    arr = np.asarray(u, dtype=float)
    active = params.eps > 0.0 or params.c_strat > 0.0
    out = np.zeros_like(arr)
    pos = arr > 0.0
    if active:
        out = np.where(pos, 0.0, np.inf)
        safe = np.where(pos, arr, 1.0)
        if params.eps > 0.0:
            out = out + np.where(pos, params.eps * safe ** (-params.p), 0.0)
        if params.c_strat > 0.0:
            out = out + np.where(
                pos, params.c_strat * (safe - np.log(safe)), 0.0
            )
    return _scalar_or_array(out, u)


def alpha_entropy(u, alpha: float):
    """G_alpha(u) = u^(alpha+1)/(alpha*(alpha+1)) - u/alpha + 1/(alpha+1).

    Nonnegative, vanishing only at u = 1, and finite at u = 0 where it equals
    1/(alpha+1) by continuity.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0):
        raise NonpositiveFieldError("alpha-entropy requires a nonnegative argument")
    out = (
        arr ** (alpha + 1.0) / (alpha * (alpha + 1.0))
        - arr / alpha
        + 1.0 / (alpha + 1.0)
    )
    return _scalar_or_array(out, u)


def energy_value(u: np.ndarray, params: ModelParams, grid: Grid) -> float:
    """Total energy e1 + int Pi_eps(u) only (hot path of the stopping check)."""
    ux = grid.d1_forward(u)
    e1 = 0.5 * grid.integrate(ux * ux)
    if params.eps > 0.0 or params.c_strat > 0.0:
        if np.min(u) <= 0.0:
            return math.inf
        pi = np.zeros_like(u)
        if params.eps > 0.0:
            pi = params.eps * u ** (-params.p)
        if params.c_strat > 0.0:
            pi = pi + params.c_strat * (u - np.log(u))
        return e1 + grid.integrate(pi)
    return e1


def functionals(u: np.ndarray, params: ModelParams, grid: Grid) -> FunctionalRecord:
    """Assemble all spatial functionals of a state in one pass.

    Any node with u <= 0 sends e2 and energy to +inf (and g_alpha to +inf when
    a node is strictly negative).
    """
    u = grid.field(u)
    min_u = float(np.min(u))
    mass = grid.integrate(u)
    ux = grid.d1_forward(u)
    e1 = 0.5 * grid.integrate(ux * ux)

    if params.eps > 0.0:
        e2 = math.inf if min_u <= 0.0 else params.eps * grid.integrate(
            u ** (-params.p)
        )
    else:
        e2 = 0.0

    if min_u < 0.0:
        g_a = math.inf
    else:
        g_a = grid.integrate(alpha_entropy(u, params.alpha))

    active = params.eps > 0.0 or params.c_strat > 0.0
    if active and min_u <= 0.0:
        pi_int = math.inf
    else:
        pi_int = grid.integrate(regularized_potential(u, params)) if active else 0.0

    return FunctionalRecord(
        mass=mass,
        e1=e1,
        e2=e2,
        g_alpha=g_a,
        energy=e1 + pi_int,
        h_eps=e1 + e2,
        min_u=min_u,
    )


@dataclass(frozen=True)
class MinBoundCheck:
    """Two sides of the sup-of-reciprocal bound implied by the positivity functional."""

    lhs: float          # sup 1/u
    rhs: float
    h_eps: float
    satisfied: bool


def min_bound_check(u: np.ndarray, params: ModelParams, grid: Grid) -> MinBoundCheck:
    """Check sup(1/u) <= K*[ (mean u)^-1 + ((p-2)/2)^g * eps^(-g/2) * H^g ].

    Here g = 2/(p-2), H = e1 + e2 is the positivity functional, and
    K = max(1, 2^(g-1)) covers the subadditivity defect of t -> t^g for g > 1.
    The constant chain: discrete total variation of v = u^(-(p-2)/2), a mean
    value bound |dv| <= (p-2)/2 * min(u_i, u_{i+1})^(-p/2) |du|, Cauchy-Schwarz
    with min(a,b)^(-p) <= a^(-p) + b^(-p), and Young's inequality pairing the
    two halves of H.
    """
    u = grid.field(u)
    if np.any(u <= 0.0):
        raise NonpositiveFieldError("min_bound_check requires a positive field")
    rec = functionals(u, params, grid)
    lhs = 1.0 / rec.min_u
    mean_u = rec.mass / grid.length
    if params.eps == 0.0:
        return MinBoundCheck(lhs=lhs, rhs=math.inf, h_eps=rec.h_eps, satisfied=True)
    g = 2.0 / (params.p - 2.0)
    big_k = max(1.0, 2.0 ** (g - 1.0))
    c0 = (params.p - 2.0) / 2.0
    rhs = big_k * (
        1.0 / mean_u + (c0 / math.sqrt(params.eps)) ** g * rec.h_eps**g
    )
    return MinBoundCheck(
        lhs=lhs,
        rhs=rhs,
        h_eps=rec.h_eps,
        satisfied=lhs <= rhs * (1.0 + 1e-12),
    )
