"""Run configuration: flat sectioned key-value files, validation, initial data.

The format is INI-style with one level of sections.  Every admissibility rule
of the model is re-checked at load time and violations are reported with the
name of the rule they break: (H1) quadratic mobility, (H2)/(H2ε) initial data,
(H3) noise coloring and symmetry, (H4ε) potential growth.

Example::

    [grid]
    L = 1.0
    N = 128

    [noise]
    law = power
    amplitude = 0.5
    s = 3.0
    k_max = 16

    [model]
    eps = 1e-3
    p = 3.0
    theta = 0.2
    alpha = -0.25

    [stepper]
    dt_init = 1e-5
    dt_min = 1e-9
    sigma = 1e-6
    scheme = semi_implicit
    horizon = 0.01

    [initial_data]
    kind = cos_squared_bump
    height = 1.0
    center = 0.5
    radius = 0.25

    [ensemble]
    n_samples = 100
    base_seed = 1000
    q_list = 1 2
    phi_modes = 1

    [output]
    directory = out
    records = 100
    formats = csv
    snapshots = false
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .model import ModelParams
from .montecarlo import EnsembleConfig
from .noise import NoiseSpec, c_strat, check_resolved
from .stepper import StepperConfig

__all__ = [
    "InitialData",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "build_initial",
]

INITIAL_KINDS = ("constant", "bump", "cos_squared_bump", "file")
KNOWN_FORMATS = ("csv", "png")


@dataclass(frozen=True)
class InitialData:
    kind: str
    height: float = 1.0
    center: float = 0.5
    radius: float = 0.25
    path: str | None = None
    floor: str = "auto"  # "auto": shift by eps^theta when eps > 0; "none": no shift

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(
                f"unknown initial data kind {self.kind!r}; choose from {INITIAL_KINDS}"
            )
        if self.kind == "file" and not self.path:
            raise ConfigError("initial data kind 'file' requires a path")
        if self.floor not in ("auto", "none"):
            raise ConfigError(f"floor policy must be auto or none, got {self.floor!r}")
        if self.kind != "file":
            if not self.height > 0:
                raise ConfigError(
                    f"(H2) requires nonnegative data with positive height, "
                    f"got height={self.height}"
                )
            if self.kind != "constant" and not self.radius > 0:
                raise ConfigError(f"bump radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    records: int = 100
    formats: tuple[str, ...] = ("csv",)
    snapshots: bool = False

    def __post_init__(self):
        if self.records < 1:
            raise ConfigError(f"records must be >= 1, got {self.records}")
        for fmt in self.formats:
            if fmt not in KNOWN_FORMATS:
                raise ConfigError(
                    f"unknown output format {fmt!r}; choose from {KNOWN_FORMATS}"
                )


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    noise: NoiseSpec
    eps: float | None
    eps_list: tuple[float, ...] | None
    p: float
    theta: float
    alpha: float
    stepper: StepperConfig
    horizon: float
    initial: InitialData
    ensemble: EnsembleConfig | None
    output: OutputConfig

    def model_params(self, eps: float | None = None) -> ModelParams:
        if eps is None:
            if self.eps is None:
                raise ConfigError(
                    "this command needs a scalar eps in [model]; only "
                    "eps_list was given"
                )
            eps = self.eps
        return ModelParams(
            eps=eps,
            p=self.p,
            theta=self.theta,
            alpha=self.alpha,
            c_strat=c_strat(self.noise, self.grid.length),
        )

    def require_ensemble(self) -> EnsembleConfig:
        if self.ensemble is None:
            raise ConfigError("this command needs an [ensemble] section")
        return self.ensemble


def _get(parser, section, option, conv, default=None, required=False):
    if not parser.has_option(section, option):
        if required:
            raise ConfigError(f"[{section}] is missing required option {option!r}")
        return default
    raw = parser.get(section, option)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {option} = {raw!r}: {exc}") from exc


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.replace(",", " ").split())


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    for section in ("grid", "model", "stepper", "initial_data"):
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    try:
        grid = Grid(
            length=_get(parser, "grid", "l", float, required=True),
            n_cells=_get(parser, "grid", "n", int, required=True),
        )
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from exc

    # noise ----------------------------------------------------------------
    if parser.has_section("noise"):
        law = _get(parser, "noise", "law", str, default="power").strip()
        try:
            if law == "power":
                spec = NoiseSpec.power_law(
                    amplitude=_get(parser, "noise", "amplitude", float, default=0.5),
                    s=_get(parser, "noise", "s", float, default=3.0),
                    k_max=_get(parser, "noise", "k_max", int, default=16),
                )
            elif law == "explicit":
                lam = _get(parser, "noise", "lambdas", _floats, required=True)
                spec = NoiseSpec.explicit(lam)
            elif law == "silent":
                spec = NoiseSpec.silent(
                    k_max=_get(parser, "noise", "k_max", int, default=0)
                )
            else:
                raise ConfigError(
                    f"[noise] law must be power, explicit, or silent, got {law!r}"
                )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[noise] {exc}") from exc
    else:
        spec = NoiseSpec.power_law(amplitude=0.5, s=3.0, k_max=16)
    try:
        check_resolved(spec, grid)
    except ValueError as exc:
        raise ConfigError(f"[noise] {exc}") from exc

    # model ----------------------------------------------------------------
    eps = _get(parser, "model", "eps", float)
    eps_list = _get(parser, "model", "eps_list", _floats)
    if eps is None and eps_list is None:
        raise ConfigError("[model] needs eps or eps_list")
    p = _get(parser, "model", "p", float, required=True)
    theta = _get(parser, "model", "theta", float, required=True)
    alpha = _get(parser, "model", "alpha", float, required=True)
    cs = c_strat(spec, grid.length)
    try:
        for e in ([eps] if eps is not None else []) + list(eps_list or []):
            ModelParams(eps=e, p=p, theta=theta, alpha=alpha, c_strat=cs)
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}") from exc

    # stepper ----------------------------------------------------------------
    try:
        stepper = StepperConfig(
            dt_init=_get(parser, "stepper", "dt_init", float, required=True),
            dt_min=_get(parser, "stepper", "dt_min", float, required=True),
            sigma=_get(parser, "stepper", "sigma", float, default=1e-6),
            scheme=_get(parser, "stepper", "scheme", str, default="semi_implicit").strip(),
            newton_tol=_get(parser, "stepper", "newton_tol", float, default=1e-10),
            newton_max_iter=_get(parser, "stepper", "newton_max_iter", int, default=30),
        )
    except ValueError as exc:
        raise ConfigError(f"[stepper] {exc}") from exc
    horizon = _get(parser, "stepper", "horizon", float, required=True)
    if horizon < 0:
        raise ConfigError(f"[stepper] horizon must be nonnegative, got {horizon}")

    # initial data -----------------------------------------------------------
    initial = InitialData(
        kind=_get(parser, "initial_data", "kind", str, required=True).strip(),
        height=_get(parser, "initial_data", "height", float, default=1.0),
        center=_get(parser, "initial_data", "center", float, default=grid.length / 2),
        radius=_get(parser, "initial_data", "radius", float, default=grid.length / 4),
        path=_get(parser, "initial_data", "path", str),
        floor=_get(parser, "initial_data", "floor", str, default="auto").strip(),
    )
    if initial.kind in ("bump", "cos_squared_bump"):
        if initial.center - initial.radius < 0 or initial.center + initial.radius > grid.length:
            raise ConfigError(
                f"[initial_data] bump support [{initial.center - initial.radius:.6g}, "
                f"{initial.center + initial.radius:.6g}] exceeds the domain "
                f"[0, {grid.length:.6g}]"
            )

    # ensemble ----------------------------------------------------------------
    ensemble = None
    if parser.has_section("ensemble"):
        try:
            ensemble = EnsembleConfig(
                n_samples=_get(parser, "ensemble", "n_samples", int, required=True),
                base_seed=_get(parser, "ensemble", "base_seed", int, required=True),
                q_list=_get(parser, "ensemble", "q_list", _floats, default=(1.0,)),
                phi_modes=_get(parser, "ensemble", "phi_modes", _ints, default=()),
            )
        except ConfigError as exc:
            raise ConfigError(f"[ensemble] {exc}") from exc
        for mode in ensemble.phi_modes:
            if 2 * abs(mode) >= grid.nyquist:
                raise ConfigError(
                    f"[ensemble] phi mode {mode} beyond resolution for N={grid.n_cells}"
                )

    # output ----------------------------------------------------------------
    output = OutputConfig(
        directory=_get(parser, "output", "directory", str, default="out")
        if parser.has_section("output")
        else "out",
        records=_get(parser, "output", "records", int, default=100)
        if parser.has_section("output")
        else 100,
        formats=tuple(
            _get(parser, "output", "formats", str, default="csv").split()
        )
        if parser.has_section("output")
        else ("csv",),
        snapshots=_get(parser, "output", "snapshots", _bool, default=False)
        if parser.has_section("output")
        else False,
    )

    return RunConfig(
        grid=grid,
        noise=spec,
        eps=eps,
        eps_list=eps_list,
        p=p,
        theta=theta,
        alpha=alpha,
        stepper=stepper,
        horizon=horizon,
        initial=initial,
        ensemble=ensemble,
        output=output,
    )


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def serialize_config(rc: RunConfig) -> str:
    """Write the normalized form of a configuration (stable key order)."""
    out = io.StringIO()

    def section(name, pairs):
        out.write(f"[{name}]\n")
        for key, value in pairs:
            if value is None:
                continue
            out.write(f"{key} = {value}\n")
        out.write("\n")

    section("grid", [("l", _fmt(rc.grid.length)), ("n", rc.grid.n_cells)])
    spec = rc.noise
    if spec.decay_law == "power":
        section(
            "noise",
            [
                ("law", "power"),
                ("amplitude", _fmt(spec.amplitude)),
                ("s", _fmt(spec.s)),
                ("k_max", spec.k_max),
            ],
        )
    else:
        section(
            "noise",
            [
                ("law", "explicit"),
                ("lambdas", " ".join(_fmt(v) for v in spec.lam)),
            ],
        )
    model_pairs = [("p", _fmt(rc.p)), ("theta", _fmt(rc.theta)), ("alpha", _fmt(rc.alpha))]
    if rc.eps is not None:
        model_pairs.insert(0, ("eps", _fmt(rc.eps)))
    if rc.eps_list is not None:
        model_pairs.append(("eps_list", " ".join(_fmt(v) for v in rc.eps_list)))
    section("model", model_pairs)
    section(
        "stepper",
        [
            ("dt_init", _fmt(rc.stepper.dt_init)),
            ("dt_min", _fmt(rc.stepper.dt_min)),
            ("sigma", _fmt(rc.stepper.sigma)),
            ("scheme", rc.stepper.scheme),
            ("newton_tol", _fmt(rc.stepper.newton_tol)),
            ("newton_max_iter", rc.stepper.newton_max_iter),
            ("horizon", _fmt(rc.horizon)),
        ],
    )
    section(
        "initial_data",
        [
            ("kind", rc.initial.kind),
            ("height", _fmt(rc.initial.height)),
            ("center", _fmt(rc.initial.center)),
            ("radius", _fmt(rc.initial.radius)),
            ("path", rc.initial.path),
            ("floor", rc.initial.floor),
        ],
    )
    if rc.ensemble is not None:
        section(
            "ensemble",
            [
                ("n_samples", rc.ensemble.n_samples),
                ("base_seed", rc.ensemble.base_seed),
                ("q_list", " ".join(_fmt(q) for q in rc.ensemble.q_list)),
                (
                    "phi_modes",
                    " ".join(str(m) for m in rc.ensemble.phi_modes)
                    if rc.ensemble.phi_modes
                    else None,
                ),
            ],
        )
    section(
        "output",
        [
            ("directory", rc.output.directory),
            ("records", rc.output.records),
            ("formats", " ".join(rc.output.formats)),
            ("snapshots", _fmt(rc.output.snapshots)),
        ],
    )
    return out.getvalue()


def build_initial(initial: InitialData, params: ModelParams, grid: Grid) -> np.ndarray:
    """Construct the initial field and apply the eps^theta shift when due.

    * constant: u = height
    * cos_squared_bump: height * cos^2(pi (x-c) / (2 r)) on |x-c| <= r, else 0
      (compactly supported, zero contact angle at the support edge)
    * bump: parabolic cap height * max(0, 1 - ((x-c)/r)^2) (compactly
      supported, nonzero contact angle; for contrast experiments)
    * file: whitespace-separated node values of length N
    """
    x = grid.x
    if initial.kind == "constant":
        u = np.full(grid.n_cells, initial.height)
    elif initial.kind == "cos_squared_bump":
        d = x - initial.center
        u = np.where(
            np.abs(d) <= initial.radius,
            initial.height * np.cos(np.pi * d / (2.0 * initial.radius)) ** 2,
            0.0,
        )
    elif initial.kind == "bump":
        d = (x - initial.center) / initial.radius
        u = initial.height * np.maximum(0.0, 1.0 - d * d)
    elif initial.kind == "file":
        u = np.loadtxt(initial.path, dtype=float).ravel()
        if u.size != grid.n_cells:
            raise ConfigError(
                f"initial data file holds {u.size} values, expected {grid.n_cells}"
            )
    else:  # pragma: no cover - guarded at construction
        raise ConfigError(f"unknown initial data kind {initial.kind!r}")

    if np.any(u < 0.0) or not np.all(np.isfinite(u)):
        raise ConfigError("(H2) requires nonnegative finite initial data")
    if initial.floor == "auto" and params.eps > 0.0:
        u = u + params.floor
    return grid.field(u)
