"""Command-line interface.

Subcommands::

    simulate <config>         one trajectory -> trajectory.csv (+ snapshots.bin)
    ensemble <config>         moment estimates -> ensemble.csv (+ martingale.csv)
    verify-noise <config>     closed-form basis identity residual table
    dispersion-test <config>  linear mode-decay rates vs analytic values
    contact-angle <config|snapshots.bin>  touchdown exponent fits
    eps-sweep <config>        regularization sweep -> sweep_moments/summary.csv

With ``png`` in the output formats each report also renders a figure next to
its delimited output.  STFE_THREADS caps the ensemble worker count.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_initial, load_config, serialize_config
from .diagnostics import touchdown_exponent
from .errors import StfeError
from .grid import Grid
from .model import ModelParams
from .montecarlo import default_workers, eps_sweep, run_ensemble
from .noise import NoiseSpec, basis_eval, verify_identities
from .output import (
    fmt_float,
    read_snapshots,
    write_ensemble_csv,
    write_martingale_csv,
    write_snapshots,
    write_sweep_csv,
    write_sweep_summary_csv,
    write_trajectory_csv,
)
from .stepper import StepperConfig, run

IDENTITY_TOL = 1e-10


def _outdir(rc: RunConfig) -> Path:
    out = Path(rc.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_runinfo(out: Path, rc: RunConfig, extra: dict) -> None:
    lines = [serialize_config(rc), "[derived]"]
    for key, value in extra.items():
        lines.append(f"{key} = {value}")
    lines.append(f"version = {__version__}")
    lines.append("stop_detection = post_step")
    (out / "runinfo.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_simulate(args) -> int:
    rc = load_config(args.config)
    params = rc.model_params()
    out = _outdir(rc)
    seed = args.seed
    if seed is None:
        seed = rc.ensemble.base_seed if rc.ensemble is not None else 0
    u0 = build_initial(rc.initial, params, rc.grid)
    want_snapshots = rc.output.snapshots or "png" in rc.output.formats
    traj = run(
        u0,
        rc.horizon,
        params,
        rc.stepper,
        rc.noise,
        rc.grid,
        seed=seed,
        n_records=rc.output.records,
        store_fields=want_snapshots,
    )
    write_trajectory_csv(out / "trajectory.csv", traj)
    if rc.output.snapshots:
        write_snapshots(out / "snapshots.bin", rc.grid, traj.snapshots)
    if "png" in rc.output.formats:
        from .plotting import plot_trajectory

        plot_trajectory(out / "trajectory.png", traj)
    _write_runinfo(out, rc, {"seed": seed, "c_strat": fmt_float(params.c_strat)})
    first, last = traj.records[0], traj.records[-1]
    drift = abs(last.functionals.mass - first.functionals.mass)
    rel = drift / abs(first.functionals.mass) if first.functionals.mass else drift
    print(f"status: {traj.status}")
    print(f"records: {len(traj.records)} -> {out / 'trajectory.csv'}")
    print(f"relative mass drift: {rel:.3e}")
    print(f"final min u: {fmt_float(last.functionals.min_u)}")
    if traj.stopped_at is not None:
        print(f"frozen at t = {fmt_float(traj.stopped_at)}")
    return 0


def _cmd_ensemble(args) -> int:
    rc = load_config(args.config)
    params = rc.model_params()
    ens = rc.require_ensemble()
    out = _outdir(rc)
    u0 = build_initial(rc.initial, params, rc.grid)
    stats = run_ensemble(
        ens,
        params,
        rc.stepper,
        rc.noise,
        rc.grid,
        u0,
        rc.horizon,
        n_records=rc.output.records,
        workers=args.workers,
    )
    write_ensemble_csv(out / "ensemble.csv", stats)
    if ens.phi_modes:
        write_martingale_csv(out / "martingale.csv", stats)
    if "png" in rc.output.formats:
        from .plotting import plot_ensemble

        plot_ensemble(out / "ensemble.png", stats)
    _write_runinfo(out, rc, {"c_strat": fmt_float(params.c_strat)})
    print(
        f"samples: {stats.n_samples}  failed: {stats.n_failed}  "
        f"rejections: {stats.total_rejections}  "
        f"invalid: {'yes' if stats.invalid else 'no'}"
    )
    print(f"wrote {out / 'ensemble.csv'}")
    return 0


def _cmd_verify_noise(args) -> int:
    rc = load_config(args.config)
    checks = verify_identities(rc.noise, rc.grid)
    width = max(len(c.description) for c in checks)
    print(f"{'identity':<10} {'description':<{width}} {'max residual':>14} "
          f"{'normalized':>14} status")
    worst = 0.0
    for c in checks:
        worst = max(worst, c.normalized)
        status = "pass" if c.passed(IDENTITY_TOL) else "FAIL"
        print(
            f"{c.name:<10} {c.description:<{width}} {c.max_residual:14.3e} "
            f"{c.normalized:14.3e} {status}"
        )
    print(f"tolerance: {IDENTITY_TOL:g}")
    return 0 if worst <= IDENTITY_TOL else 1


def _dispersion_rows(rc: RunConfig, modes) -> list[tuple[int, float, float, float]]:
    # Linear decay test: zero noise, no potential, small single-mode ripple.
    silent = NoiseSpec.silent()
    params = ModelParams(
        eps=0.0, p=rc.p, theta=rc.theta, alpha=rc.alpha, c_strat=0.0
    )
    height = rc.initial.height if rc.initial.kind == "constant" else 1.0
    delta = 1e-4 * height
    rows = []
    for k in modes:
        g_k = basis_eval(k, rc.grid)
        u0 = height + delta * g_k
        traj = run(
            u0,
            rc.horizon,
            params,
            rc.stepper,
            silent,
            rc.grid,
            seed=0,
            n_records=2,
            store_fields=True,
        )
        amp0 = rc.grid.inner(traj.snapshots[0][1], g_k)
        amp1 = rc.grid.inner(traj.snapshots[-1][1], g_k)
        t1 = traj.snapshots[-1][0]
        measured = -np.log(amp1 / amp0) / t1
        analytic = height**2 * (2.0 * np.pi * k / rc.grid.length) ** 4
        rows.append((k, float(measured), float(analytic),
                     float((measured - analytic) / analytic)))
    return rows


def _cmd_dispersion(args) -> int:
    rc = load_config(args.config)
    modes = args.modes or [1, 2, 3]
    rows = _dispersion_rows(rc, modes)
    out = _outdir(rc)
    with open(out / "dispersion.csv", "w", newline="") as fh:
        fh.write("mode,measured_rate,analytic_rate,rel_error\n")
        for k, measured, analytic, rel in rows:
            fh.write(
                f"{k},{fmt_float(measured)},{fmt_float(analytic)},{fmt_float(rel)}\n"
            )
    if "png" in rc.output.formats:
        from .plotting import plot_dispersion

        plot_dispersion(out / "dispersion.png", rows)
    print(f"{'mode':>4} {'measured':>14} {'analytic':>14} {'rel error':>12}")
    for k, measured, analytic, rel in rows:
        print(f"{k:>4} {measured:14.6e} {analytic:14.6e} {rel:12.3e}")
    return 0


def _cmd_contact_angle(args) -> int:
    target = Path(args.target)
    if target.suffix == ".bin":
        grid, snapshots = read_snapshots(target)
        t, u = snapshots[-1]
        threshold = args.threshold
        if threshold is None:
            threshold = 4.0 * float(np.min(u))
        out = target.parent
        formats = ("csv",)
    else:
        rc = load_config(target)
        params = rc.model_params()
        grid = rc.grid
        u0 = build_initial(rc.initial, params, rc.grid)
        seed = rc.ensemble.base_seed if rc.ensemble is not None else 0
        traj = run(
            u0, rc.horizon, params, rc.stepper, rc.noise, rc.grid,
            seed=seed, n_records=rc.output.records, store_fields=True,
        )
        t, u = traj.snapshots[-1]
        threshold = args.threshold
        if threshold is None:
            threshold = 2.0 * params.floor if params.eps > 0.0 else 2.0 * float(np.min(u))
        out = _outdir(rc)
        formats = rc.output.formats
    if not threshold > 0:
        print("error: threshold must be positive (pass --threshold)", file=sys.stderr)
        return 2
    fits = touchdown_exponent(u, grid, threshold)
    with open(out / "contact_angle.csv", "w", newline="") as fh:
        fh.write("location,exponent,r_squared,n_points,min_value\n")
        for f in fits:
            fh.write(
                f"{fmt_float(f.location)},{fmt_float(f.exponent)},"
                f"{fmt_float(f.r_squared)},{f.n_points},{fmt_float(f.min_value)}\n"
            )
    if "png" in formats:
        from .plotting import plot_contact_angle

        plot_contact_angle(out / "contact_angle.png", grid, u, fits, threshold)
    print(f"state at t = {fmt_float(t)}; threshold = {fmt_float(threshold)}")
    if not fits:
        print("no minima below threshold")
    for f in fits:
        print(
            f"x0 = {f.location:.6g}  exponent = {f.exponent:.4f}  "
            f"R^2 = {f.r_squared:.4f}  points = {f.n_points}"
        )
    return 0


def _cmd_eps_sweep(args) -> int:
    rc = load_config(args.config)
    if rc.eps_list is None:
        print("error: eps-sweep needs eps_list in [model]", file=sys.stderr)
        return 2
    ens = rc.require_ensemble()
    params = rc.model_params(eps=rc.eps_list[0])
    out = _outdir(rc)

    def u0_factory(p: ModelParams):
        return build_initial(rc.initial, p, rc.grid)

    report = eps_sweep(
        ens,
        params,
        rc.stepper,
        rc.noise,
        rc.grid,
        u0_factory,
        rc.horizon,
        rc.eps_list,
        n_records=rc.output.records,
        workers=args.workers,
    )
    write_sweep_csv(out / "sweep_moments.csv", report)
    write_sweep_summary_csv(out / "sweep_summary.csv", report)
    if any(report.stats[e].martingale for e in report.eps_list):
        write_martingale_csv(
            out / "sweep_martingale.csv",
            [report.stats[e] for e in report.eps_list],
        )
    if "png" in rc.output.formats:
        from .plotting import plot_sweep

        plot_sweep(out / "sweep.png", report)
    _write_runinfo(out, rc, {})
    flagged = report.flagged()
    print(f"eps values: {', '.join(fmt_float(e) for e in report.eps_list)}")
    for (q, stat), ratio in sorted(report.ratios.items()):
        mark = "  <-- exceeds factor 4" if ratio.flagged else ""
        print(f"q={q:g} {stat:<20} max/min = {ratio.ratio:8.3f}{mark}")
    q0 = min(ens.q_list)
    for stat in ("init_e2", "sup_e2"):
        vals = [report.stats[e].moments[(q0, stat)][0] for e in report.eps_list]
        print(f"{stat} across sweep: {', '.join(f'{v:.4e}' for v in vals)}")
    if flagged:
        print(f"flagged statistics: {len(flagged)}")
    print(f"wrote {out / 'sweep_moments.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stfe",
        description="Stochastic thin-film equation simulator and verification harness",
    )
    parser.add_argument("--version", action="version", version=f"stfe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a single trajectory")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ensemble", help="run a Monte Carlo ensemble")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default: STFE_THREADS or {default_workers()})")
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("verify-noise", help="check the closed-form basis identities")
    p.add_argument("config")
    p.set_defaults(func=_cmd_verify_noise)

    p = sub.add_parser("dispersion-test", help="linear decay rates vs analytic values")
    p.add_argument("config")
    p.add_argument("--modes", type=int, nargs="+", default=None)
    p.set_defaults(func=_cmd_dispersion)

    p = sub.add_parser("contact-angle", help="touchdown exponent fits")
    p.add_argument("target", help="config file or snapshots .bin file")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=_cmd_contact_angle)

    p = sub.add_parser("eps-sweep", help="regularization sweep with shared seeds")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_eps_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StfeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
