"""Figure rendering for the report paths (written alongside the CSV output)."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import Trajectory
from .montecarlo import EnsembleStats, MOMENT_STATISTICS, SweepReport

__all__ = [
    "plot_trajectory",
    "plot_ensemble",
    "plot_sweep",
    "plot_contact_angle",
    "plot_dispersion",
]


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_trajectory(path, traj: Trajectory):
    t = traj.times
    recs = traj.records
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)

    ax = axes[0, 0]
    ax.plot(t, [r.functionals.mass for r in recs], label="mass")
    ax.plot(t, [r.functionals.min_u for r in recs], label="min u")
    ax.set_ylabel("mass / min u")
    ax.legend(fontsize=8)

    ax = axes[0, 1]
    for key, label in (("e1", "gradient"), ("e2", "potential"), ("energy", "total")):
        vals = [getattr(r.functionals, key) for r in recs]
        if all(math.isfinite(v) for v in vals):
            ax.plot(t, vals, label=label)
    ax.set_ylabel("energy")
    ax.set_yscale("log")
    ax.legend(fontsize=8)

    ax = axes[1, 0]
    ax.plot(t, [r.functionals.g_alpha for r in recs])
    ax.set_ylabel("alpha-entropy")
    ax.set_xlabel("t")

    ax = axes[1, 1]
    for key in ("diss_pressure", "diss_quartic", "diss_hessian", "diss_potential"):
        ax.plot(t, [getattr(r, key) for r in recs], label=key.replace("diss_", ""))
    ax.set_ylabel("dissipation rates")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_ensemble(path, stats: EnsembleStats):
    if stats.martingale:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
        modes = sorted({row.phi_mode for row in stats.martingale})
        for mode in modes:
            rows = [r for r in stats.martingale if r.phi_mode == mode]
            ts = [r.t for r in rows]
            ax1.errorbar(
                ts,
                [r.mean_m for r in rows],
                yerr=[3 * r.se_m for r in rows],
                label=f"mode {mode}",
            )
            ax2.plot(ts[1:], [r.ratio for r in rows[1:]], label=f"mode {mode}")
        ax1.axhline(0.0, color="k", lw=0.6)
        ax1.set_xlabel("t")
        ax1.set_ylabel("mean weak-form process (3 SE bars)")
        ax1.legend(fontsize=8)
        ax2.axhline(1.0, color="k", lw=0.6)
        ax2.set_xlabel("t")
        ax2.set_ylabel("mean M^2 / mean accumulated QV")
        ax2.legend(fontsize=8)
    else:
        fig, ax = plt.subplots(figsize=(7, 4))
        stats_items = [
            (stat, stats.moments[(stats.q_list[0], stat)])
            for stat in MOMENT_STATISTICS
        ]
        labels = [s for s, _ in stats_items]
        values = [v for _, (v, _) in stats_items]
        errs = [3 * se for _, (_, se) in stats_items]
        ax.bar(range(len(labels)), values, yerr=errs)
        ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel(f"mean (q={stats.q_list[0]:g})")
    return _finish(fig, path)


def plot_sweep(path, report: SweepReport):
    eps = np.asarray(report.eps_list)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    q0 = min(q for q, _ in report.ratios)
    for stat in MOMENT_STATISTICS:
        vals = [report.stats[e].moments[(q0, stat)][0] for e in report.eps_list]
        ax1.loglog(eps, vals, marker="o", label=stat)
    ax1.set_xlabel("eps")
    ax1.set_ylabel(f"ensemble mean (q={q0:g})")
    ax1.legend(fontsize=7)
    for stat in ("sup_e2", "init_e2"):
        vals = [report.stats[e].moments[(q0, stat)][0] for e in report.eps_list]
        ax2.loglog(eps, vals, marker="s", label=stat)
    ax2.set_xlabel("eps")
    ax2.set_ylabel("regularization diagnostics")
    ax2.legend(fontsize=8)
    return _finish(fig, path)


def plot_contact_angle(path, grid, u, fits, threshold):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(grid.x, u, lw=1.0)
    ax1.axhline(threshold, color="grey", lw=0.6, ls="--", label="threshold")
    for fit in fits:
        ax1.axvline(fit.location, color="tab:red", lw=0.6)
    ax1.set_xlabel("x")
    ax1.set_ylabel("u")
    ax1.legend(fontsize=8)
    for fit in fits:
        d = np.abs(grid.x - fit.location)
        d = np.minimum(d, grid.length - d)
        sel = (d > 0) & (u > fit.min_value) & (u <= 10 * threshold)
        ax2.loglog(d[sel], u[sel], ".", ms=3)
        dd = np.geomspace(max(d[sel].min(), 1e-6), d[sel].max(), 50)
        scale = np.median(u[sel] / d[sel] ** fit.exponent)
        ax2.loglog(
            dd, scale * dd**fit.exponent, lw=1.0,
            label=f"x0={fit.location:.3f}: slope {fit.exponent:.3f}",
        )
    ax2.set_xlabel("|x - x0|")
    ax2.set_ylabel("u")
    if fits:
        ax2.legend(fontsize=7)
    return _finish(fig, path)


def plot_dispersion(path, rows):
    """rows: (mode, measured_rate, analytic_rate, rel_error)."""
    modes = [r[0] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.semilogy(modes, [r[1] for r in rows], "o", label="measured")
    ax1.semilogy(modes, [r[2] for r in rows], "x", label="analytic")
    ax1.set_xlabel("mode")
    ax1.set_ylabel("decay rate")
    ax1.legend(fontsize=8)
    ax2.semilogy(modes, [abs(r[3]) for r in rows], "o")
    ax2.set_xlabel("mode")
    ax2.set_ylabel("relative error")
    return _finish(fig, path)
