"""Delimited and binary output formats.

All floating-point values are serialized with 17 significant digits so text
output round-trips doubles exactly.  Field snapshots use a small little-endian
binary layout: magic "STFE1", version u32, N u32, L f64, then one f64 time
plus N f64 node values per snapshot.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .diagnostics import Trajectory
from .grid import Grid
from .montecarlo import EnsembleStats, SweepReport

__all__ = [
    "TRAJECTORY_COLUMNS",
    "ENSEMBLE_COLUMNS",
    "MARTINGALE_COLUMNS",
    "fmt_float",
    "write_trajectory_csv",
    "write_ensemble_csv",
    "write_martingale_csv",
    "write_sweep_csv",
    "write_sweep_summary_csv",
    "write_snapshots",
    "read_snapshots",
]

TRAJECTORY_COLUMNS = [
    "t",
    "mass",
    "e1",
    "e2",
    "g_alpha",
    "energy",
    "min_u",
    "diss_pressure",
    "diss_quartic",
    "diss_hessian",
    "diss_potential",
    "stopped_flag",
    "rejections",
]

ENSEMBLE_COLUMNS = ["eps", "q", "statistic", "value", "se", "n_samples", "n_failed"]

MARTINGALE_COLUMNS = [
    "eps",
    "phi_mode",
    "t",
    "mean_m",
    "se_m",
    "mean_m2",
    "mean_qv_int",
    "ratio",
]

SNAPSHOT_MAGIC = b"STFE1"
SNAPSHOT_VERSION = 1


def fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for r in traj.records:
            f = r.functionals
            writer.writerow(
                [
                    fmt_float(r.t),
                    fmt_float(f.mass),
                    fmt_float(f.e1),
                    fmt_float(f.e2),
                    fmt_float(f.g_alpha),
                    fmt_float(f.energy),
                    fmt_float(f.min_u),
                    fmt_float(r.diss_pressure),
                    fmt_float(r.diss_quartic),
                    fmt_float(r.diss_hessian),
                    fmt_float(r.diss_potential),
                    1 if r.stopped else 0,
                    r.rejections,
                ]
            )


def _stats_rows(stats: EnsembleStats):
    for (q, statistic), (value, se) in sorted(stats.moments.items()):
        yield [
            fmt_float(stats.eps),
            fmt_float(q),
            statistic,
            fmt_float(value),
            fmt_float(se),
            stats.n_samples,
            stats.n_failed,
        ]


def write_ensemble_csv(path, stats_list) -> None:
    """One row per (eps, q, statistic); accepts one or many EnsembleStats."""
    if isinstance(stats_list, EnsembleStats):
        stats_list = [stats_list]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENSEMBLE_COLUMNS)
        for stats in stats_list:
            for row in _stats_rows(stats):
                writer.writerow(row)


def write_martingale_csv(path, stats_list) -> None:
    if isinstance(stats_list, EnsembleStats):
        stats_list = [stats_list]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MARTINGALE_COLUMNS)
        for stats in stats_list:
            for row in stats.martingale:
                writer.writerow(
                    [
                        fmt_float(stats.eps),
                        row.phi_mode,
                        fmt_float(row.t),
                        fmt_float(row.mean_m),
                        fmt_float(row.se_m),
                        fmt_float(row.mean_m2),
                        fmt_float(row.mean_qv_int),
                        fmt_float(row.ratio),
                    ]
                )


def write_sweep_csv(path, report: SweepReport) -> None:
    write_ensemble_csv(path, [report.stats[eps] for eps in report.eps_list])


def write_sweep_summary_csv(path, report: SweepReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q", "statistic", "min", "max", "ratio", "flagged"])
        for (q, statistic), r in sorted(report.ratios.items()):
            writer.writerow(
                [
                    fmt_float(q),
                    statistic,
                    fmt_float(r.min_value),
                    fmt_float(r.max_value),
                    fmt_float(r.ratio),
                    1 if r.flagged else 0,
                ]
            )


def write_snapshots(path, grid: Grid, snapshots) -> None:
    """Binary snapshot stream; see the module docstring for the layout."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<II", SNAPSHOT_VERSION, grid.n_cells))
        fh.write(struct.pack("<d", grid.length))
        for t, u in snapshots:
            fh.write(struct.pack("<d", float(t)))
            fh.write(np.asarray(u, dtype="<f8").tobytes())


def read_snapshots(path) -> tuple[Grid, list[tuple[float, np.ndarray]]]:
    raw = Path(path).read_bytes()
    if raw[: len(SNAPSHOT_MAGIC)] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file (bad magic)")
    off = len(SNAPSHOT_MAGIC)
    version, n = struct.unpack_from("<II", raw, off)
    off += 8
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    (length,) = struct.unpack_from("<d", raw, off)
    off += 8
    grid = Grid(length=length, n_cells=n)
    snapshots = []
    frame = 8 + 8 * n
    while off + frame <= len(raw):
        (t,) = struct.unpack_from("<d", raw, off)
        u = np.frombuffer(raw, dtype="<f8", count=n, offset=off + 8).copy()
        snapshots.append((t, u))
        off += frame
    if off != len(raw):
        raise ValueError(f"{path}: truncated snapshot stream")
    return grid, snapshots
