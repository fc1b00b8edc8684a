"""Plot-ready data files and static SVG line plots.

Data files are whitespace-separated columns with a ``#`` header, readable by
gnuplot (``plot 'dist.dat' using 1:2 with lines``) or ``numpy.loadtxt``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import IphsModel, distance_to_equilibria
from .sim import Trajectory


def _write_columns(path: Path, header: str, *cols) -> Path:
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=header)
    return path


def control_steps(traj: Trajectory):
    """Step-shaped ``(t, u)`` polyline for a zero-order-hold control."""
    if traj.hold != "zoh":
        return traj.t, traj.u[:, 0]
    t = np.repeat(traj.t, 2)[1:-1]
    u = np.repeat(traj.u[:, 0], 2)
    return t, u


def write_plot_data(model: IphsModel, traj: Trajectory, directory, stem: str = "") -> list:
    """Write distance, control and phase-plane data for one trajectory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pre = f"{stem}_" if stem else ""
    d = distance_to_equilibria(model, traj.x)
    ts, us = control_steps(traj)
    files = [
        _write_columns(directory / f"{pre}dist.dat", "t dist", traj.t, d),
        _write_columns(directory / f"{pre}control.dat", "t u", ts, us),
    ]
    if traj.n == 2:
        files.append(_write_columns(directory / f"{pre}phase.dat", "S1 S2", traj.x[:, 0], traj.x[:, 1]))
        lo = float(min(traj.x.min(), 0.0))
        hi = float(traj.x.max())
        files.append(_write_columns(directory / f"{pre}diagonal.dat", "S1 S2 (line S1 = S2)",
                                    np.array([lo, hi]), np.array([lo, hi])))
    return files


def write_svg(model: IphsModel, trajectories: dict, path) -> Path:
    """Three-panel SVG: distance, control and phase plane, one curve per label."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed salt: element ids in the SVG are otherwise random
    matplotlib.rcParams["svg.hashsalt"] = "iphs-opt"

    fig, axes = plt.subplots(1, 3, figsize=(13, 3.8))
    for label, traj in trajectories.items():
        axes[0].plot(traj.t, distance_to_equilibria(model, traj.x), label=label, lw=1)
        ts, us = control_steps(traj)
        axes[1].plot(ts, us, label=label, lw=1)
        if traj.n == 2:
            axes[2].plot(traj.x[:, 0], traj.x[:, 1], label=label, lw=1)
    if any(tr.n == 2 for tr in trajectories.values()):
        lim = axes[2].get_xlim()
        axes[2].plot(lim, lim, "k--", lw=0.7, label="S1 = S2")
    axes[0].set(xlabel="t", ylabel="dist(x, equilibria)")
    axes[1].set(xlabel="t", ylabel="u")
    axes[2].set(xlabel="S1", ylabel="S2")
    axes[2].legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    # no creation date so that repeated runs produce identical files
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
