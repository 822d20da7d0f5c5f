"""Figures for the CLI report: decay curve, gap clouds and bound tables.

Uses the Agg backend and an object-oriented figure API so plotting is safe
from worker threads and never opens a window.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

GOLDEN = (np.sqrt(5) - 1.0) / 2.0
WIDTH = 5.0

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
}


def _figure(ncols: int = 1, height_ratio: float = GOLDEN) -> tuple[Figure, np.ndarray]:
    import matplotlib

    matplotlib.rcParams.update(RC)
    fig = Figure(figsize=(WIDTH * ncols / max(1, ncols ** 0.5), WIDTH * height_ratio), dpi=150)
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, axes


def decay_figure(times, delta_A, envelope=None) -> Figure:
    fig, (ax,) = _figure()
    ax.plot(times, delta_A, label=r"$\Delta A(t)$")
    if envelope is not None:
        ax.plot(times, envelope, ls="--", label="Gaussian envelope")
    ax.axhline(0.0, color="0.6", lw=0.5)
    ax.set_xlabel("$t$")
    ax.set_ylabel(r"$\Delta A$")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def cloud_figure(snapshots) -> Figure:
    """One complex-plane panel per snapshot, on a shared scale."""
    fig, axes = _figure(len(snapshots), height_ratio=0.45)
    lim = max((float(np.max(np.abs(s.points))) for s in snapshots if s.points.size), default=1.0) or 1.0
    for ax, snap in zip(axes, snapshots):
        ax.scatter(snap.points.real, snap.points.imag, s=2, c=snap.grid, cmap="viridis")
        ax.set_xlim(-1.1 * lim, 1.1 * lim)
        ax.set_ylim(-1.1 * lim, 1.1 * lim)
        ax.set_aspect("equal")
        ax.set_title(f"t = {snap.t:g}")
        ax.set_xlabel("Re")
    axes[0].set_ylabel("Im")
    fig.tight_layout()
    return fig


def bounds_figure(reports) -> Figure:
    """lhs and rhs against ``T`` for every bound, log-log."""
    fig, (ax,) = _figure(height_ratio=0.8)
    names = sorted({r.bound_name for r in reports})
    for i, name in enumerate(names):
        rows = sorted((r for r in reports if r.bound_name == name), key=lambda r: r.inputs.get("T", 0.0))
        T = [r.inputs.get("T", np.nan) for r in rows]
        color = f"C{i % 10}"
        ax.plot(T, [r.rhs_bound for r in rows], color=color, ls="--")
        ax.plot(T, [max(r.lhs_measured, 1e-300) for r in rows], color=color, marker="o", label=name)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("$T$")
    ax.set_ylabel("measured (solid) / bound (dashed)")
    ax.legend(frameon=False, fontsize=6)
    fig.tight_layout()
    return fig
