"""Figures for the CLI report paths.

Uses ``matplotlib.figure.Figure`` directly, never pyplot, so nothing global
is touched and no display backend is needed. PNG output carries no
timestamp, so identical data gives identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.figure import Figure

from .rates import erasure_ts_closed_form

_META = {"Software": None}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, metadata=_META if path.suffix == ".png" else None)
    return path


def plot_rate_curve(rows: Sequence[tuple[float, float, float, float]], path) -> Path:
    """Empirical per-user rate with 3-sigma bars over the analytic curve.

    ``rows`` are ``(eps, empirical_rate, stderr, analytic_rate)``.
    """
    arr = np.asarray(rows, dtype=float).reshape(-1, 4)
    fig = Figure(figsize=(5.0, 3.6), layout="constrained")
    ax = fig.add_subplot()
    grid = np.linspace(0.0, 0.999, 200)
    ax.plot(grid, [erasure_ts_closed_form(e) for e in grid], color="0.3", lw=1.2,
            label=r"$(1-\epsilon^2)/(2+\epsilon)$")
    ax.errorbar(arr[:, 0], arr[:, 1], yerr=3 * arr[:, 2], fmt="o", ms=4, capsize=3,
                color="C3", label="simulated (3 s.e.)")
    ax.set_xlabel(r"erasure probability $\epsilon$")
    ax.set_ylabel("per-user rate (bits/slot)")
    ax.set_xlim(0, 1)
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_bounds(values: dict[str, float], path) -> Path:
    """Horizontal bar summary of inner and outer bounds for one channel."""
    labels = list(values)
    vals = np.array([values[k] for k in labels], dtype=float)
    fig = Figure(figsize=(5.2, 0.5 + 0.45 * len(labels)), layout="constrained")
    ax = fig.add_subplot()
    y = np.arange(len(labels))
    ax.barh(y, vals, color=[f"C{i}" for i in range(len(labels))], height=0.6)
    for yi, v in zip(y, vals):
        ax.text(v, yi, f" {v:.4f}", va="center", fontsize=8)
    ax.set_yticks(y, labels)
    ax.invert_yaxis()
    lo = max(0.0, float(vals.min()) - 0.05)
    ax.set_xlim(lo, float(vals.max()) + 0.03)
    ax.set_xlabel("symmetric rate (bits)")
    return _save(fig, path)


def plot_ts_landscape(ratio, path, n: int = 101) -> Path:
    """Heat map of ``ratio(px)`` over the 3-letter input simplex, px = (p0, p1, p2)."""
    g = np.linspace(0.0, 1.0, n)
    z = np.full((n, n), np.nan)
    for i, p0 in enumerate(g):
        for j, p2 in enumerate(g):
            if p0 + p2 <= 1.0 + 1e-12:
                px = np.array([p0, max(1.0 - p0 - p2, 0.0), min(p2, 1.0 - p0)])
                z[j, i] = ratio(px / px.sum())
    fig = Figure(figsize=(4.6, 3.8), layout="constrained")
    ax = fig.add_subplot()
    im = ax.imshow(z, origin="lower", extent=(0, 1, 0, 1), cmap="viridis", aspect="equal")
    k = np.unravel_index(np.nanargmax(z), z.shape)
    ax.plot(g[k[1]], g[k[0]], "w+", ms=10)
    ax.set_xlabel(r"$p_0$")
    ax.set_ylabel(r"$p_2$")
    fig.colorbar(im, ax=ax, label="time-sharing rate")
    return _save(fig, path)
