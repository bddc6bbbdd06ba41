"""SVG figures for cascades, sweeps and free boundary cross-sections.

Output is byte-stable for fixed input: fixed hash salt, no date metadata.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

log = logging.getLogger(__name__)

STYLE = {
    "svg.hashsalt": "fblab",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (4.5, 3.5),
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "fblab"})
    plt.close(fig)
    return str(path)


def fitted_slope(radii, widths):
    """Least-squares slope of log width against log radius, positive widths only."""
    r = np.asarray(radii, float)
    w = np.asarray(widths, float)
    keep = (w > 0) & (r > 0)
    if np.count_nonzero(keep) < 2:
        return None
    slope, _ = np.polyfit(np.log(r[keep]), np.log(w[keep]), 1)
    return float(slope)


def plot_cascade(cascade, path):
    """Band width against radius on log-log axes; returns (path, fitted slope)."""
    bands = cascade["bands"]
    radii = [b["r"] for b in bands]
    widths = [b["width"] for b in bands]
    slope = fitted_slope(radii, widths)
    alpha = cascade.get("alpha_estimate")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        pos = [(r, w) for r, w in zip(radii, widths) if w > 0]
        zero = [r for r, w in zip(radii, widths) if w <= 0]
        if pos:
            ax.loglog(*zip(*pos), "o-", color="C0", label="band width")
        if zero:
            # degenerate bands have no log; mark them on the lower axis
            floor = min([w for _, w in pos], default=1e-16) * 0.1 if pos else 1e-16
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.plot(zero, [floor] * len(zero), "v", color="C3", label="width 0")
        text = "alpha = inf (degenerate)" if alpha == "inf" or (
            isinstance(alpha, float) and math.isinf(alpha)
        ) else ("alpha = n/a" if alpha is None else f"alpha = {alpha:.4f}")
        if slope is not None:
            text += f"\nfitted slope = {slope:.4f}"
        ax.text(0.04, 0.96, text, transform=ax.transAxes, va="top")
        ax.set_xlabel("radius")
        ax.set_ylabel("b - a")
        ax.legend(loc="lower right")
        return _save(fig, path), slope


def plot_sweep(rows, path):
    """epsilon_new / eps against r for each eps of an improvement sweep."""
    rows = [r for r in rows if isinstance(r.get("epsilon_new"), float)]
    if not rows:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, eps in enumerate(sorted({r["eps"] for r in rows})):
            sel = sorted((r["r"], r["epsilon_new"]) for r in rows if r["eps"] == eps)
            xs, ys = zip(*sel)
            ax.plot(xs, ys, "o-", color=f"C{i % 10}", label=f"eps = {eps:g}")
            ax.axhline(eps / 2, color=f"C{i % 10}", ls=":", lw=0.8)
        ax.set_xscale("log")
        ax.set_xlabel("r")
        ax.set_ylabel("epsilon_new")
        ax.legend(loc="best")
        return _save(fig, path)


def plot_cross_section(U, path, zero_tol=None, plane=None):
    """Zero level of |U| against the plane ``<x, e> = 0`` in the (x_1, x_n) slice."""
    spec = U.spec
    mag = np.sqrt(np.sum(U.data**2, axis=0))
    if zero_tol is None:
        zero_tol = 1e-12 * max(float(mag.max(initial=0.0)), 1e-300)
    if spec.dim_n == 3:
        mid = spec.shape[1] // 2
        mag = mag[:, mid, :]
    ax1, axn = spec.axes()[0], spec.axes()[-1]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        t = np.linspace(0, 2 * np.pi, 361)
        ax.plot(np.cos(t), np.sin(t), color="0.6", lw=0.8)
        if (mag > zero_tol).any() and (mag <= zero_tol).any():
            ax.contour(ax1, axn, mag.T, levels=[zero_tol], colors="C0", linewidths=1.2)
        e = np.zeros(spec.dim_n) if plane is None else np.asarray(plane, float)
        if plane is None:
            e[-1] = 1.0
        # trace of the plane in the slice: e_1 x_1 + e_n x_n = 0
        if abs(e[-1]) > 1e-12:
            ax.plot([-1, 1], [e[0] / e[-1], -e[0] / e[-1]], "--", color="C3", lw=0.8)
        ax.set_xlim(-1.05, 1.05)
        ax.set_ylim(-1.05, 1.05)
        ax.set_aspect("equal")
        ax.set_xlabel("x_1")
        ax.set_ylabel("x_n")
        return _save(fig, path)


def emit_plots(report, out_dir, field=None, zero_tol=None):
    """Render every plottable part of ``report``; returns (files, fitted cascade slope).

    Cascades give band-width plots, improvement sweeps an epsilon_new plot,
    and a field (when passed) the free boundary cross-section.  Nothing to
    plot means no files.
    """
    out = Path(out_dir)
    files, slope = [], None
    cascades = report.get("results", {}).get("cascades", [])
    for i, cas in enumerate(cascades):
        if len(cas.get("bands", [])) < 1:
            continue
        name = "cascade.svg" if len(cascades) == 1 else f"cascade_{i}.svg"
        path, s = plot_cascade(cas, out / name)
        files.append(path)
        slope = s if slope is None else slope
    rows = report.get("results", {}).get("sweep", [])
    if rows:
        p = plot_sweep(rows, out / "iof_sweep.svg")
        if p:
            files.append(p)
    if field is not None:
        plane = report.get("results", {}).get("plane_normal")
        files.append(plot_cross_section(field, out / "free_boundary.svg", zero_tol, plane))
    if not files:
        log.info("no plottable data in report; no figures written")
    return files, slope
