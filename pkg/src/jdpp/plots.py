"""Offscreen figure rendering for experiment reports.

Renders per-size normality panels (standardized-sample histogram against the
standard normal density, and empirical CDF against the normal CDF) plus one
grid-wide normalized-cumulant decay panel.  Files only — no interactive
backends are touched.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import pyplot as plt

_DPI = 130


def _normal_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _normal_cdf(x: np.ndarray) -> np.ndarray:
    root2 = math.sqrt(2.0)
    return np.array([0.5 * (1.0 + math.erf(v / root2)) for v in x])


def _size_label(L: float) -> str:
    return str(int(L)) if float(L).is_integer() else repr(float(L))


def render_normality_panel(row, path: str) -> None:
    """Histogram + CDF comparison for one report row."""
    fig, (ax_hist, ax_cdf) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    samples = np.asarray(row.standardized)
    grid = np.linspace(-4.5, 4.5, 361)

    ax_hist.hist(
        samples, bins=80, range=(-4.5, 4.5), density=True,
        color="#7aa6c2", edgecolor="none", label="standardized samples",
    )
    ax_hist.plot(grid, _normal_pdf(grid), "k-", lw=1.4, label="standard normal")
    ax_hist.set_xlabel("standardized statistic")
    ax_hist.set_ylabel("density")
    ax_hist.legend(frameon=False, fontsize=8)

    sorted_samples = np.sort(samples)
    ecdf = np.arange(1, sorted_samples.shape[0] + 1) / sorted_samples.shape[0]
    ax_cdf.plot(sorted_samples, ecdf, color="#7aa6c2", lw=1.2, label="empirical CDF")
    ax_cdf.plot(grid, _normal_cdf(grid), "k--", lw=1.0, label="normal CDF")
    ax_cdf.set_xlim(-4.5, 4.5)
    ax_cdf.set_xlabel("standardized statistic")
    ax_cdf.set_ylabel("CDF")
    ax_cdf.legend(frameon=False, fontsize=8, loc="lower right")
    ax_cdf.text(
        0.03, 0.95,
        f"KS D = {row.ks_statistic:.4f}\np = {row.ks_pvalue:.3f}",
        transform=ax_cdf.transAxes, va="top", fontsize=8,
    )

    fig.suptitle(f"L = {_size_label(row.L)} (N = {row.N}, {samples.shape[0]} replicas)")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_cumulant_decay(rows, path: str) -> None:
    """Log-log decay of the normalized third/fourth cumulants along the grid."""
    sizes = np.array([row.L for row in rows], dtype=np.float64)
    c3 = np.abs([row.c3_normalized for row in rows])
    c4 = np.abs([row.c4_normalized for row in rows])
    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    ax.loglog(sizes, c3, "o-", color="#355e8d", label=r"$|C_3| / \mathrm{Var}^{3/2}$")
    ax.loglog(sizes, c4, "s-", color="#b0563b", label=r"$|C_4| / \mathrm{Var}^{2}$")
    if np.all(c3 > 0):
        ref = c3[0] * (sizes / sizes[0]) ** -0.5
        ax.loglog(sizes, ref, ":", color="#355e8d", alpha=0.6, label=r"$L^{-1/2}$ reference")
    if np.all(c4 > 0):
        ref = c4[0] * (sizes / sizes[0]) ** -1.0
        ax.loglog(sizes, ref, ":", color="#b0563b", alpha=0.6, label=r"$L^{-1}$ reference")
    ax.set_xlabel("L")
    ax.set_ylabel("normalized cumulant magnitude")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("normalized cumulant decay")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_report_figures(report, output_dir) -> list:
    """Render all figures for a report; returns the written paths."""
    os.makedirs(output_dir, exist_ok=True)
    written = []
    for row in report.rows:
        path = os.path.join(output_dir, f"figure_L{_size_label(row.L)}.png")
        render_normality_panel(row, path)
        written.append(path)
    path = os.path.join(output_dir, "figure_cumulant_decay.png")
    render_cumulant_decay(report.rows, path)
    written.append(path)
    return written
