"""Static SVG figures for the CLI reports.

Figures are built on the Agg canvas (no display needed) with a fixed SVG
hash salt and no date stamp, so the same data always give the same bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .finestructure import LABELS  # noqa: E402

STYLE = {
    "svg.hashsalt": "pl6kit",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.2),
    "lines.linewidth": 1.2,
}
LEVEL_COLORS = dict(zip(LABELS, ("C0", "C1", "C2", "C3", "C4", "C5")))


def new_figure(xlabel, ylabel, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(constrained_layout=True)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return fig, ax


def save_svg(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def levels_figure(level_set):
    fig, ax = new_figure("", "energy (GHz)", "zero-strain levels")
    for i, lv in enumerate(level_set.levels):
        ax.hlines(lv.energy, i - 0.35, i + 0.35, color=LEVEL_COLORS[lv.label])
        ax.annotate(lv.label, (i, lv.energy), textcoords="offset points", xytext=(0, 3), ha="center")
    ax.set_xticks([])
    return fig


def sweep_figure(grid, branches, bands=None, points=None):
    """Level branches versus strain; optional quantile ``bands`` and data ``points``."""
    fig, ax = new_figure(r"$\delta_\perp$ (GHz)", "energy (GHz)")
    for lab in LABELS:
        ax.plot(grid, branches[lab], color=LEVEL_COLORS[lab], label=lab)
        if bands is not None:
            ax.fill_between(grid, bands[lab][0], bands[lab][-1], color=LEVEL_COLORS[lab], alpha=0.25, lw=0)
    if points is not None:
        ax.plot(points[0], points[1], "k.", ms=3)
    ax.legend(ncol=3, fontsize=7, frameon=False)
    return fig


def fit_figure(data, curve, xlabel, ylabel, logx=False, logy=False, n=400):
    """Data with error bars and a fitted curve evaluated on a dense grid."""
    fig, ax = new_figure(xlabel, ylabel)
    ax.errorbar(data.x, data.y, yerr=data.sigma if data.sigma_known else None, fmt=".", ms=3, lw=0.6, color="0.3")
    if logx and data.x[0] > 0:
        xs = np.geomspace(data.x[0], data.x[-1], n)
    else:
        xs = np.linspace(data.x[0], data.x[-1], n)
    ax.plot(xs, curve(xs), color="C3")
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    return fig


def traces_figure(series, xlabel, ylabel):
    """Overlay of ``{name: (t, y)}`` traces."""
    fig, ax = new_figure(xlabel, ylabel)
    for name, (t, y) in series.items():
        ax.plot(t, y, label=name)
    ax.legend(frameon=False, fontsize=7)
    return fig
