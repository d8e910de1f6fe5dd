"""Figures written next to the CSV/JSON outputs of the command line.

matplotlib is imported lazily so the numerical core never needs it.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(
        {
            "font.size": 10,
            "axes.labelsize": 10,
            "legend.fontsize": 8,
            "xtick.labelsize": 8,
            "ytick.labelsize": 8,
            "axes.spines.top": False,
            "axes.spines.right": False,
        }
    )
    return plt


def new_figure(width=6.0, height=None, ncols=1):
    plt = _pyplot()
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    height = height or width * golden / max(1, ncols - 0.5 * (ncols > 1))
    fig, axes = plt.subplots(1, ncols, figsize=(width, height))
    return fig, axes


def save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    _pyplot().close(fig)
    return path


def plot_spectrum(s, path, n_show=6):
    """Eigenvalue decay (log scale) and the leading eigenfunctions."""
    fig, (ax_l, ax_f) = new_figure(9.0, ncols=2)
    k = np.arange(1, len(s) + 1)
    ax_l.semilogy(k, s.lambdas, "o-", ms=3)
    ax_l.set_xlabel("n")
    ax_l.set_ylabel(r"$\lambda_n$")
    for j in range(min(n_show, len(s))):
        ax_f.plot(s.grid.nodes, s.values[j], lw=1, label=f"$f_{{{j + 1}}}$")
    ax_f.set_xlabel("x")
    ax_f.legend(frameon=False, ncol=2)
    return save(fig, path)


def plot_vn(vseq, path, rows=None):
    fig, ax = new_figure()
    n_total = len(vseq)
    rows = rows or sorted({1, max(1, n_total // 4), max(1, n_total // 2), n_total})
    for n in rows:
        ax.plot(vseq.nodes, vseq[n], lw=1, label=f"$v_{{{n}}}$")
    ax.set_xlabel("x")
    ax.set_ylabel(r"$v_n(x)$")
    ax.legend(frameon=False)
    return save(fig, path)


def plot_report(r, path):
    """Moduli ladder: one faint curve per n, the envelope in bold, thresholds dashed."""
    fig, ax = new_figure()
    for row in r.moduli:
        ax.loglog(r.deltas, np.maximum(row, 1e-300), color="0.75", lw=0.6)
    ax.loglog(r.deltas, np.maximum(r.envelope, 1e-300), "k-", lw=1.5, label="envelope")
    if r.tail_bound is not None and math.isfinite(r.tail_bound):
        ax.loglog(r.deltas, r.envelope + r.tail_bound, "C0--", lw=1, label="envelope + tail")
    ax.axhline(r.pass_threshold, color="C2", ls=":", lw=1, label="pass threshold")
    ax.axhline(r.fail_threshold, color="C3", ls=":", lw=1, label="fail threshold")
    ax.set_xlabel(r"$\delta$")
    ax.set_ylabel(r"$\omega_n(\delta)$")
    ax.set_title(f"verdict: {r.verdict}")
    ax.legend(frameon=False)
    return save(fig, path)


def plot_paths(e, path, n_show=20):
    fig, ax = new_figure()
    for z in e.paths[:n_show]:
        ax.plot(e.nodes, z, lw=0.7)
    ax.set_xlabel("x")
    ax.set_ylabel("Z(x)")
    ax.set_title(f"{min(n_show, e.n_paths)} of {e.n_paths} paths, {e.n_terms} terms")
    return save(fig, path)


def plot_matrix(nodes, matrix, path, label="K"):
    fig, ax = new_figure(5.0, 4.2)
    im = ax.imshow(
        matrix,
        origin="lower",
        extent=(nodes[0], nodes[-1], nodes[0], nodes[-1]),
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("y")
    ax.set_ylabel("x")
    return save(fig, path)
