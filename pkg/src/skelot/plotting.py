"""Figures for the report path: cells, bodies, energy sequences and cost slices.

Only dimensions 1 and 2 are drawn. SVG output is made byte-stable by
fixing the hash salt and dropping the date metadata.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402

plt.rcParams.update(
    {
        "svg.hashsalt": "skelot",
        "svg.fonttype": "none",
        "figure.figsize": (5.0, 4.0),
        "font.size": 9,
        "axes.spines.top": False,
        "axes.spines.right": False,
    }
)

CMAP = "viridis"


def save(fig, path: Path | str) -> Path:
    """Write ``fig`` as SVG or PNG (by suffix) without timestamps, then close it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".svg":
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    else:
        fig.savefig(path, format="png", dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _colors(n: int):
    return plt.get_cmap(CMAP)(np.linspace(0, 1, max(n, 2)))[:n]


def plot_cells(cells, samples: np.ndarray, phi=None, path: Path | str | None = None, title: str = "Laguerre cells"):
    """Cells of a solved potential; in 1-D the potential graph is drawn over the coloured cells."""
    fig, ax = plt.subplots()
    cols = _colors(len(samples))
    if cells.method == "exact-1d":
        for a, b, j, s, c in cells.segments:
            ax.axvspan(a, b, color=cols[j], alpha=0.35, lw=0)
            ax.plot([a, b], [s * a + c, s * b + c], color="k", lw=1.2)
        ax.set_xlabel("x")
        ax.set_ylabel("phi(x)")
    elif cells.method == "exact-2d":
        polys = [np.asarray(r) for r, _, _ in cells.polygons]
        pc = PolyCollection(polys, facecolors=[cols[j] for _, j, _ in cells.polygons], edgecolors="k", linewidths=0.4)
        ax.add_collection(pc)
        ax.autoscale_view()
        ax.set_aspect("equal")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        raise ValueError("only exact 1-D and 2-D cells can be drawn")
    ax.set_title(title)
    return save(fig, path) if path else fig


def plot_body(vertices: Sequence, samples: np.ndarray | None = None, weights: np.ndarray | None = None,
              path: Path | str | None = None, title: str = "Okounkov body"):
    fig, ax = plt.subplots()
    V = np.array([[float(c) for c in v] for v in vertices])
    if V.shape[1] == 1:
        ax.hlines(0, V.min(), V.max(), lw=4, color="C0")
        if samples is not None:
            ax.scatter(samples[:, 0], np.zeros(len(samples)), s=12 + 400 * (weights if weights is not None else 0), color="C1", zorder=3)
        ax.set_yticks([])
        ax.set_xlabel("p")
    elif V.shape[1] == 2:
        c = V.mean(axis=0)
        order = np.argsort(np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0]))
        ring = np.vstack([V[order], V[order][:1]])
        ax.fill(ring[:, 0], ring[:, 1], alpha=0.25, color="C0")
        ax.plot(ring[:, 0], ring[:, 1], color="C0")
        if samples is not None:
            ax.scatter(samples[:, 0], samples[:, 1], s=6, color="C1")
        ax.set_aspect("equal")
        ax.set_xlabel("p1")
        ax.set_ylabel("p2")
    else:
        raise ValueError("only 1-D and 2-D bodies can be drawn")
    ax.set_title(title)
    return save(fig, path) if path else fig


def plot_energy(degrees: Sequence[int], values: Sequence[float], integral: float, path: Path | str | None = None):
    fig, ax = plt.subplots()
    ax.plot(degrees, values, "o-", label="relative-volume limit")
    ax.axhline(integral, color="C1", ls="--", label="body integral")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("degree l")
    ax.set_ylabel("energy")
    ax.legend(frameon=False)
    return save(fig, path) if path else fig


def plot_cost_slice(xs: np.ndarray, values: np.ndarray, labels: Sequence[str], path: Path | str | None = None):
    """Cost c(x, p) along a 1-D family of x for several p (one curve per column)."""
    fig, ax = plt.subplots()
    for k, lab in enumerate(labels):
        ax.plot(xs, values[:, k], label=lab)
    ax.set_xlabel("x")
    ax.set_ylabel("c(x, p)")
    ax.legend(frameon=False, fontsize=7)
    return save(fig, path) if path else fig


def plot_residuals(history: Sequence[float], path: Path | str | None = None):
    fig, ax = plt.subplots()
    h = np.asarray(history, dtype=float)
    ax.plot(np.arange(len(h)), h - h.min() + 1e-16, "o-")
    ax.set_yscale("log")
    ax.set_xlabel("accepted step")
    ax.set_ylabel("functional - final")
    return save(fig, path) if path else fig
