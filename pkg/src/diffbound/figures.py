"""Figure rendering for the CLI report paths.

Uses the object-oriented matplotlib API with the Agg canvas so no display is
needed, and pins the PNG metadata so identical inputs give identical bytes.
Every CSV the CLI writes has a PNG rendered next to it by one of these.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["save_figure", "loss_curve", "scatter_points", "sweep_figure", "validity_figure"]

_PNG_META = {"Software": "diffbound"}


def _new_figure(width: float = 6.0, height: float = 4.5) -> Figure:
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def save_figure(fig: Figure, path) -> None:
    fig.savefig(Path(path), format="png", dpi=100, metadata=_PNG_META)


def loss_curve(trace: np.ndarray, path) -> None:
    trace = np.asarray(trace, dtype=np.float64)
    fig = _new_figure()
    ax = fig.add_subplot(111)
    steps = np.arange(trace.size)
    ax.plot(steps, trace, lw=0.4, alpha=0.4, color="tab:blue", label="per step")
    win = max(1, min(100, trace.size // 10))
    if win > 1:
        smooth = np.convolve(trace, np.ones(win) / win, mode="valid")
        ax.plot(steps[win - 1 :], smooth, lw=1.5, color="tab:red", label=f"mean over {win}")
    ax.set_xlabel("step")
    ax.set_ylabel("training loss")
    ax.set_yscale("log")
    ax.legend(loc="upper right")
    fig.tight_layout()
    save_figure(fig, path)


def scatter_points(points: np.ndarray, path, box=None, title: str = "") -> None:
    points = np.asarray(points, dtype=np.float64)
    fig = _new_figure(5.0, 5.0)
    ax = fig.add_subplot(111)
    ax.scatter(points[:, 0], points[:, 1], s=3.0, alpha=0.5, color="tab:blue")
    if box is not None:
        box = np.asarray(box, dtype=np.float64)
        xs = [box[0, 0], box[0, 1], box[0, 1], box[0, 0], box[0, 0]]
        ys = [box[1, 0], box[1, 0], box[1, 1], box[1, 1], box[1, 0]]
        ax.plot(xs, ys, color="black", lw=1.0)
    if title:
        ax.set_title(title)
    ax.set_aspect("equal")
    fig.tight_layout()
    save_figure(fig, path)


def sweep_figure(reports, path) -> None:
    lams = [r.lam for r in reports]
    fig = _new_figure()
    ax = fig.add_subplot(111)
    ax.plot(lams, [r.total for r in reports], "o-", color="black", label="total")
    ax.plot(lams, [r.term_recon for r in reports], "s--", label="recon")
    ax.plot(lams, [r.term_kl for r in reports], "v--", label="kl")
    ax.plot(lams, [r.term_pac for r in reports], "^--", label="pac")
    ax.plot(lams, [r.term_cross for r in reports], "x--", label="cross")
    ax.plot(lams, [r.term_sigma for r in reports], "+--", label="sigma")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("lambda")
    ax.set_ylabel("bound value")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    save_figure(fig, path)


def validity_figure(reports, estimates: dict, path) -> None:
    """Bound totals across lambda against the empirical W1 estimates."""
    lams = [r.lam for r in reports]
    fig = _new_figure()
    ax = fig.add_subplot(111)
    ax.plot(lams, [r.total for r in reports], "o-", color="black", label="certified bound")
    styles = {"lower_bound": ("tab:green", "sliced lower"), "exact": ("tab:blue", "exact W1"),
              "upper_bound": ("tab:orange", "trivial upper")}
    for kind, est in estimates.items():
        color, label = styles.get(kind, ("gray", kind))
        ax.axhline(est.value, color=color, ls=":", label=f"{label} = {est.value:.3g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("lambda")
    ax.set_ylabel("W1")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    save_figure(fig, path)
