"""Convergence figures: mean best fitness over wall-clock time with a ±1 std band."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"parallel": "tab:blue", "serial": "tab:orange"}


def _setup_axes(ax, title):
    ax.set_xscale("log")
    ax.set_xlabel("wall clock (ms)")
    ax.set_ylabel("best fitness")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)


def _draw(ax, summary, label, color):
    t = np.array([s[0] for s in summary])
    mean = np.array([s[1] for s in summary])
    std = np.array([s[2] for s in summary])
    ax.plot(t, mean, color=color, label=label, lw=1.6)
    ax.fill_between(t, mean - std, mean + std, color=color, alpha=0.25, lw=0)
    return mean


def plot_convergence(curves: dict[str, list], path: Path, title: str = "") -> Path:
    """Draw one line per entry of ``curves`` (label -> summary rows) and save to ``path``."""
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    try:
        _setup_axes(ax, title)
        allmeans = []
        for i, (label, summary) in enumerate(curves.items()):
            color = COLORS.get(label, f"C{i}")
            allmeans.append(_draw(ax, summary, label, color))
        vals = np.concatenate(allmeans) if allmeans else np.array([])
        if vals.size and np.all(vals > 0) and vals.max() / vals.min() > 100:
            ax.set_yscale("log")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return Path(path)
