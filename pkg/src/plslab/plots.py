"""Report figures rendered alongside the delimited simulation output.

Both figures are written as PNG files into the run's output directory so a
report can be assembled without re-running the harness.  The Agg backend is
forced before pyplot is imported; nothing here opens a window.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bounds import EVENT_NAMES
from .simulate import SimSummary


def render_loss_figure(summary: SimSummary, delta: float, path) -> None:
    """Per-replicate losses with the bound as a horizontal reference line."""
    losses = np.array([rec.loss for rec in summary.records], dtype=float)
    reps = np.arange(1, losses.size + 1)
    finite = losses[np.isfinite(losses)]

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(reps, losses, ".", ms=3, color="tab:blue", alpha=0.6, label="prediction loss")
    if math.isfinite(summary.rhs):
        ax.axhline(summary.rhs, color="tab:red", lw=1.5, label=f"bound ({summary.theorem})")
    if finite.size and finite.min() > 0.0:
        ax.set_yscale("log")
    ax.set_xlabel("replicate")
    ax.set_ylabel("squared prediction loss")
    ax.set_title(
        f"coverage {summary.coverage:.4f} over {summary.replicates} replicates "
        f"(target {1.0 - delta:.3f})"
    )
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_event_figure(summary: SimSummary, delta: float, path) -> None:
    """Bar chart of coverage and individual deviation-event rates."""
    names = ("covered",) + EVENT_NAMES
    rates = [summary.coverage] + [summary.deviation_event_rates[n] for n in EVENT_NAMES]

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.bar(range(len(names)), rates, color="tab:blue", alpha=0.8)
    ax.axhline(1.0 - delta, color="tab:red", lw=1.2, ls="--", label=f"1 - delta = {1.0 - delta:g}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("empirical rate")
    ax.set_title(f"event rates over {summary.replicates} replicates")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figures(summary: SimSummary, delta: float, out_dir) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loss_path = out_dir / "loss_vs_bound.png"
    event_path = out_dir / "event_rates.png"
    render_loss_figure(summary, delta, loss_path)
    render_event_figure(summary, delta, event_path)
    return [str(loss_path), str(event_path)]
