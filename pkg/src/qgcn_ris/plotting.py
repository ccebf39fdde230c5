"""Post-hoc figures rendered to files with the non-interactive Agg backend."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps repeated renders byte-identical
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_META)
    plt.close(fig)
    return path


def plot_summary(summary: Sequence[dict], path, title: str = "Mean min-rate (95% CI)") -> Path:
    """Bar chart of ``mean_min_rate`` with CI whiskers, one bar per summary record."""
    labels = [s["method"] if s["config"] == "full" else f'{s["method"]}\n{s["config"]}'
              for s in summary]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(summary)), 3.2))
    ax.bar(range(len(summary)), [s["mean_min_rate"] for s in summary],
           yerr=[s["ci95"] for s in summary], capsize=4, color="0.55", edgecolor="k")
    ax.set_xticks(range(len(summary)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("min-rate [bps/Hz]")
    ax.set_title(title, fontsize=10)
    return _save(fig, path)


def plot_sweep(summary: Sequence[dict], path) -> Path:
    """Mean min-rate against element count, one line per method."""
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    methods = list(dict.fromkeys(s["method"] for s in summary))
    for m in methods:
        pts = sorted((s["n_elements"], s["mean_min_rate"], s["ci95"])
                     for s in summary if s["method"] == m)
        n, mean, ci = zip(*pts)
        ax.errorbar(n, mean, yerr=ci, marker="o", capsize=3, label=m)
    ax.set_xlabel("RIS elements N")
    ax.set_ylabel("mean min-rate [bps/Hz]")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_trace(trace: Sequence[float], path, ylabel: str = "loss") -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    ax.plot(range(1, len(trace) + 1), trace, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    return _save(fig, path)
