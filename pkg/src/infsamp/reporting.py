"""Figure rendering for the report path.

Every plot is built from the per-run CSV artifacts and written next to the
aggregated tables, so reports stay reproducible from the delimited output
alone.
"""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_STRATEGY_COLORS = {
    "influence-p-bib": "tab:blue",
    "influence-d-bib": "tab:cyan",
    "influence-p-ph": "tab:purple",
    "full": "tab:orange",
    "one": "tab:green",
    "ave": "tab:red",
}


def _color(label: str) -> str:
    for key, color in _STRATEGY_COLORS.items():
        if label.startswith(key):
            return color
    return "gray"


def _new_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.2), dpi=150)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _finish(fig, ax, path):
    handles, labels = ax.get_legend_handles_labels()
    if labels:
        # collapse duplicate labels from multi-seed runs
        seen: dict[str, object] = {}
        for h, l in zip(handles, labels):
            seen.setdefault(l, h)
        ax.legend(seen.values(), seen.keys(), fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def fig_pr_curves(curves, path) -> None:
    """Overlay PR curves; ``curves`` is [(label, recalls, precisions), ...]."""
    fig, ax = _new_axes("Precision-recall by strategy", "recall", "precision")
    for label, recalls, precisions in curves:
        ax.plot(recalls, precisions, label=label, color=_color(label),
                alpha=0.7, linewidth=1.2)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    _finish(fig, ax, path)


def fig_ratio_sweep(rows, path) -> None:
    """Mean +- stderr of PR-AUC against sampling ratio, per strategy.

    ``rows`` is a list of dicts holding strategy, ratio and pr_auc.
    """
    grouped: dict[tuple[str, float], list[float]] = defaultdict(list)
    for row in rows:
        if row.get("ratio") in (None, "") or row.get("pr_auc") in (None, ""):
            continue
        grouped[(row["strategy"], float(row["ratio"]))].append(
            float(row["pr_auc"]))
    fig, ax = _new_axes("PR-AUC vs sampling ratio", "sampling ratio", "PR-AUC")
    by_strategy: dict[str, list[tuple[float, float, float]]] = defaultdict(list)
    for (strategy, ratio), aucs in sorted(grouped.items()):
        mean = sum(aucs) / len(aucs)
        err = (math.sqrt(sum((a - mean) ** 2 for a in aucs)
                         / max(len(aucs) - 1, 1) / len(aucs))
               if len(aucs) > 1 else 0.0)
        by_strategy[strategy].append((ratio, mean, err))
    for strategy, pts in by_strategy.items():
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3,
                    label=strategy, color=_color(strategy))
    _finish(fig, ax, path)


def fig_clean_fraction(series, path, baseline: float | None = None) -> None:
    """Selected-subset clean fraction per epoch; ``series`` = [(label, epochs, fracs)]."""
    fig, ax = _new_axes("Clean fraction of selected instances",
                        "epoch", "clean fraction")
    for label, epochs, fracs in series:
        ax.plot(epochs, fracs, label=label, color=_color(label),
                alpha=0.7, linewidth=1.2)
    if baseline is not None and not math.isnan(baseline):
        ax.axhline(baseline, linestyle="--", color="black", alpha=0.6,
                   label="dataset clean rate")
    ax.set_ylim(0, 1.02)
    _finish(fig, ax, path)


def fig_noise_detection(series, path) -> None:
    """Clean fraction among the k lowest-score instances as k grows."""
    fig, ax = _new_axes("Noise separation by influence score",
                        "k lowest-score instances", "clean fraction")
    for label, ks, fracs in series:
        ax.plot(ks, fracs, label=label, color=_color(label),
                alpha=0.7, linewidth=1.2)
    ax.set_ylim(0, 1.02)
    _finish(fig, ax, path)


def fig_val_loss(series, path) -> None:
    """Validation loss per epoch; ``series`` = [(label, epochs, losses)]."""
    fig, ax = _new_axes("Validation loss", "epoch", "loss")
    for label, epochs, losses in series:
        ax.plot(epochs, losses, label=label, color=_color(label),
                alpha=0.7, linewidth=1.2)
    _finish(fig, ax, path)
