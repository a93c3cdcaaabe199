"""Matplotlib rendering for the report paths: training-dynamics curves and
per-category metric bars, written as PNG files next to the CSV output."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import METRIC_NAMES, MetricsReport

CURVE_PANELS = (
    ("reward", "training reward"),
    ("response_chars", "response length (chars)"),
    ("turns", "interaction turns"),
    ("invalid_calls", "invalid tool calls"),
)


def save_curves_figure(rows: Sequence[dict], path) -> None:
    """Four-panel line plot of per-step rollout statistics."""
    steps = [row["step"] for row in rows]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for ax, (key, title) in zip(axes.flat, CURVE_PANELS):
        values = [row.get(key) for row in rows]
        ax.plot(steps, values, marker="o", markersize=3, linewidth=1.2)
        ax.set_title(title)
        ax.set_xlabel("step")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_figure(report: MetricsReport, path) -> None:
    """Grouped bars per category (plus overall) for each metric."""
    groups = ["overall"] + sorted(report.per_category)
    values = {name: [] for name in METRIC_NAMES}
    for group in groups:
        source = report.overall if group == "overall" else report.per_category[group]
        for name in METRIC_NAMES:
            values[name].append(source[name])
    width = 0.8 / len(METRIC_NAMES)
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(groups)), 4.5))
    for i, name in enumerate(METRIC_NAMES):
        offsets = [g + (i - (len(METRIC_NAMES) - 1) / 2) * width for g in range(len(groups))]
        ax.bar(offsets, values[name], width=width, label=name)
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(groups, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
