"""Figure rendering for evaluation and timing reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import numpy as np
import matplotlib.pyplot as plt


def render_eval_figure(report, path):
    """Grouped bar chart: mean accuracy per classifier, original vs transformed."""
    kinds = report.classifiers()
    variants = report.variants()
    x = np.arange(len(kinds))
    width = 0.8 / max(len(variants), 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, variant in enumerate(variants):
        accs = [report.mean_accuracy(variant, k) for k in kinds]
        ax.bar(x + i * width, accs, width, label=variant)
    ax.set_xticks(x + width * (len(variants) - 1) / 2)
    ax.set_xticklabels(kinds)
    ax.set_ylabel("mean accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Downstream accuracy by table variant")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_timing_figure(profile: dict, path):
    """Stacked per-iteration bars of diagnosis / backend / apply time."""
    iterations = profile["iterations"]
    idx = [it["index"] for it in iterations]
    diag = [it["diagnose"] for it in iterations]
    back = [it["backend"] for it in iterations]
    appl = [it["apply"] for it in iterations]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(idx, diag, label="diagnose")
    ax.bar(idx, back, bottom=diag, label="backend")
    bottoms = [d + b for d, b in zip(diag, back)]
    ax.bar(idx, appl, bottom=bottoms, label="apply")
    ax.set_xlabel("iteration")
    ax.set_ylabel("seconds")
    ax.set_xticks(idx)
    ax.legend()
    ax.set_title("Per-iteration wall-clock breakdown")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
