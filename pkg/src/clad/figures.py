"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import AgreementReport, ComparisonSummary, ConfusionMatrix, EvalReport


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def confusion_heatmap(cm: ConfusionMatrix, path: str | Path, title: str = "Confusion matrix",
                      rater_a: str = "actual", rater_b: str = "model") -> Path:
    grid = np.array([[cm.tp, cm.fn], [cm.fp, cm.tn]], dtype=float)
    fig, ax = plt.subplots(figsize=(4, 3.5))
    im = ax.imshow(grid, cmap="Blues")
    for (i, j), value in np.ndenumerate(grid):
        color = "white" if value > grid.max() / 2 else "black"
        ax.text(j, i, f"{int(value)}", ha="center", va="center", color=color)
    ax.set_xticks([0, 1], ["give", "deny"])
    ax.set_yticks([0, 1], ["give", "deny"])
    ax.set_xlabel(rater_b)
    ax.set_ylabel(rater_a)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, path)


def importance_bars(names: Sequence[str], scores: Sequence[float], path: str | Path) -> Path:
    order = np.argsort(scores)
    names = [names[i] for i in order]
    values = [scores[i] for i in order]
    fig, ax = plt.subplots(figsize=(6, 0.35 * len(names) + 1))
    ax.barh(range(len(names)), values, color="#2b6cb0")
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.set_xlabel("share of split gain")
    ax.set_title("Feature importance")
    return _save(fig, path)


def grid_costs(mean_costs: Sequence[float], path: str | Path) -> Path:
    finite = [c for c in mean_costs if np.isfinite(c)]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(1, len(finite) + 1), finite, marker="o", lw=1, color="#2b6cb0")
    ax.set_xlabel("trial rank")
    ax.set_ylabel("mean CV cost (BS)")
    ax.set_title(f"Grid search ({len(mean_costs)} trials, {len(mean_costs) - len(finite)} failed)")
    return _save(fig, path)


def agreement_panel(report: AgreementReport, path: str | Path) -> Path:
    fig, (ax_m, ax_k) = plt.subplots(1, 2, figsize=(7, 3))
    m = report.matrix
    grid = np.array([[m.tp, m.fp], [m.fn, m.tn]], dtype=float)
    im = ax_m.imshow(grid, cmap="Greens")
    for (i, j), value in np.ndenumerate(grid):
        color = "white" if value > grid.max() / 2 else "black"
        ax_m.text(j, i, f"{int(value)}", ha="center", va="center", color=color)
    ax_m.set_xticks([0, 1], ["give", "deny"])
    ax_m.set_yticks([0, 1], ["give", "deny"])
    ax_m.set_xlabel("committee")
    ax_m.set_ylabel("model")
    ax_m.set_title("Rater agreement")
    fig.colorbar(im, ax=ax_m, shrink=0.8)

    ax_k.axis("off")
    ax_k.text(
        0.0,
        0.5,
        f"kappa = {report.kappa:.2f}\n{report.band}\nP0 = {report.p0:.4f}\nPe = {report.pe:.4f}",
        fontsize=12,
        va="center",
    )
    return _save(fig, path)


def comparison_bars(a: EvalReport, b: EvalReport, summary: ComparisonSummary, path: str | Path) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    panels = (
        ("accuracy", [a.accuracy, b.accuracy]),
        ("total cost (BS)", [a.total_cost, b.total_cost]),
        ("false positives", [a.matrix.fp, b.matrix.fp]),
    )
    for ax, (title, values) in zip(axes, panels):
        ax.bar([summary.label_a, summary.label_b], values, color=["#2b6cb0", "#c05621"])
        ax.set_title(title, fontsize=10)
        ax.tick_params(axis="x", labelsize=8)
    fig.suptitle(f"cheaper: {summary.winner_by_cost} / more accurate: {summary.winner_by_accuracy}")
    fig.tight_layout()
    return _save(fig, path)
