"""Delimited summaries and the figures rendered alongside them.

Bench and sweep runs write machine-readable output (CSV / JSON) as the
source of truth; these helpers also render a PNG next to each so the result
can be eyeballed without further tooling.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

SWEEP_COLUMNS = ["budget", "recall_mean", "em_mean", "f1_mean", "items"]


def write_sweep_csv(path: str | Path, rows: list[dict]) -> None:
    """One row per simulation budget, ordered as given."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    "budget": row["budget"],
                    "recall_mean": f"{row['recall_mean']:.6f}",
                    "em_mean": f"{row['em_mean']:.6f}",
                    "f1_mean": f"{row['f1_mean']:.6f}",
                    "items": row["items"],
                }
            )


def read_sweep_csv(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        return [
            {
                "budget": int(row["budget"]),
                "recall_mean": float(row["recall_mean"]),
                "em_mean": float(row["em_mean"]),
                "f1_mean": float(row["f1_mean"]),
                "items": int(row["items"]),
            }
            for row in csv.DictReader(handle)
        ]


def render_sweep_figure(rows: list[dict], png_path: str | Path) -> None:
    """Scaling curve: metric means against the simulation budget."""
    budgets = [row["budget"] for row in rows]
    figure, axes = plt.subplots(figsize=(6, 4))
    axes.plot(budgets, [r["recall_mean"] for r in rows], marker="o", label="page recall")
    axes.plot(budgets, [r["f1_mean"] for r in rows], marker="s", linestyle="--", label="token F1")
    axes.plot(budgets, [r["em_mean"] for r in rows], marker="^", linestyle=":", label="exact match")
    axes.set_xlabel("simulation budget")
    axes.set_ylabel("mean score")
    axes.set_ylim(0.0, 1.05)
    axes.set_xticks(budgets)
    axes.grid(True, alpha=0.3)
    axes.legend()
    figure.tight_layout()
    figure.savefig(png_path)
    plt.close(figure)


def render_metric_bars(means: dict, png_path: str | Path) -> None:
    """Bar chart of aggregate metric means from a bench run."""
    names = list(means)
    values = [means[name] for name in names]
    figure, axes = plt.subplots(figsize=(6, 4))
    axes.bar(names, values, color="#4878a8")
    axes.set_ylabel("mean score")
    axes.set_ylim(0.0, 1.05)
    for index, value in enumerate(values):
        axes.text(index, value + 0.02, f"{value:.3f}", ha="center", fontsize=8)
    axes.tick_params(axis="x", rotation=30)
    figure.tight_layout()
    figure.savefig(png_path)
    plt.close(figure)
