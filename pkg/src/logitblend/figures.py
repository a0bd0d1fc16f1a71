"""Report figures rendered to files next to the delimited output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvaluationReport, PeriodKs


def save_decile_chart(report: EvaluationReport, path: str | Path, title: str = "") -> Path:
    """Bar chart of event vs non-event share captured per score decile."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    deciles = [row.decile for row in report.decile_table]
    event_pct = [100.0 * row.events / report.n_events for row in report.decile_table]
    non_total = report.n_rows - report.n_events
    non_pct = [100.0 * (row.n - row.events) / non_total for row in report.decile_table]

    fig, ax = plt.subplots(figsize=(7, 4.2))
    width = 0.4
    ax.bar([d - width / 2 for d in deciles], event_pct, width, label="bad accounts", color="#b5432c")
    ax.bar([d + width / 2 for d in deciles], non_pct, width, label="good accounts", color="#3d6fa8")
    ax.set_xticks(deciles)
    ax.set_xlabel("score decile (1 = highest scores)")
    ax.set_ylabel("% of class in decile")
    ax.set_title(title or f"Class mix by decile (KS {100 * report.ks:.1f})")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_ks_over_time(series: Sequence[PeriodKs], path: str | Path, title: str = "") -> Path:
    """Line chart of the frozen model's KS across periods."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    periods = [p.period for p in series]
    ks_points = [100.0 * p.ks for p in series]

    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(periods, ks_points, marker="o", color="#3d6fa8")
    ax.set_xticks(periods)
    ax.set_xlabel("period")
    ax.set_ylabel("KS (0-100)")
    ax.set_ylim(0, 100)
    ax.set_title(title or "KS by period, frozen model")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
