"""Figures for batch summaries, rendered headless to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import CaseResult  # noqa: E402


def ifs_histogram(results: Sequence[CaseResult], path: str | Path, bins: int = 10) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist([r.ifs for r in results], bins=bins, range=(0.0, 1.0), color="#4C72B0", edgecolor="white")
    ax.set_xlabel("IFS")
    ax.set_ylabel("cases")
    ax.set_xlim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def family_bars(summary: dict, path: str | Path) -> Path:
    rows = summary.get("per_family", {})
    names = list(rows)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(names)), [rows[k]["mean_ifs"] for k in names], color="#55A868")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean IFS")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def sub_score_bars(summary: dict, path: str | Path) -> Path:
    dims = summary.get("sub_scores", {})
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(list(dims), list(dims.values()), color="#C44E52")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("pass fraction")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_batch_figures(results: Sequence[CaseResult], summary: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not results:
        return []
    return [
        ifs_histogram(results, out / "ifs_histogram.png"),
        family_bars(summary, out / "ifs_by_family.png"),
        sub_score_bars(summary, out / "sub_scores.png"),
    ]
