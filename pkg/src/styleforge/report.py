"""Figure rendering for the diversity and sweep reports.

Style vectors are projected to two dimensions with a plain SVD-based PCA
(the rows are small, no learning library needed) and drawn alongside the
delimited outputs, so reports carry both the numbers and a picture.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import StyleTable, style_diversity
from .stylestats import BACKGROUND

__all__ = ["render_diversity_report", "render_sweep_report"]


def _stack(table: StyleTable) -> np.ndarray:
    return np.stack(
        [np.concatenate([r.style.mu, r.style.sigma]).astype(np.float64) for r in table.rows]
    )


def _pca_2d(x: np.ndarray) -> np.ndarray:
    centered = x - x.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2] if vt.shape[0] >= 2 else np.vstack([vt, np.zeros((2 - vt.shape[0], vt.shape[1]))])
    return centered @ comps.T


def render_diversity_report(table: StyleTable, out_dir: str | Path) -> dict[str, Path]:
    """Write diversity.csv plus scatter/histogram figures; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, Path] = {}

    overall = style_diversity(table.vectors()) if table.rows else 0.0
    groups: dict[str, list] = {}
    for row in table.rows:
        key = BACKGROUND if row.kind == BACKGROUND else "object"
        groups.setdefault(key, []).append(row.style)

    csv_path = out_dir / "diversity.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "count", "diversity"])
        writer.writerow(["all", len(table.rows), repr(overall)])
        for key in sorted(groups):
            writer.writerow([key, len(groups[key]), repr(style_diversity(groups[key]))])
    outputs["csv"] = csv_path

    if table.rows:
        x = _stack(table)
        proj = _pca_2d(x)
        fig, ax = plt.subplots(figsize=(6, 5))
        for key, marker in ((BACKGROUND, "o"), ("object", "^")):
            idx = [
                i
                for i, row in enumerate(table.rows)
                if (BACKGROUND if row.kind == BACKGROUND else "object") == key
            ]
            if idx:
                ax.scatter(proj[idx, 0], proj[idx, 1], s=18, alpha=0.7, marker=marker, label=key)
        ax.set_xlabel("PC 1")
        ax.set_ylabel("PC 2")
        ax.set_title(f"style vectors (mean pairwise distance {overall:.4g})")
        ax.legend()
        fig.tight_layout()
        scatter_path = out_dir / "style_scatter.png"
        fig.savefig(scatter_path, dpi=120)
        plt.close(fig)
        outputs["scatter"] = scatter_path

        if len(table.rows) >= 2:
            dists = []
            for i in range(len(x)):
                diffs = x[i + 1 :] - x[i]
                dists.extend(np.sqrt((diffs * diffs).sum(axis=1)).tolist())
            fig, ax = plt.subplots(figsize=(6, 4))
            ax.hist(dists, bins=min(40, max(5, len(dists) // 4)), color="#4878d0")
            ax.set_xlabel("pairwise distance")
            ax.set_ylabel("count")
            ax.set_title("pairwise style distances")
            fig.tight_layout()
            hist_path = out_dir / "distance_hist.png"
            fig.savefig(hist_path, dpi=120)
            plt.close(fig)
            outputs["hist"] = hist_path
    return outputs


def render_sweep_report(
    param: str,
    labels: list[str],
    diversities: list[float],
    out_dir: str | Path,
) -> dict[str, Path]:
    """Write sweep.csv and a diversity-vs-parameter figure; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([param, "diversity"])
        for label, value in zip(labels, diversities):
            writer.writerow([label, repr(value)])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(labels)), diversities, marker="o")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_xlabel(param)
    ax.set_ylabel("output style diversity")
    ax.set_title(f"diversity vs {param}")
    fig.tight_layout()
    fig_path = out_dir / "sweep.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return {"csv": csv_path, "figure": fig_path}
