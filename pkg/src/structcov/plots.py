"""Figure rendering for CLI reports (written next to the delimited output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def benchmark_boxplot(report, path):
    """Per-estimator MAE boxplot for one benchmark run."""
    names = list(report.estimators)
    data = [report.maes[name] for name in names]
    fig, ax = plt.subplots(figsize=(1.4 * max(len(names), 4), 4.0))
    ax.boxplot(data, tick_labels=names)
    cfg = report.config
    ax.set_ylabel("mean absolute error")
    ax.set_title("%s  d=%d T=%d xi=%.2f %s" %
                 (cfg.kind.upper(), cfg.d, cfg.t, cfg.xi,
                  "missing" if cfg.missing else "complete"))
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def selection_chart(centered, path):
    """Centered BIC per candidate model, lowest first."""
    labels = ["+".join(c.index_set) for c, _ in centered]
    values = [delta for _, delta in centered]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(labels)), 4.5))
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.plot(range(len(values)), values, "o-", ms=4)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_ylabel("BIC (centered at reference model)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def correlation_heatmap(matrix, path, title="fitted correlation"):
    """Heatmap of a correlation matrix with the diagonal blanked."""
    m = np.asarray(matrix, dtype=float).copy()
    np.fill_diagonal(m, 0.0)
    fig, ax = plt.subplots(figsize=(5.5, 4.8))
    im = ax.imshow(m, cmap="RdBu_r", vmin=-1.0, vmax=1.0)
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
