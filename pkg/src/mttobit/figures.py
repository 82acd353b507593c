"""Figure rendering for the report path: bar charts for the benchmark, a gap
trace for convergence, and a timing curve. Everything draws on the Agg
backend and writes straight to a file."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import BenchmarkReport, ConvergenceProbe, RuntimeRow


def benchmark_figure(reports: Sequence[BenchmarkReport], path) -> None:
    """Grouped bars, mean RMSE with sample-sd whiskers, one group per
    scenario row."""
    labels = [f"{r.scenario}\nrate {r.rate:g}" for r in reports]
    pos = np.arange(len(reports))
    width = 0.36
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(reports), 4.0))
    ax.bar(
        pos - width / 2,
        [r.mttm_mean for r in reports],
        width,
        yerr=[r.mttm_sd for r in reports],
        capsize=4,
        label="multi-target",
        color="#2b6cb0",
    )
    ax.bar(
        pos + width / 2,
        [r.sttm_mean for r in reports],
        width,
        yerr=[r.sttm_sd for r in reports],
        capsize=4,
        label="single-target",
        color="#c05621",
    )
    ax.set_xticks(pos)
    ax.set_xticklabels(labels)
    ax.set_ylabel("imputation RMSE")
    ax.set_title("Imputation error on hidden entries")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def convergence_figure(probe: ConvergenceProbe, path) -> None:
    """Objective gap to the long-run value, log scale, one point per sweep."""
    gaps = np.maximum(np.asarray(probe.gaps, dtype=float), 1e-16)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(np.arange(1, gaps.size + 1), gaps, marker=".", color="#2b6cb0")
    ax.axhline(1e-3, color="#999999", linewidth=0.8, linestyle="--")
    ax.set_xlabel("sweep")
    ax.set_ylabel("objective gap")
    ax.set_title("Ascent progress")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def runtime_figure(rows: Sequence[RuntimeRow], path) -> None:
    """Seconds per fixed sweep budget against the number of examples."""
    ns = [row.n for row in rows]
    secs = [row.seconds for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(ns, secs, marker="o", color="#2b6cb0")
    ax.set_xlabel("examples n")
    ax.set_ylabel("seconds")
    ax.set_title("Sweep cost versus table size")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
