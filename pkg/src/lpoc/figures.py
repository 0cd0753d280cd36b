"""Matplotlib rendering for the report-producing CLI paths.

Figures are written next to the delimited outputs; everything here is
data already present in the CSV/JSON files, drawn for quick inspection.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .lambda_select import LambdaScan
from .simulation import StudyReport


def lambda_scan_figure(scan: LambdaScan):
    """Raw and smoothed criterion curves with the chosen value marked."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    finite = np.isfinite(scan.k_values)
    ax.plot(scan.grid[finite], scan.k_values[finite], color="black", lw=1.0, label="criterion")
    if scan.smoothed_k is not None:
        sm = np.isfinite(scan.smoothed_k)
        ax.plot(scan.grid[sm], scan.smoothed_k[sm], color="crimson", lw=1.5, label="smoothed")
    ax.axvline(scan.chosen_lambda, color="gray", ls="--", lw=1.0,
               label=f"chosen = {scan.chosen_lambda:g}")
    ax.set_xlabel("regularization strength")
    ax.set_ylabel("mean shrinkage minus mean inflation")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def entry_distribution_figure(report: StudyReport):
    """Histograms of estimated entries split by true-zero / true-nonzero cells."""
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 6.4), sharex=True)
    colors = {"pearson": "steelblue", "ledoit_wolf": "darkorange", "lpoc": "seagreen"}
    truth = np.asarray(report.scenario["true_correlation"], dtype=float)
    off = ~np.eye(truth.shape[0], dtype=bool)
    nonzero = truth[off][truth[off] != 0.0]
    truth_lines = {
        "true_zero": 0.0,
        "true_nonzero": float(nonzero.mean()) if nonzero.size else 0.0,
    }
    for ax, cls, title in zip(
        axes, ("true_zero", "true_nonzero"), ("true correlation = 0", "true correlation != 0")
    ):
        for name, color in colors.items():
            vals = report.distributions[name][cls]
            if vals.size == 0:
                continue
            ax.hist(vals, bins=np.linspace(-1, 1, 81), density=True, histtype="step",
                    color=color, label=name)
        ax.axvline(truth_lines[cls], color="gray", ls=":", lw=1.0)
        ax.set_title(title, fontsize=10)
        ax.set_ylabel("density")
    axes[0].legend(frameon=False, fontsize=9)
    axes[1].set_xlabel("estimated correlation")
    fig.tight_layout()
    return fig


def save_figure(fig, path, dpi: int = 150) -> None:
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
