"""Figure rendering for the CLI report paths.

Figures are written straight to files (Agg backend); the delimited data
files remain the machine-readable interface, plots are a convenience.
"""
from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .decoy import INTENSITY_LABELS, MeasuredTables  # noqa: E402


def save_tables_figure(
    tables_z: MeasuredTables, tables_x: MeasuredTables, path: str
) -> None:
    """Heatmaps of the gain and QBER matrices for both bases."""
    fig, axes = plt.subplots(2, 2, figsize=(8, 7))
    for row, tab in enumerate((tables_z, tables_x)):
        for col, (mat, label) in enumerate(
            ((tab.gain, "gain"), (tab.qber, "QBER"))
        ):
            ax = axes[row][col]
            im = ax.imshow(mat, cmap="viridis")
            ax.set_title(f"{tab.basis} basis {label}")
            ax.set_xticks(range(3), INTENSITY_LABELS)
            ax.set_yticks(range(3), INTENSITY_LABELS)
            ax.set_xlabel("Bob intensity")
            ax.set_ylabel("Alice intensity")
            for i in range(3):
                for j in range(3):
                    ax.text(
                        j, i, f"{mat[i, j]:.3g}",
                        ha="center", va="center", color="w", fontsize=8,
                    )
            fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(
    values: Sequence[float], rates: Sequence[float], axis_name: str, path: str
) -> None:
    """Secure key rate versus the swept parameter."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(values, rates, marker="o", ms=3)
    ax.set_xlabel(axis_name)
    ax.set_ylabel("secure key rate (bits/pulse)")
    if any(r > 0 for r in rates):
        ax.set_yscale("symlog", linthresh=max(min(r for r in rates if r > 0), 1e-12))
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
