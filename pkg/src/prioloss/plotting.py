"""Figure rendering for sweep and simulation reports.

Figures are written next to the delimited output; all rendering uses the Agg
backend so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _series(rows, key):
    xs, ys = [], []
    for row in rows:
        v = row.get(key)
        if v is None or v == "" or v == "unstable":
            continue
        xs.append(float(row["value"]))
        ys.append(float(v))
    return xs, ys


def sweep_figure(rows, varying: str, out_path: str):
    """Three-panel figure (mean wait, mean terminations, throughput) vs the
    swept parameter, overlaying analytic curves and simulated points."""
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    panels = [
        ("mean_wait", "mean wait of class 2"),
        ("mean_terminations", "terminations per class-2 customer"),
        ("throughput", "class-2 throughput"),
    ]
    for ax, (key, title) in zip(axes, panels):
        xs, ys = _series(rows, key)
        if xs:
            ax.plot(xs, ys, "-", color="C0", label="analytic")
        xs, ys = _series(rows, key + "_sim")
        if xs:
            hw = [float(r.get(key + "_sim_hw", 0) or 0) for r in rows
                  if r.get(key + "_sim") not in (None, "", "unstable")]
            ax.errorbar(xs, ys, yerr=hw, fmt="o", ms=4, color="C1",
                        capsize=3, label="sim")
        ax.set_xlabel(varying)
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def histogram_figure(probs, out_path: str, title: str = "terminations per class-2 customer"):
    """Bar chart of the per-customer termination-count distribution."""
    probs = np.asarray(probs, dtype=float)
    support = np.nonzero(probs > 0)[0]
    kmax = int(support.max()) + 1 if support.size else 1
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(kmax), probs[:kmax], color="C0")
    ax.set_xlabel("number of terminations k")
    ax.set_ylabel("P(N = k)")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
