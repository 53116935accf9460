"""Figure rendering for run traces and sweep tables.

Figures are written next to the CSV output as PNG files; the CSVs remain the
interchange format and plotting never changes what the CLI computes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["plot_trace", "plot_sweep"]


def plot_trace(records, path, title="holdout CVaR by samples consumed"):
    """Render one run's per-batch holdout CVaR curve to a PNG file."""
    fig, ax = plt.subplots(figsize=(6, 4))
    samples = [r.samples for r in records]
    ax.plot(samples, [r.holdout_cvar for r in records], marker="o", ms=3, label="holdout CVaR")
    ax.plot(samples, [r.holdout_mean for r in records], ls="--", lw=1, label="holdout mean")
    ax.set_xlabel("samples consumed")
    ax.set_ylabel("value")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(rows, axis, path, value_col="holdout_cvar"):
    """Render a sweep table (list of row dicts) as one curve per algorithm."""
    fig, ax = plt.subplots(figsize=(6, 4))
    algorithms = sorted({r["algorithm"] for r in rows})
    for alg in algorithms:
        pts: dict[float, list[float]] = {}
        for r in rows:
            if r["algorithm"] == alg:
                pts.setdefault(float(r["value"]), []).append(float(r[value_col]))
        xs = sorted(pts)
        ys = [sum(pts[x]) / len(pts[x]) for x in xs]
        ax.plot(xs, ys, marker="o", ms=4, label=alg)
    ax.set_xlabel(axis)
    ax.set_ylabel(value_col)
    ax.set_title(f"{value_col} by {axis}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
