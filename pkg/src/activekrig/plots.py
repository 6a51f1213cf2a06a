"""Figure rendering for run reports.

Everything here draws to files through the Agg backend, so the reporting
path works on headless machines.  The numbers behind each figure are
always also written as CSV by the pipeline; the figures are a convenience
layer on top, never the only record.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LOG_ERROR_FLOOR = 1e-16


def plot_eigenvalue_decay(eigenvalues, n: int, path) -> None:
    """Semilog spectrum with the active/inactive split marked."""
    ev = np.asarray(eigenvalues, dtype=float)
    idx = np.arange(1, ev.size + 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    positive = ev > 0
    ax.semilogy(idx[positive], ev[positive], "o-", color="tab:blue",
                markersize=4)
    if np.any(~positive):
        floor = ev[positive].min() if np.any(positive) else 1.0
        ax.semilogy(idx[~positive], np.full((~positive).sum(), floor * 1e-2),
                    "v", color="tab:gray", markersize=4, label="zero")
        ax.legend(loc="best", fontsize=8)
    ax.axvline(n + 0.5, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_error_histogram(errors_by_label: dict, path,
                         bins: int = 20) -> None:
    """Overlaid histograms of log10 error, one per labeled arm."""
    logs = {label: np.log10(np.maximum(np.asarray(e, dtype=float),
                                       LOG_ERROR_FLOOR))
            for label, e in errors_by_label.items()}
    lo = min(v.min() for v in logs.values())
    hi = max(v.max() for v in logs.values())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(np.floor(lo), np.ceil(hi), bins + 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for label, vals in logs.items():
        ax.hist(vals, bins=edges, alpha=0.55, label=label)
    ax.set_xlabel("log10 relative error")
    ax.set_ylabel("count")
    if len(logs) > 1:
        ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_surface_section(model, testing_y, testing_f, path) -> None:
    """One-dimensional response surface with a two-sigma band."""
    if model.n != 1:
        raise ValueError("section plots need a one-dimensional surface")
    design = model.design[:, 0]
    testing_y = np.asarray(testing_y, dtype=float).ravel()
    lo = min(design.min(), testing_y.min())
    hi = max(design.max(), testing_y.max())
    pad = 0.05 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, 300)
    mean, var = model.predict_batch(grid[:, None])
    sd = np.sqrt(var)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.fill_between(grid, mean - 2 * sd, mean + 2 * sd,
                    color="tab:blue", alpha=0.2, label="two-sigma band")
    ax.plot(grid, mean, color="tab:blue", linewidth=1.5, label="surface")
    ax.plot(testing_y, testing_f, ".", color="tab:gray", markersize=3,
            alpha=0.6, label="testing values")
    ax.plot(design, model.training, "o", color="tab:red", markersize=5,
            label="training points")
    ax.set_xlabel("active coordinate")
    ax.set_ylabel("value")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_surface_contour(model, path) -> None:
    """Filled contours of a two-dimensional surface over the design box."""
    if model.n != 2:
        raise ValueError("contour plots need a two-dimensional surface")
    design = model.design
    lows = design.min(axis=0)
    highs = design.max(axis=0)
    pads = 0.05 * (highs - lows)
    g1 = np.linspace(lows[0] - pads[0], highs[0] + pads[0], 80)
    g2 = np.linspace(lows[1] - pads[1], highs[1] + pads[1], 80)
    G1, G2 = np.meshgrid(g1, g2, indexing="ij")
    pts = np.stack([G1.ravel(), G2.ravel()], axis=1)
    mean, _ = model.predict_batch(pts)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    cs = ax.contourf(G1, G2, mean.reshape(G1.shape), levels=20,
                     cmap="viridis")
    fig.colorbar(cs, ax=ax, label="surface mean")
    ax.plot(design[:, 0], design[:, 1], "o", color="white", markersize=4,
            markeredgecolor="black")
    ax.set_xlabel("active coordinate 1")
    ax.set_ylabel("active coordinate 2")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
