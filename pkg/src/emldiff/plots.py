"""Figure rendering for CLI reports.

Every report path renders a PNG next to its CSV so runs are inspectable
without a separate plotting step.  Figures are written through the Agg
backend with date metadata stripped, keeping output bytes reproducible for
fixed seeds.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_figure", "plot_series", "plot_benchmark", "plot_profile", "plot_rn_histograms"]


def save_figure(fig, path) -> None:
    fig.savefig(path, dpi=130, metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def plot_series(series_list, labels, path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.2))
    for series, label in zip(series_list, labels):
        ax.plot(series.times, series.x, lw=0.8, label=label)
    ax.set_xlabel("t (years)")
    ax.set_ylabel("x")
    ax.set_title(title)
    if len(series_list) <= 6:
        ax.legend(fontsize=8, frameon=False)
    save_figure(fig, path)


def plot_benchmark(rows, path, title: str) -> None:
    """Bar chart of mean bias with std whiskers, grouped by estimator.

    ``rows`` are dicts with keys estimator, S, param, bias_mean, std_dev.
    """
    fig, ax = plt.subplots(figsize=(7, 3.5))
    groups = sorted({(r["estimator"], r["S"]) for r in rows}, key=str)
    params = sorted({r["param"] for r in rows})
    width = 0.8 / max(len(groups), 1)
    xs = np.arange(len(params))
    for gi, (est, s) in enumerate(groups):
        sel = {r["param"]: r for r in rows if r["estimator"] == est and r["S"] == s}
        bias = [sel[p]["bias_mean"] if p in sel else np.nan for p in params]
        std = [sel[p]["std_dev"] if p in sel else np.nan for p in params]
        label = est if not s else f"{est} (S={s})"
        ax.bar(xs + gi * width, bias, width=width, yerr=std, capsize=3, label=label)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(params)
    ax.set_ylabel("mean bias (whiskers: std dev)")
    ax.set_title(title)
    ax.legend(fontsize=8, frameon=False)
    save_figure(fig, path)


def plot_profile(profile, path, title: str) -> None:
    """Log-likelihood and fitted-coefficient curves over the parameter grid;
    2-D grids render the likelihood surface instead."""
    grid = np.asarray(profile.grid, dtype=float)
    valid = profile.valid
    if grid.shape[1] == 1:
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
        g = grid[valid, 0]
        ax1.plot(g, profile.loglik[valid], "o-", ms=3)
        ax1.set_xlabel("volatility parameter")
        ax1.set_ylabel("log-likelihood")
        for j in range(profile.theta_star.shape[1]):
            ax2.plot(g, profile.theta_star[valid, j], "o-", ms=3, label=f"theta*_{j}")
        ax2.set_xlabel("volatility parameter")
        ax2.set_ylabel("fitted drift coefficients")
        ax2.legend(fontsize=8, frameon=False)
        fig.suptitle(title)
    else:
        fig, ax = plt.subplots(figsize=(5.5, 4.2))
        g1 = np.unique(grid[:, 0])
        g2 = np.unique(grid[:, 1])
        zz = np.full((g2.size, g1.size), np.nan)
        for (v1, v2), ll, ok in zip(grid, profile.loglik, valid):
            if ok:
                zz[np.searchsorted(g2, v2), np.searchsorted(g1, v1)] = ll
        pc = ax.pcolormesh(g1, g2, zz, shading="nearest")
        fig.colorbar(pc, ax=ax, label="log-likelihood")
        ax.set_xlabel("sigma1")
        ax.set_ylabel("sigma2")
        ax.set_title(title)
    save_figure(fig, path)


def plot_rn_histograms(entries, path, title: str) -> None:
    """Density histograms of normalized bridge-density samples; one panel per
    time horizon, one curve per endpoint."""
    horizons = sorted({d for d, _, _ in entries})
    fig, axes = plt.subplots(1, len(horizons), figsize=(4.5 * len(horizons), 3.4), squeeze=False)
    for ax, dlt in zip(axes[0], horizons):
        for d, y, sample in entries:
            if d != dlt:
                continue
            ax.hist(sample.normalized, bins=120, density=True, histtype="step", label=f"y={y:g}")
        ax.set_xlabel("normalized bridge density")
        ax.set_ylabel("density")
        ax.set_title(f"horizon {dlt:g} years")
        ax.legend(fontsize=8, frameon=False)
    fig.suptitle(title)
    save_figure(fig, path)
