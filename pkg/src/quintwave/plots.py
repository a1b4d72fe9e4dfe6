"""Report figures rendered to PNG files.

Import stays local to the report path: headless batch runs that skip
plotting never pull matplotlib in.  The Agg backend is forced before
pyplot loads since report runs have no display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_series(series, path) -> None:
    """Energy, L^6 norm, and local-energy density against time."""
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 8.0), sharex=True)
    ts = series.t
    axes[0].plot(ts, series.columns["energy"], lw=1.2)
    axes[0].set_ylabel("energy")
    axes[0].grid(alpha=0.3)
    axes[1].semilogy(ts, np.maximum(series.columns["l6"], 1e-300), lw=1.2)
    axes[1].set_ylabel(r"$\|u\|_{L^6}$")
    axes[1].grid(alpha=0.3)
    axes[2].semilogy(ts, np.maximum(series.columns["le1_density"], 1e-300), lw=1.2)
    axes[2].set_ylabel("local-energy density")
    axes[2].set_xlabel("t")
    axes[2].grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_flux(flux_by_window: dict, path) -> None:
    """Cone flux per time window, log scale."""
    labels = list(flux_by_window)
    vals = [max(flux_by_window[k], 1e-300) for k in labels]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(range(len(vals)), vals, color="#4878a8")
    ax.set_yscale("log")
    ax.set_xticks(range(len(vals)), labels, rotation=20)
    ax.set_ylabel("cone flux")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_scatter_defects(scatter_blob: dict, path) -> None:
    """Pull-back and shadowing defects against the capture times."""
    times = scatter_blob["times"]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    bd = scatter_blob["backward_defects"]
    ax.loglog(times[1:], np.maximum(bd, 1e-300), "o-", label="pull-back defect")
    fd = scatter_blob["forward_defects"]
    ax.loglog(times, np.maximum(fd, 1e-300), "s--", label="shadowing defect")
    if scatter_blob.get("floor_backward"):
        floor = max(max(scatter_blob["floor_backward"]), 1e-300)
        ax.axhline(floor, color="gray", ls=":", label="linear floor")
    ax.set_xlabel("T")
    ax.set_ylabel("free energy defect")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_convergence(resolutions, ratio_sources: dict, path) -> None:
    """Absolute diagnostic values against dr on log-log axes.

    ratio_sources maps a label to the per-resolution values (same length
    as resolutions); slopes near the scheme order show as parallel lines.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label, vals in ratio_sources.items():
        ax.loglog(resolutions, np.maximum(np.abs(vals), 1e-300), "o-", label=label)
    ref = np.array(resolutions, dtype=float)
    anchor = max(
        (abs(v[0]) for v in ratio_sources.values() if len(v)), default=1.0
    )
    ax.loglog(ref, anchor * (ref / ref[0]) ** 2, "k:", lw=1.0, label=r"$\Delta r^2$")
    ax.set_xlabel(r"$\Delta r$")
    ax.set_ylabel("diagnostic")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_run_figures(series, flux_data, scatter_data, fig_dir) -> list:
    """Render whatever data is present; returns manifest-relative names."""
    fig_dir = Path(fig_dir)
    written = []
    plot_series(series, fig_dir / "series.png")
    written.append(f"{fig_dir.name}/series.png")
    if flux_data:
        plot_flux(flux_data, fig_dir / "flux.png")
        written.append(f"{fig_dir.name}/flux.png")
    if scatter_data:
        plot_scatter_defects(scatter_data, fig_dir / "scatter.png")
        written.append(f"{fig_dir.name}/scatter.png")
    return written
