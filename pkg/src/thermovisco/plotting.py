"""Static figures for simulation reports and constitutive tables (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG output byte-reproducible
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def plot_energy_history(ledger, path) -> Path:
    t = ledger.column("t")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(t, ledger.column("kinetic"), label="kinetic")
    ax1.plot(t, ledger.column("stored"), label="stored")
    total = ledger.column("total")
    ax1.set_xlabel("t")
    ax1.set_ylabel("energy")
    ax1.legend(frameon=False)
    ax1b = ax1.twinx()
    ax1b.plot(t, total - total[0], "k--", lw=0.8)
    ax1b.set_ylabel("total - total(0)")
    ax2.plot(t, ledger.column("entropy_total"), color="C3")
    ax2.set_xlabel("t")
    ax2.set_ylabel("entropy")
    fig.tight_layout()
    return _save(fig, path)


def plot_residuals(residuals: dict, path) -> Path:
    t = residuals["t"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key in ("mechanical_residual", "total_residual", "adiabatic_crosscheck"):
        ax.semilogy(t, np.abs(residuals[key]) + 1e-300, label=key.replace("_", " "))
    ax.set_xlabel("t")
    ax.set_ylabel("|residual|")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_fields(grid, state, theta, path) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    speed = np.sqrt(np.sum(state.v**2, axis=-1))
    J = np.linalg.det(state.F)
    extent = (0, grid.Lx, 0, grid.Ly)
    for ax, data, title in zip(axes, (theta, speed, J), ("temperature", "|v|", "det F")):
        im = ax.imshow(data.T, origin="lower", extent=extent, cmap="viridis")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    return _save(fig, path)


def plot_table(table, path, title: str = "") -> Path:
    """Heat capacity and internal energy against temperature."""
    theta = table[:, 0]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(theta, table[:, 2])
    ax1.set_xlabel("theta")
    ax1.set_ylabel("E")
    ax2.plot(theta, table[:, 4])
    ax2.set_xlabel("theta")
    ax2.set_ylabel("c")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)
