"""Figure rendering for run artifacts.

Each function takes the arrays a run just wrote to CSV and saves a PNG next
to them. Rendering is a convenience layer on top of the delimited outputs,
never a data source; disable it with --no-plot on the CLI.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def render_pulse(path: Path, t: np.ndarray, omega: np.ndarray,
                 phi: np.ndarray) -> Path:
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax1.plot(t, omega, lw=0.8)
    ax1.set_ylabel(r"$\Omega(t)/\omega_m$")
    ax2.plot(t, phi / (2 * np.pi), lw=0.8, color="tab:orange")
    ax2.set_ylabel(r"$\phi(t)/2\pi$")
    ax2.set_xlabel(r"$\omega_m t$")
    return _save(fig, path)


def render_loss_history(path: Path, loss: np.ndarray) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(loss.shape[0]), loss, lw=0.9)
    ax.axhline(0.5, color="gray", ls="--", lw=0.7, label="zero-point variance")
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\Delta X_b^2(\theta, T)$")
    ax.legend(frameon=False)
    return _save(fig, path)


def render_squeezing(path: Path, t: np.ndarray, degree: np.ndarray,
                     phonons: np.ndarray | None = None) -> Path:
    if phonons is not None:
        fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
        ax2.semilogy(t, np.maximum(phonons, 1e-12), lw=0.8, color="tab:green")
        ax2.set_ylabel(r"$\langle b^\dagger b\rangle$")
        ax2.set_xlabel(r"$\omega_m t$")
    else:
        fig, ax = plt.subplots(figsize=(7, 3.2))
        ax.set_xlabel(r"$\omega_m t$")
    ax.plot(t, degree, lw=0.8)
    ax.axhline(0.0, color="gray", ls="--", lw=0.7)
    ax.set_ylabel(r"$\mathcal{S}_b$ (dB)")
    return _save(fig, path)


def render_wigner(path: Path, grid_re: np.ndarray, grid_im: np.ndarray,
                  values: np.ndarray) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4.2))
    mesh = ax.pcolormesh(grid_re, grid_im, values.T, shading="auto",
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="W")
    ax.set_xlabel(r"$D_R$")
    ax.set_ylabel(r"$D_I$")
    ax.set_aspect("equal")
    return _save(fig, path)


def render_noise_trials(path: Path, t: np.ndarray, baseline: np.ndarray,
                        trials: np.ndarray, mean: np.ndarray) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for row in trials:
        ax.plot(t, row, lw=0.5, alpha=0.5)
    ax.plot(t, mean, lw=1.4, ls=":", color="purple", label="trial mean")
    ax.plot(t, baseline, lw=1.0, color="black", label="noise-free")
    ax.set_xlabel(r"$\omega_m t$")
    ax.set_ylabel(r"$\mathcal{S}_b$ (dB)")
    ax.legend(frameon=False)
    return _save(fig, path)


def render_sweep(path: Path, x: np.ndarray, y: np.ndarray, xlabel: str,
                 ylabel: str, logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    plot = ax.semilogy if logy else ax.plot
    plot(x, y, "o-", lw=0.9)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)
