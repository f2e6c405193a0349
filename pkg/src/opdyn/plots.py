"""Matplotlib renderings of trajectories, spectra and comparison reports.

The CLI report path writes these figures next to its delimited text
output when plotting is requested.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_trajectory(traj, path, max_columns: int = 12) -> None:
    """Coefficient time series, largest-amplitude columns first."""
    fig, ax = plt.subplots(figsize=(7, 4))
    order = np.argsort(-np.abs(traj.coeffs).max(axis=0))
    for k in order[:max_columns]:
        ax.plot(traj.times, traj.coeffs[:, k], lw=0.9, label=traj.basis.labels[k])
    ax.set_xlabel("t")
    ax.set_ylabel("Pauli coefficient")
    ax.legend(fontsize=6, ncol=2, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_spectrum(spectrum, peaks=None, path=None, reference_lines=None) -> None:
    """Spectrum magnitude over ordinary frequency with optional peak marks."""
    fig, ax = plt.subplots(figsize=(7, 4))
    f = spectrum.ordinary_frequencies
    half = len(f) // 2 + 1  # positive-frequency half
    ax.plot(f[:half], spectrum.magnitude[:half], lw=0.9)
    if peaks is not None:
        for p in peaks.peaks:
            ax.axvline(p.frequency / (2 * np.pi), color="tab:red", lw=0.6, ls="--")
    if reference_lines:
        for freq, _ in reference_lines:
            ax.axvline(freq / (2 * np.pi), color="k", lw=0.6, ls=":")
    ax.set_xlabel("frequency (cycles per unit time)")
    ax.set_ylabel("|S|")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_drift(times, drifts: dict, path) -> None:
    """Per-time prediction error curves for several model variants."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, values in drifts.items():
        ax.plot(times, values, lw=1.0, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("relative L2 error")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
