"""
Figures for a finished run, rendered off-screen to PNG.

PNG metadata is stripped of the software version so repeated runs write
identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}


def _save(fig, path):
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_trajectory(traj, F_star, path):
    """States, cost against the centralized optimum, gradient sum and disagreement."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
        n, m = traj.x.shape[1:]
        for i in range(n):
            for k in range(m):
                ax[0, 0].plot(traj.t, traj.x[:, i, k], color=f"C{k}", alpha=0.7,
                              label=f"x(:, {k})" if i == 0 else None)
        ax[0, 0].set_ylabel("agent states")
        ax[0, 0].legend(ncol=m)

        ax[0, 1].plot(traj.t, traj.F, label="F(x)")
        ax[0, 1].axhline(F_star, color="k", ls="--", lw=0.8, label="centralized F*")
        ax[0, 1].set_ylabel("cost")
        ax[0, 1].legend()

        ax[1, 0].semilogy(traj.t, np.maximum(traj.grad_sum_norm, 1e-300))
        ax[1, 0].set_ylabel("|sum of local gradients|")
        ax[1, 1].semilogy(traj.t, np.maximum(traj.disagreement, 1e-300))
        ax[1, 1].set_ylabel("max |x_i - mean|")
        for a in ax[1]:
            a.set_xlabel("t [s]")
        fig.tight_layout()
        _save(fig, path)


def plot_ellipses(dataset, solutions, path, labels=None):
    """Training points and the decision conics of one or more classifiers."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        pos = dataset.labels > 0
        ax.scatter(*dataset.points[pos].T, marker="+", c="C3", label="+1")
        ax.scatter(*dataset.points[~pos].T, marker="o", facecolors="none",
                   edgecolors="C0", label="-1")
        g = np.linspace(-1.1, 1.1, 301)
        Z1, Z2 = np.meshgrid(g, g)
        for j, x in enumerate(solutions):
            w1, w2, w3, nu = x
            S = w1 * Z1 ** 2 + w2 * Z2 ** 2 + np.sqrt(2.0) * w3 * Z1 * Z2 + nu
            ax.contour(Z1, Z2, S, levels=[0.0], colors=[f"C{(j + 2) % 10}"], linewidths=1.0)
            if labels:
                ax.plot([], [], color=f"C{(j + 2) % 10}", label=labels[j])
        ax.set_xlim(-1.1, 1.1)
        ax.set_ylim(-1.1, 1.1)
        ax.set_aspect("equal")
        ax.set_xlabel("z1")
        ax.set_ylabel("z2")
        ax.legend(loc="upper right")
        fig.tight_layout()
        _save(fig, path)


def plot_spectrum(eigs, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4))
        eigs = np.asarray(eigs)
        ax.scatter(eigs.real, eigs.imag, s=12, marker="x")
        ax.axvline(0.0, color="k", lw=0.6)
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_sweep(results, path):
    """Disagreement curves for each step size of a sweep."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        for r in results:
            ax.semilogy(r["t"], np.maximum(r["disagreement"], 1e-300), label=f"alpha={r['alpha']:g}")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("max |x_i - mean|")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
