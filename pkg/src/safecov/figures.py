"""Matplotlib figures for run reports (density map, distance histories, paths)."""
from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import atomic_write  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
MODE_COLOURS = {"nominal": "#d62728", "cbf": "#1f77b4"}


def _save(fig, path) -> Path:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=130, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return atomic_write(path, buf.getvalue())


def _domain_axes(ax, domain, pad=0.15, extra=None):
    v = domain.vertices
    closed = np.vstack([v, v[:1]])
    ax.plot(closed[:, 0], closed[:, 1], color="#1f4fd8", lw=1.5)
    pts = v if extra is None else np.vstack([v, extra])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = pad * max(1.0, float(max(hi - lo)) / float(max(np.ptp(v, axis=0))))
    lo, hi = lo - pad, hi + pad
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def density_figure(density, domain, path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        v = domain.vertices
        xs = np.linspace(v[:, 0].min(), v[:, 0].max(), 200)
        ys = np.linspace(v[:, 1].min(), v[:, 1].max(), 200)
        X, Y = np.meshgrid(xs, ys)
        Z = density(np.stack([X, Y], axis=-1))
        cs = ax.contourf(X, Y, Z, levels=20, cmap="viridis")
        fig.colorbar(cs, ax=ax, label="density")
        _domain_axes(ax, domain, pad=0.0)
        return _save(fig, path)


def min_distance_figure(results: dict, r_safe: float, path) -> Path:
    """Minimum pairwise centre distance against time, one line per mode."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 2.6))
        for mode, res in results.items():
            t = res.series("t")
            ax.plot(t, res.series("min_dist"), lw=1.0, color=MODE_COLOURS.get(mode), label=mode)
        ax.axhline(2.0 * r_safe, color="k", ls="--", lw=0.8, label=r"$2 r_{safe}$")
        ax.set_yscale("log")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("min pairwise distance [m]")
        ax.legend(frameon=False)
        return _save(fig, path)


def paths_figure(result, domain, path) -> Path:
    """Agent trajectories; the axes grow to include any excursion off the domain."""
    P = np.array([r.positions for r in result.records])
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.4, 3.4))
        for i in range(P.shape[1]):
            ax.plot(P[:, i, 0], P[:, i, 1], lw=0.7)
            ax.plot(*P[0, i], "ko", ms=2.5)
            ax.plot(*P[-1, i], "k^", ms=3.0)
        _domain_axes(ax, domain, extra=P.reshape(-1, 2))
        ax.set_title(f"{result.config.name} ({result.config.mode})")
        return _save(fig, path)
