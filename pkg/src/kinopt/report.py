"""Figure rendering for scenario artifacts (files only, no interactive UI)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytics import Histogram
from .model import MomentTrace


def render_trace(trace: MomentTrace, w_d: float, path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax1.plot(trace.times, trace.m, "b-", label="m(t)")
    if trace.m_stderr is not None:
        ax1.fill_between(
            trace.times, trace.m - 2 * trace.m_stderr, trace.m + 2 * trace.m_stderr,
            color="b", alpha=0.2, label="±2 stderr",
        )
    ax1.axhline(w_d, color="k", ls="--", lw=0.8, label="target")
    ax1.set_xlabel("t")
    ax1.set_ylabel("mean opinion")
    ax1.legend(fontsize=8)
    ax2.plot(trace.times, trace.E, "r-", label="E(t)")
    ax2.plot(trace.times, trace.dist, "g:", label="|m - w_d|")
    ax2.set_xlabel("t")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_hist(hist: Histogram, analytic, path) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.bar(hist.centers, hist.density, width=hist.widths, alpha=0.55,
           color="steelblue", edgecolor="none", label="samples")
    if analytic is not None:
        w = np.linspace(-1.0, 1.0, 801)
        ax.plot(w, analytic(w), "k-", lw=1.4, label="steady profile")
    ax.set_xlim(-1.02, 1.02)
    ax.set_xlabel("w")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_analytic(density, path) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    w = np.linspace(-1.0, 1.0, 801)
    ax.plot(w, density(w), "k-", lw=1.4)
    ax.set_xlim(-1.02, 1.02)
    ax.set_xlabel("w")
    ax.set_ylabel("steady density")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
