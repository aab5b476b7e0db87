"""Empirical-vs-analytic comparison: histograms, L1 distance to a reference
density, final-time mean error and cluster counting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model import MomentTrace, OpinionEnsemble


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray  # normalized heights, sum(density * width) == 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def histogram(ensemble: OpinionEnsemble, bins: int = 50) -> Histogram:
    """Uniform-width histogram on [-1, 1]; w = 1 lands in the last bin."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if ensemble.count < 2:
        raise ValueError("need at least 2 samples")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    counts, _ = np.histogram(ensemble.values, bins=edges)
    width = 2.0 / bins
    return Histogram(
        bin_edges=edges, counts=counts, density=counts / (ensemble.count * width)
    )


def binned_l1(d1: np.ndarray, d2: np.ndarray, edges: np.ndarray) -> float:
    """L1 distance between two binned densities on common edges."""
    return float(np.sum(np.abs(np.asarray(d1) - np.asarray(d2)) * np.diff(edges)))


def bin_average(f, edges: np.ndarray) -> np.ndarray:
    """Per-bin average of a density evaluator by adaptive quadrature; the
    steady profiles vary sharply near the boundary, so midpoint evaluation
    is not good enough."""
    avg = np.empty(len(edges) - 1)
    for k in range(len(edges) - 1):
        a, b = edges[k], edges[k + 1]
        val, _ = integrate.quad(f, a, b, limit=100)
        avg[k] = val / (b - a)
    return avg


def l1_distance(h: Histogram, f) -> float:
    """L1 distance between a histogram and a normalized density evaluator."""
    return binned_l1(h.density, bin_average(f, h.bin_edges), h.bin_edges)


def mean_error_l2(trace: MomentTrace, w_d: float, at: float) -> float:
    """|m(T) - w_d| at the recorded time closest to T (within half a grid step)."""
    times = trace.times
    if not times[0] <= at <= times[-1] + 1e-9:
        raise ValueError(f"time {at} outside the recorded range [{times[0]}, {times[-1]}]")
    i = int(np.argmin(np.abs(times - at)))
    return abs(float(trace.m[i]) - w_d)


def count_clusters(ensemble: OpinionEnsemble, gap: float = 0.15) -> int:
    """Number of opinion clusters: sorted values split wherever consecutive
    opinions differ by more than ``gap``."""
    if gap <= 0:
        raise ValueError("gap must be > 0")
    w = np.sort(ensemble.values)
    if w.size == 0:
        return 0
    return int(np.count_nonzero(np.diff(w) > gap)) + 1


def cluster_centers(ensemble: OpinionEnsemble, gap: float = 0.15) -> list[float]:
    """Mean opinion of each cluster, in increasing order."""
    if gap <= 0:
        raise ValueError("gap must be > 0")
    w = np.sort(ensemble.values)
    splits = np.flatnonzero(np.diff(w) > gap) + 1
    return [float(chunk.mean()) for chunk in np.split(w, splits)]
