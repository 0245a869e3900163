"""Evaluation metrics used by the experiment harness."""

from __future__ import annotations

import numpy as np


def _as_1d_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"expected matching 1-D arrays, got shapes {a.shape} and {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("inputs contain non-finite values")
    return a, b


def mse(predictions, targets) -> float:
    """Mean squared error."""
    p, t = _as_1d_pair(predictions, targets)
    if p.size == 0:
        raise ValueError("mse of empty arrays is undefined")
    return float(np.mean((p - t) ** 2))


def average_ranks(x) -> np.ndarray:
    """1-based ranks, ties given the average of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("ranks need a non-empty 1-D array")
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    # average of the integer ranks (starts + 1) .. ends
    avg = (starts + ends + 1) / 2.0
    return avg[inverse]


def spearman(a, b) -> float:
    """Spearman rank correlation with average ranks for ties.

    Constant inputs have no defined rank ordering and raise; callers that
    tabulate metrics should record the value as missing instead.
    """
    a, b = _as_1d_pair(a, b)
    if a.size < 2:
        raise ValueError("spearman needs at least two points")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("spearman is undefined for constant input")
    ra = average_ranks(a)
    rb = average_ranks(b)
    return float(np.corrcoef(ra, rb)[0, 1])


def joint_density_ranks(x, y, bins: int = 30) -> np.ndarray:
    """Per-sample rank of an empirical joint density estimate.

    The (x, y) plane is split into a bins-by-bins histogram; each sample is
    scored by the count of its own cell, then the counts are converted to
    average ranks.  High rank = the sample sits in a densely populated region.
    """
    x, y = _as_1d_pair(x, y)
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    counts, xedges, yedges = np.histogram2d(x, y, bins=bins)
    # histogram2d bins are half-open except the last, which is closed
    ix = np.clip(np.searchsorted(xedges[1:-1], x, side="right"), 0, bins - 1)
    iy = np.clip(np.searchsorted(yedges[1:-1], y, side="right"), 0, bins - 1)
    density = counts[ix, iy]
    return average_ranks(density)
