"""Distribution summaries for margin populations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["DistributionSummary", "HistogramCdf", "summarize",
           "histogram_cdf", "pearson"]


@dataclass(frozen=True)
class DistributionSummary:
    """Moments and extremes of one sample set (sample std, ddof=1)."""

    n: int
    mean: float
    std: float
    minimum: float
    maximum: float

    @property
    def spread(self) -> float:
        return self.maximum - self.minimum


@dataclass(frozen=True)
class HistogramCdf:
    """Uniform-width histogram with its cumulative distribution.

    ``edges`` has one more entry than ``pdf``; bin k covers
    [edges[k], edges[k+1]) with the last bin closed on the right. ``pdf``
    holds per-bin probability mass (fractions summing to 1) and ``cdf``
    its cumulative sum.
    """

    edges: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray


def _clean(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    return x


def summarize(samples) -> DistributionSummary:
    """Mean, sample standard deviation and extremes of a sample set."""
    x = _clean(samples)
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return DistributionSummary(n=int(x.size), mean=float(np.mean(x)), std=std,
                               minimum=float(np.min(x)), maximum=float(np.max(x)))


def histogram_cdf(samples, bin_width: float) -> HistogramCdf:
    """Histogram at fixed bin width anchored at the sample minimum.

    Bins are left-closed; the value equal to the sample maximum lands in
    the final bin. Identical samples produce a single bin with mass 1.
    """
    if not bin_width > 0.0:
        raise ValueError("bin_width must be positive")
    x = _clean(samples)
    lo = float(np.min(x))
    span = float(np.max(x)) - lo
    k = int(math.floor(span / bin_width + 1e-9)) + 1
    edges = lo + bin_width * np.arange(k + 1, dtype=float)
    counts, _ = np.histogram(x, bins=k, range=(lo, lo + k * bin_width))
    pdf = counts.astype(float) / x.size
    return HistogramCdf(edges=edges, pdf=pdf, cdf=np.cumsum(pdf))


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equal-length sample sets."""
    xa = _clean(x)
    ya = _clean(y)
    if xa.size != ya.size:
        raise ValueError("sample sets must have equal length")
    if xa.size < 2:
        raise ValueError("need at least two pairs")
    dx = xa - np.mean(xa)
    dy = ya - np.mean(ya)
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined for a constant sample set")
    return float(np.sum(dx * dy) / (sx * sy))
