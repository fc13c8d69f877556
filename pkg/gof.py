"""
Goodness of fit for the Gaussian approximation: divergences between
discretized distributions and least-squares parameter matching.
"""

import logging
import math
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.special import rel_entr
from scipy.stats import linregress

from config import GAUSSIAN_SUPPORT_SIGMAS, GRID_MARGIN, KL_SMOOTHING
from mc import Samples, histogram_on_edges, sample_values
from models import Histogram, MetricDistribution, RegressionResult, ValidationError
from ranking import std_normal_cdf

logger = logging.getLogger(__name__)

_NJSD_NORM = 2.0 * math.log(2.0)


def _check_edges(p: Histogram, q: Histogram) -> None:
    if p.edges.shape != q.edges.shape or not np.array_equal(p.edges, q.edges):
        raise ValidationError("histograms must share identical bin edges")


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    # smooth q only where p has mass and q has none
    q = np.where((p > 0) & (q == 0), KL_SMOOTHING, q)
    return float(np.sum(rel_entr(p, q)))


def kl_divergence(p: Histogram, q: Histogram) -> float:
    """sum p_i ln(p_i / q_i) over bins with p_i > 0."""
    _check_edges(p, q)
    return max(0.0, _kl(p.mass, q.mass))


def njsd(p: Histogram, q: Histogram) -> float:
    """Jensen-Shannon divergence with M = (p + q) / 2, divided by 2 ln 2 (so nJSD <= 0.5)."""
    _check_edges(p, q)
    m = 0.5 * (p.mass + q.mass)
    jsd = 0.5 * _kl(p.mass, m) + 0.5 * _kl(q.mass, m)
    return max(0.0, jsd) / _NJSD_NORM


def linear_regression(points: Sequence[Tuple[float, float]]) -> RegressionResult:
    """Ordinary least squares y = slope * x + intercept; r^2 is 0 when y is constant."""
    if len(points) < 2:
        raise ValidationError(f"regression needs at least 2 points, got {len(points)}")
    xy = np.asarray(points, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    if not np.all(np.isfinite(xy)):
        raise ValidationError("regression points must be finite")
    if np.all(x == x[0]):
        raise ValidationError("regression x values are all identical")
    fit = linregress(x, y)
    r_squared = 0.0 if np.all(y == y[0]) else min(1.0, max(0.0, float(fit.rvalue) ** 2))
    return RegressionResult(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=r_squared,
        n_points=len(points),
    )


def discretize_gaussian(dist: MetricDistribution, edges: Sequence[float]) -> Histogram:
    """Per-bin Gaussian mass, renormalized over the covered range."""
    edges = np.asarray(edges, dtype=float)
    if dist.variance <= 0:
        raise ValidationError("cannot discretize a zero-variance Gaussian (point mass)")
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValidationError("edges must be strictly ascending with at least two entries")
    cdf = std_normal_cdf((edges - dist.mean) / dist.std)
    mass = np.diff(cdf)
    total = float(np.sum(mass))
    if total <= 0:
        raise ValidationError("edges cover no Gaussian mass")
    return Histogram(edges=edges, mass=mass / total)


def comparison_edges(samples: Samples, dist: MetricDistribution, bins: int = 100) -> np.ndarray:
    """
    Common grid: union of the sample range and mean +- 5 sigma, widened by
    1% of the span on each side, split into `bins` equal-width bins.
    """
    values = sample_values(samples)
    lo = min(float(np.min(values)), dist.mean - GAUSSIAN_SUPPORT_SIGMAS * dist.std)
    hi = max(float(np.max(values)), dist.mean + GAUSSIAN_SUPPORT_SIGMAS * dist.std)
    span = hi - lo
    if span <= 0:
        span = 1.0
    return np.linspace(lo - GRID_MARGIN * span, hi + GRID_MARGIN * span, bins + 1)


def gaussian_njsd(samples: Samples, dist: MetricDistribution, bins: int = 100) -> float:
    """nJSD between the MC histogram and the discretized Gaussian on the common grid."""
    values = sample_values(samples)
    if dist.variance == 0.0:
        return 0.0 if np.all(values == dist.mean) else 0.5
    edges = comparison_edges(values, dist, bins)
    return njsd(histogram_on_edges(values, edges), discretize_gaussian(dist, edges))


def five_number_summary(values: Sequence[float]) -> Dict[str, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValidationError("summary needs at least one value")
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"min": float(q[0]), "q1": float(q[1]), "median": float(q[2]), "q3": float(q[3]), "max": float(q[4])}
