"""
Seeded Monte-Carlo convolution engine.

Trials are grouped in fixed-size blocks; block b draws from its own
PCG64 stream spawned from SeedSequence(seed, spawn_key=(b,)), so the
uniforms of trial t depend only on (seed, t, N). Blocks may run on any
number of worker threads and are always reduced in block order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Union

import numpy as np
from scipy.special import ndtri

from config import TRIAL_BLOCK
from models import (
    EmpiricalDistribution,
    EvaluationSet,
    FeedbackModel,
    Histogram,
    MetricDistribution,
    ValidationError,
)

logger = logging.getLogger(__name__)

METRICS = ("mse", "rmse", "mae")

# rng.random() can return exactly 0.0; ndtri(0) is -inf
_SMALLEST_UNIFORM = 2.0 ** -54

Samples = Union[EmpiricalDistribution, Sequence[float], np.ndarray]


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _open_uniforms(rng: np.random.Generator, shape) -> np.ndarray:
    return np.maximum(rng.random(shape), _SMALLEST_UNIFORM)


def trial_uniforms(seed: int, first_trial: int, n_trials: int, n_pairs: int) -> np.ndarray:
    """Uniforms on (0, 1) for trials [first_trial, first_trial + n_trials), one row per trial."""
    if first_trial < 0 or n_trials < 0 or n_pairs < 1:
        raise ValidationError("trial range and pair count must be non-negative (pairs >= 1)")
    rows = []
    t = first_trial
    end = first_trial + n_trials
    while t < end:
        block, offset = divmod(t, TRIAL_BLOCK)
        take = min(TRIAL_BLOCK - offset, end - t)
        block_rows = _open_uniforms(_block_rng(seed, block), (offset + take, n_pairs))
        rows.append(block_rows[offset:])
        t += take
    if not rows:
        return np.empty((0, n_pairs))
    return np.concatenate(rows, axis=0)


def sample_outcome(model: FeedbackModel, rng: np.random.Generator) -> float:
    """One draw from N(mu, sigma) by inverse CDF; consumes exactly one uniform."""
    u = max(float(rng.random()), _SMALLEST_UNIFORM)
    if model.sigma == 0.0:
        return model.mu
    return model.mu + model.sigma * float(ndtri(u))


def deviations(eval_set: EvaluationSet, uniforms: np.ndarray) -> np.ndarray:
    """Per-trial realized deviations x - pi (rows: trials, columns: pairs)."""
    outcomes = eval_set.mus + eval_set.sigmas * ndtri(uniforms)
    return outcomes - eval_set.predictions


def metric_values(dev: np.ndarray, metric: str) -> np.ndarray:
    """Metric per trial row; RMSE is exactly sqrt of the MSE of the same row."""
    n = dev.shape[1]
    if metric == "mae":
        return np.sum(np.abs(dev), axis=1) / n
    mse = np.sum(dev * dev, axis=1) / n
    if metric == "mse":
        return mse
    if metric == "rmse":
        return np.sqrt(mse)
    raise ValidationError(f"unknown metric {metric!r}; expected one of {METRICS}")


def map_trial_blocks(
    eval_set: EvaluationSet,
    tau: int,
    seed: int,
    reduce_block: Callable[[np.ndarray], np.ndarray],
    workers: int = 1,
) -> np.ndarray:
    """
    Run `reduce_block(deviations)` over all trial blocks and concatenate
    the per-trial results in trial order.
    """
    if tau < 1:
        raise ValidationError(f"tau must be >= 1, got {tau}")
    n_blocks = math.ceil(tau / TRIAL_BLOCK)

    def run(block: int) -> np.ndarray:
        first = block * TRIAL_BLOCK
        rows = min(TRIAL_BLOCK, tau - first)
        uniforms = _open_uniforms(_block_rng(seed, block), (rows, eval_set.n))
        return reduce_block(deviations(eval_set, uniforms))

    workers = max(1, int(workers))
    logger.debug("running %d trials in %d blocks on %d worker(s)", tau, n_blocks, workers)
    if workers == 1 or n_blocks == 1:
        parts: List[np.ndarray] = [run(b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    return np.concatenate(parts)


def simulate_metric(
    eval_set: EvaluationSet,
    metric: str,
    tau: int,
    seed: int,
    workers: int = 1,
) -> EmpiricalDistribution:
    """tau independent realizations of the metric; fully determined by (set, metric, tau, seed)."""
    metric = metric.lower()
    if metric not in METRICS:
        raise ValidationError(f"unknown metric {metric!r}; expected one of {METRICS}")
    values = map_trial_blocks(eval_set, tau, seed, lambda dev: metric_values(dev, metric), workers)
    return EmpiricalDistribution(samples=values, seed=seed, tau=tau, metric=metric)


def sample_values(samples: Samples) -> np.ndarray:
    if isinstance(samples, EmpiricalDistribution):
        return samples.samples
    return np.asarray(samples, dtype=float)


def fit_gaussian(samples: Samples) -> MetricDistribution:
    """Maximum-likelihood Gaussian: sample mean and variance divided by tau."""
    values = sample_values(samples)
    if values.size < 2:
        raise ValidationError(f"need at least 2 samples to fit a Gaussian, got {values.size}")
    return MetricDistribution(mean=float(np.mean(values)), variance=float(np.var(values)))


def standard_error(samples: Samples) -> float:
    """Standard error of the sample mean."""
    values = sample_values(samples)
    if values.size < 2:
        raise ValidationError(f"need at least 2 samples for a standard error, got {values.size}")
    return float(np.std(values, ddof=1)) / math.sqrt(values.size)


def to_histogram(samples: Samples, bins: int) -> Histogram:
    """
    Equal-width bins over [min, max] of the samples (last bin right-inclusive).
    Identical samples give a single bin of width 1 centred on the value.
    """
    values = sample_values(samples)
    if bins < 2:
        raise ValidationError(f"bins must be >= 2, got {bins}")
    if values.size < 1:
        raise ValidationError("need at least one sample")
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        logger.debug("all %d samples equal %r, single-bin histogram", values.size, lo)
        return Histogram(edges=np.array([lo - 0.5, lo + 0.5]), mass=np.array([1.0]))
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(edges=edges, mass=counts / values.size)


def histogram_on_edges(samples: Samples, edges: Sequence[float]) -> Histogram:
    """Normalized histogram on caller-given edges; samples outside the edges are ignored."""
    values = sample_values(samples)
    counts, edges = np.histogram(values, bins=np.asarray(edges, dtype=float))
    total = int(np.sum(counts))
    if total == 0:
        raise ValidationError("no sample falls inside the histogram edges")
    if total < values.size:
        logger.debug("%d of %d samples fall outside the grid", values.size - total, values.size)
    return Histogram(edges=edges, mass=counts / total)
