"""
Ranking of systems by metric distributions and the probability that a
repeated evaluation inverts a pairwise ranking.
"""

import logging
import math
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erfc

from models import (
    EmpiricalDistribution,
    MetricDistribution,
    RankingFrequency,
    RankingReport,
    ValidationError,
)

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


def std_normal_cdf(x):
    """
    Phi(x) via the complementary error function. The lower tail is always
    computed directly, so Phi(-x) = 1 - Phi(x) holds by construction and
    deep tails keep their relative accuracy. Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("std_normal_cdf needs finite input")
    lower_tail = 0.5 * erfc(np.abs(arr) / _SQRT2)
    result = np.where(arr < 0, lower_tail, 1.0 - lower_tail)
    if result.ndim == 0:
        return float(result)
    return result


def error_probability(a: MetricDistribution, b: MetricDistribution) -> float:
    """
    P(Z_a >= Z_b) = Phi((mu_a - mu_b) / sqrt(var_a + var_b)).
    Without any variance the outcome is decided by the means (0.5 on a tie).
    """
    total = a.variance + b.variance
    if total == 0.0:
        if a.mean < b.mean:
            return 0.0
        if a.mean > b.mean:
            return 1.0
        return 0.5
    return std_normal_cdf((a.mean - b.mean) / math.sqrt(total))


def empirical_error_probability(
    samples_a: Union[EmpiricalDistribution, Sequence[float]],
    samples_b: Union[EmpiricalDistribution, Sequence[float]],
) -> float:
    """Share of paired trials (shared seeds) in which a scores >= b."""
    a = samples_a.samples if isinstance(samples_a, EmpiricalDistribution) else np.asarray(samples_a, dtype=float)
    b = samples_b.samples if isinstance(samples_b, EmpiricalDistribution) else np.asarray(samples_b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValidationError(f"paired samples must have equal non-zero length, got {a.size} and {b.size}")
    return float(np.count_nonzero(a >= b)) / a.size


def rank_systems(
    systems: Sequence[Tuple[str, MetricDistribution]],
    p_max: float = 0.05,
) -> RankingReport:
    """Order by ascending mean (ties by id) and fill the pairwise error matrix."""
    if len(systems) < 2:
        raise ValidationError(f"ranking needs at least 2 systems, got {len(systems)}")
    if not 0.0 < p_max < 1.0:
        raise ValidationError(f"p_max must lie in (0, 1), got {p_max}")
    seen = set()
    for i, (system_id, _) in enumerate(systems):
        if system_id in seen:
            raise ValidationError(f"duplicate system identifier {system_id!r}", index=i)
        seen.add(system_id)

    ordered = sorted(systems, key=lambda s: (s[1].mean, s[0]))
    size = len(ordered)
    matrix = [[0.0] * size for _ in range(size)]
    flags = [[False] * size for _ in range(size)]
    for i in range(size):
        for j in range(size):
            matrix[i][j] = error_probability(ordered[i][1], ordered[j][1])
            flags[i][j] = i < j and matrix[i][j] < p_max

    report = RankingReport(
        order=tuple(s[0] for s in ordered),
        means=tuple(s[1].mean for s in ordered),
        variances=tuple(s[1].variance for s in ordered),
        error_matrix=tuple(tuple(row) for row in matrix),
        distinguishable=tuple(tuple(row) for row in flags),
        p_max=p_max,
    )
    logger.debug("ranked %d systems: %s", size, " < ".join(report.order))
    return report


def ranking_frequencies(
    scores: Union[Sequence[Sequence[float]], np.ndarray],
    system_ids: Optional[Sequence[str]] = None,
) -> RankingFrequency:
    """
    Count the per-trial rankings of a trials x systems score matrix.
    Each trial sorts systems ascending by score, ties by identifier.
    """
    rows = [list(row) for row in scores]
    if not rows:
        raise ValidationError("need at least one trial")
    width = len(rows[0])
    for t, row in enumerate(rows):
        if len(row) != width:
            raise ValidationError(f"ragged score matrix: {len(row)} scores, expected {width}", index=t)
    if width < 2:
        raise ValidationError(f"need at least 2 systems, got {width}")
    if system_ids is None:
        system_ids = [f"S{k + 1}" for k in range(width)]
    if len(system_ids) != width:
        raise ValidationError(f"{len(system_ids)} system ids for {width} score columns")
    if len(set(system_ids)) != width:
        raise ValidationError("system identifiers must be unique")

    counts: Counter = Counter()
    for t, row in enumerate(rows):
        values = [float(v) for v in row]
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("non-finite score", index=t)
        permutation = tuple(sid for _, sid in sorted(zip(values, system_ids)))
        counts[permutation] += 1
    ordered: Dict[Tuple[str, ...], int] = dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return RankingFrequency(counts=ordered, n_trials=len(rows))


def frequencies_from_samples(named_samples: Sequence[Tuple[str, EmpiricalDistribution]]) -> RankingFrequency:
    """Ranking frequencies over MC trials of several systems simulated under shared seeds."""
    ids = [name for name, _ in named_samples]
    lengths = {len(s.samples) for _, s in named_samples}
    if len(lengths) != 1:
        raise ValidationError("systems must share the same number of trials")
    matrix: List[np.ndarray] = [s.samples for _, s in named_samples]
    return ranking_frequencies(np.column_stack(matrix), ids)
