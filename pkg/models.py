"""
Domain types shared by every module.

Feedback for one user-item pair is a Gaussian N(mu, sigma) on the rating
scale; an EvaluationSet pairs those models with one system's predictions.
All types are immutable after construction.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np


class ValidationError(ValueError):
    """Input violates a documented precondition; names the offending position."""

    def __init__(self, message: str, index: Optional[int] = None, line: Optional[int] = None):
        self.index = index
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        elif index is not None:
            message = f"index {index}: {message}"
        super().__init__(message)


class IngestError(ValidationError):
    """Malformed ratings/predictions/models file."""


class UnreachableTargetError(ValidationError):
    """A system construction cannot reach the requested metric ratio."""


RMSE_FAMILY = ("mse", "rmse", "mae", "srmse")


def _read_only(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeedbackModel:
    """
    Feedback distribution X = sigma * I + mu of one user-item pair, I ~ N(0, 1).
    sigma = 0 is a point mass (a constant rater).
    """
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValidationError(f"feedback model must be finite, got N({self.mu}, {self.sigma})")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def variance(self) -> float:
        return self.sigma * self.sigma


@dataclass(frozen=True)
class EvaluationSet:
    """
    Feedback models paired with one system's predictions.
    delta = mu - prediction is always derived, never stored.
    """
    pairs: Tuple[Tuple[FeedbackModel, float], ...]
    pair_ids: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if len(self.pairs) == 0:
            raise ValidationError("evaluation set needs at least one pair")
        for i, (model, prediction) in enumerate(self.pairs):
            if not isinstance(model, FeedbackModel):
                raise ValidationError(f"expected FeedbackModel, got {type(model).__name__}", index=i)
            if not math.isfinite(prediction):
                raise ValidationError(f"prediction is not finite ({prediction})", index=i)
        if self.pair_ids is not None and len(self.pair_ids) != len(self.pairs):
            raise ValidationError(
                f"{len(self.pair_ids)} pair ids for {len(self.pairs)} pairs"
            )

    @classmethod
    def from_arrays(
        cls,
        mus: Sequence[float],
        sigmas: Sequence[float],
        predictions: Sequence[float],
        pair_ids: Optional[Sequence[str]] = None,
    ) -> "EvaluationSet":
        """Vectorized construction used by the experiment drivers."""
        mus = np.asarray(mus, dtype=float)
        sigmas = np.asarray(sigmas, dtype=float)
        predictions = np.asarray(predictions, dtype=float)
        if not (len(mus) == len(sigmas) == len(predictions)):
            raise ValidationError(
                f"length mismatch: {len(mus)} mus, {len(sigmas)} sigmas, "
                f"{len(predictions)} predictions"
            )
        if len(mus) == 0:
            raise ValidationError("evaluation set needs at least one pair")
        for name, arr in (("mu", mus), ("sigma", sigmas), ("prediction", predictions)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise ValidationError(f"{name} is not finite ({arr[bad[0]]})", index=int(bad[0]))
        negative = np.flatnonzero(sigmas < 0)
        if negative.size:
            raise ValidationError(f"sigma must be >= 0, got {sigmas[negative[0]]}", index=int(negative[0]))
        pairs = tuple(
            (FeedbackModel(float(m), float(s)), float(p))
            for m, s, p in zip(mus, sigmas, predictions)
        )
        ids = tuple(pair_ids) if pair_ids is not None else None
        return cls(pairs=pairs, pair_ids=ids)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def n(self) -> int:
        return len(self.pairs)

    @cached_property
    def mus(self) -> np.ndarray:
        return _read_only([m.mu for m, _ in self.pairs])

    @cached_property
    def sigmas(self) -> np.ndarray:
        return _read_only([m.sigma for m, _ in self.pairs])

    @cached_property
    def predictions(self) -> np.ndarray:
        return _read_only([p for _, p in self.pairs])

    @cached_property
    def deltas(self) -> np.ndarray:
        return _read_only(self.mus - self.predictions)

    def duplicated(self, times: int = 2) -> "EvaluationSet":
        """Every pair repeated `times` times (N -> times * N)."""
        if times < 1:
            raise ValidationError(f"times must be >= 1, got {times}")
        ids = None
        if self.pair_ids is not None:
            ids = tuple(f"{pid}#{k}" for k in range(times) for pid in self.pair_ids)
        return EvaluationSet(pairs=self.pairs * times, pair_ids=ids)


def make_evaluation_set(
    models: Sequence[FeedbackModel],
    predictions: Sequence[float],
    pair_ids: Optional[Sequence[str]] = None,
) -> EvaluationSet:
    """Validate and pair feedback models with predictions."""
    if len(models) == 0 or len(predictions) == 0:
        raise ValidationError("models and predictions must be non-empty")
    if len(models) != len(predictions):
        raise ValidationError(
            f"length mismatch: {len(models)} models vs {len(predictions)} predictions",
            index=min(len(models), len(predictions)),
        )
    pairs = []
    for i, (model, prediction) in enumerate(zip(models, predictions)):
        try:
            value = float(prediction)
        except (TypeError, ValueError):
            raise ValidationError(f"prediction is not a number ({prediction!r})", index=i)
        if not math.isfinite(value):
            raise ValidationError(f"prediction is not finite ({value})", index=i)
        pairs.append((model, value))
    return EvaluationSet(pairs=tuple(pairs), pair_ids=tuple(pair_ids) if pair_ids is not None else None)


@dataclass(frozen=True)
class MetricDistribution:
    """Gaussian approximation of a metric's outcome distribution."""
    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise ValidationError(f"metric distribution must be finite, got ({self.mean}, {self.variance})")
        if self.variance < 0:
            raise ValidationError(f"variance must be >= 0, got {self.variance}")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "variance": self.variance, "std": self.std}


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """
    Monte-Carlo metric outcomes plus provenance.
    tau counts the retained samples; requested_tau the trials that were run.
    """
    samples: np.ndarray
    seed: int
    tau: int
    metric: str = "rmse"
    requested_tau: Optional[int] = None

    def __post_init__(self):
        samples = _read_only(self.samples)
        object.__setattr__(self, "samples", samples)
        if self.requested_tau is None:
            object.__setattr__(self, "requested_tau", self.tau)
        if samples.ndim != 1 or len(samples) != self.tau:
            raise ValidationError(f"expected {self.tau} samples, got {samples.size}")
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            raise ValidationError(f"sample is not finite ({samples[bad[0]]})", index=int(bad[0]))
        if self.metric in RMSE_FAMILY:
            negative = np.flatnonzero(samples < 0)
            if negative.size:
                raise ValidationError(
                    f"{self.metric} sample is negative ({samples[negative[0]]})", index=int(negative[0])
                )

    def __len__(self) -> int:
        return self.tau


@dataclass(frozen=True, eq=False)
class Histogram:
    """Per-bin probability mass on ascending bin edges."""
    edges: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        edges = _read_only(self.edges)
        mass = _read_only(self.mass)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "mass", mass)
        if edges.ndim != 1 or len(edges) < 2:
            raise ValidationError("histogram needs at least two edges")
        if np.any(np.diff(edges) <= 0):
            raise ValidationError("histogram edges must be strictly ascending")
        if len(mass) != len(edges) - 1:
            raise ValidationError(f"{len(mass)} masses for {len(edges) - 1} bins")
        if np.any(mass < 0):
            raise ValidationError("histogram mass must be >= 0")
        if abs(float(np.sum(mass)) - 1.0) > 1e-12:
            raise ValidationError(f"histogram mass sums to {float(np.sum(mass))}, not 1")

    @property
    def bins(self) -> int:
        return len(self.mass)


@dataclass(frozen=True)
class MomentVector:
    """Expectation mu and central moments m_1..m_K of a random argument."""
    mu: float
    central_moments: Tuple[float, ...]

    def __post_init__(self):
        moments = tuple(float(m) for m in self.central_moments)
        object.__setattr__(self, "central_moments", moments)
        if not all(math.isfinite(m) for m in moments) or not math.isfinite(self.mu):
            raise ValidationError("moments must be finite")
        if moments and moments[0] != 0.0:
            raise ValidationError(f"first central moment must be 0, got {moments[0]}")
        for k in range(2, len(moments) + 1, 2):
            if moments[k - 1] < 0:
                raise ValidationError(f"even central moment m_{k} must be >= 0")

    @property
    def order(self) -> int:
        return len(self.central_moments)

    def moment(self, k: int) -> float:
        """m_k with the conventions m_0 = 1 and m_1 = 0."""
        if k == 0:
            return 1.0
        if k > self.order:
            raise ValidationError(f"central moment m_{k} not available (have up to m_{self.order})")
        return self.central_moments[k - 1]


@dataclass(frozen=True)
class DerivativeEvaluations:
    """g(mu), g'(mu), ..., g^(K)(mu)."""
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise ValidationError("need at least g(mu)")
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("derivative evaluations must be finite")

    @property
    def order(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int = 0

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
        }


@dataclass(frozen=True)
class SignificanceInterval:
    """Acceptance region [center - half_width, center + half_width] at level alpha."""
    center: float
    half_width: float
    alpha: float

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class RankingReport:
    """
    Systems in ascending order of metric mean, with the pairwise matrix
    error_matrix[i][j] = P(Z_i >= Z_j) in that order.
    """
    order: Tuple[str, ...]
    means: Tuple[float, ...]
    variances: Tuple[float, ...]
    error_matrix: Tuple[Tuple[float, ...], ...]
    distinguishable: Tuple[Tuple[bool, ...], ...]
    p_max: float

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "means": list(self.means),
            "variances": list(self.variances),
            "error_matrix": [list(row) for row in self.error_matrix],
            "distinguishable": [list(row) for row in self.distinguishable],
            "p_max": self.p_max,
        }

    def to_rows(self) -> List[dict]:
        """Long format: one row per ordered pair (i before j)."""
        rows = []
        for i, system_i in enumerate(self.order):
            for j in range(i + 1, len(self.order)):
                rows.append({
                    "system_i": system_i,
                    "system_j": self.order[j],
                    "error_probability": self.error_matrix[i][j],
                    "distinguishable": self.distinguishable[i][j],
                })
        return rows


@dataclass(frozen=True)
class RankingFrequency:
    """Occurrence count of each per-trial ranking (ascending score order)."""
    counts: Dict[Tuple[str, ...], int]
    n_trials: int

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "counts": {",".join(perm): count for perm, count in self.counts.items()},
        }


@dataclass(frozen=True)
class RepeatedRatings:
    """
    Repeated ratings per (user_id, item_id); each pair holds (trial, rating)
    tuples sorted by trial index. Pair order is first appearance in the source.
    """
    entries: Dict[Tuple[str, str], Tuple[Tuple[int, float], ...]]

    def __post_init__(self):
        for pair, ratings in self.entries.items():
            if not ratings:
                raise ValidationError(f"pair {pair[0]}/{pair[1]} has no ratings")
            trials = [t for t, _ in ratings]
            if len(set(trials)) != len(trials):
                raise ValidationError(f"pair {pair[0]}/{pair[1]} repeats a trial index")
            if any(t < 1 for t in trials):
                raise ValidationError(f"pair {pair[0]}/{pair[1]} has a trial index < 1")
            if any(not math.isfinite(r) for _, r in ratings):
                raise ValidationError(f"pair {pair[0]}/{pair[1]} has a non-finite rating")
            if trials != sorted(trials):
                raise ValidationError(f"pair {pair[0]}/{pair[1]} ratings are not ordered by trial")

    @property
    def pairs(self) -> List[Tuple[str, str]]:
        return list(self.entries.keys())

    def ratings(self, pair: Tuple[str, str]) -> List[float]:
        return [r for _, r in self.entries[pair]]

    def trial_indices(self) -> List[int]:
        return sorted({t for ratings in self.entries.values() for t, _ in ratings})


Interval = Tuple[float, float]


@dataclass(frozen=True)
class SynthBounds:
    delta_range: Interval = (0.0, 4.0)
    sigma_sq_range: Interval = (0.16, 3.86)

    def __post_init__(self):
        for name, (lo, hi) in (("delta_range", self.delta_range), ("sigma_sq_range", self.sigma_sq_range)):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValidationError(f"{name} must be a finite interval with lower <= upper, got ({lo}, {hi})")
        if self.sigma_sq_range[0] < 0:
            raise ValidationError(f"sigma_sq_range lower bound must be >= 0, got {self.sigma_sq_range[0]}")
        object.__setattr__(self, "delta_range", tuple(float(v) for v in self.delta_range))
        object.__setattr__(self, "sigma_sq_range", tuple(float(v) for v in self.sigma_sq_range))


SWEEP_ARGUMENTS = ("n", "delta", "sigma_sq")


@dataclass(frozen=True)
class SweepSpec:
    """
    One-argument sensitivity sweep. `fixed` gives the other two arguments:
    a scalar pins every pair, a [lo, hi] interval is sampled per replication.
    """
    varied: str
    grid: Tuple[float, ...]
    fixed: Dict[str, Union[float, Interval]] = field(default_factory=dict)
    replications: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.varied not in SWEEP_ARGUMENTS:
            raise ValidationError(f"varied must be one of {SWEEP_ARGUMENTS}, got {self.varied!r}")
        grid = tuple(float(g) for g in self.grid)
        object.__setattr__(self, "grid", grid)
        if not grid:
            raise ValidationError("sweep grid must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("sweep grid must be ascending")
        if self.replications < 1:
            raise ValidationError(f"replications must be >= 1, got {self.replications}")
        missing = [a for a in SWEEP_ARGUMENTS if a != self.varied and a not in self.fixed]
        if missing:
            raise ValidationError(f"sweep needs fixed values for {', '.join(missing)}")
        if self.varied == "n" and any(g < 1 or g != int(g) for g in grid):
            raise ValidationError("N grid must hold positive integers")
        if self.varied != "n" and not isinstance(self.fixed["n"], (int, float)):
            raise ValidationError("fixed N must be a scalar")
