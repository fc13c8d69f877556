"""
Synthetic test data and the experiment drivers: parameter matching,
distribution similarity, sensitivity sweeps and error-probability curves.

Every driver is a deterministic function of its arguments and seed.
Sub-seeds are spawned from SeedSequence(seed, spawn_key=...) so that a
grid point does not depend on which other grid points were run.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from config import RATIO_TOL, TARGET_RATIO
from gof import five_number_summary, gaussian_njsd, linear_regression
from mc import fit_gaussian, simulate_metric
from models import (
    EvaluationSet,
    MetricDistribution,
    RegressionResult,
    RepeatedRatings,
    SweepSpec,
    SynthBounds,
    UnreachableTargetError,
    ValidationError,
)
from propagate import mse_moments, rmse_distribution, rmse_from_mse
from ranking import error_probability
from srmse import srmse_simulate

logger = logging.getLogger(__name__)

Row = Dict[str, object]


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit sub-seed for a grid point / replication."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))


def _check_n(n) -> int:
    if n < 1 or n != int(n):
        raise ValidationError(f"N must be a positive integer, got {n}")
    return int(n)


def sample_pairs(n: int, bounds: SynthBounds, seed: int) -> EvaluationSet:
    """
    n pairs with delta and sigma^2 drawn independently and uniformly from
    the bounds, realized as mu = delta, sigma = sqrt(sigma^2), prediction 0.
    """
    n = _check_n(n)
    rng = _rng(seed)
    deltas = rng.uniform(bounds.delta_range[0], bounds.delta_range[1], n)
    sigma_sq = rng.uniform(bounds.sigma_sq_range[0], bounds.sigma_sq_range[1], n)
    return EvaluationSet.from_arrays(deltas, np.sqrt(sigma_sq), np.zeros(n))


def stratified_sigma_sq(n: int, sigma_sq_range: Tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """One uniform draw per equal-width stratum of the interval, shuffled."""
    lo, hi = sigma_sq_range
    values = lo + (hi - lo) * (np.arange(n) + rng.random(n)) / n
    rng.shuffle(values)
    return values


# --- parameter matching / distribution similarity -------------------------

@dataclass(frozen=True)
class MatchingResult:
    rows: Tuple[Row, ...]
    mean_fit: RegressionResult
    variance_fit: Optional[RegressionResult]


@dataclass(frozen=True)
class SimilarityResult:
    rows: Tuple[Row, ...]
    summary: Dict[str, float]


def _check_replications(replications: int) -> None:
    if replications < 2:
        raise ValidationError(f"replications must be >= 2, got {replications}")


def _matched_sets(n_grid, replications, bounds, seed):
    for i, n in enumerate(n_grid):
        n = _check_n(n)
        for rep in range(replications):
            set_seed = derive_seed(seed, i, rep, 0)
            mc_seed = derive_seed(seed, i, rep, 1)
            yield n, rep, sample_pairs(n, bounds, set_seed), mc_seed


def parameter_matching(
    n_grid: Sequence[int],
    replications: int,
    tau: int,
    seed: int,
    bounds: SynthBounds = SynthBounds(),
    workers: int = 1,
) -> MatchingResult:
    """
    Analytic (mu_apr, var_apr) against MC-fitted (mu_sim, var_sim) per set,
    with separate OLS fits sim ~ apr for means and variances.
    """
    _check_replications(replications)
    rows: List[Row] = []
    for n, rep, eval_set, mc_seed in _matched_sets(n_grid, replications, bounds, seed):
        apr = rmse_distribution(eval_set)
        sim = fit_gaussian(simulate_metric(eval_set, "rmse", tau, mc_seed, workers))
        rows.append({
            "n": n,
            "replication": rep,
            "mu_apr": apr.mean,
            "mu_sim": sim.mean,
            "var_apr": apr.variance,
            "var_sim": sim.variance,
        })
        logger.debug("N=%d rep=%d mu_apr=%.6f mu_sim=%.6f", n, rep, apr.mean, sim.mean)

    mean_fit = linear_regression([(r["mu_apr"], r["mu_sim"]) for r in rows])
    try:
        variance_fit = linear_regression([(r["var_apr"], r["var_sim"]) for r in rows])
    except ValidationError:
        logger.warning("analytic variances are all equal (zero-uncertainty bounds?); variance fit skipped")
        variance_fit = None
    return MatchingResult(rows=tuple(rows), mean_fit=mean_fit, variance_fit=variance_fit)


def distribution_similarity(
    n_grid: Sequence[int],
    replications: int,
    tau: int,
    bins: int,
    seed: int,
    bounds: SynthBounds = SynthBounds(),
    workers: int = 1,
) -> SimilarityResult:
    """nJSD between each set's MC histogram and its analytic Gaussian, plus a five-number summary."""
    _check_replications(replications)
    rows: List[Row] = []
    for n, rep, eval_set, mc_seed in _matched_sets(n_grid, replications, bounds, seed):
        samples = simulate_metric(eval_set, "rmse", tau, mc_seed, workers)
        value = gaussian_njsd(samples, rmse_distribution(eval_set), bins)
        rows.append({"n": n, "replication": rep, "njsd": value})
    summary = five_number_summary([r["njsd"] for r in rows])
    logger.info("nJSD median=%.4g q3=%.4g max=%.4g", summary["median"], summary["q3"], summary["max"])
    return SimilarityResult(rows=tuple(rows), summary=summary)


# --- sensitivity ----------------------------------------------------------

def _argument_values(value, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(value, (tuple, list)):
        lo, hi = float(value[0]), float(value[1])
        if lo > hi:
            raise ValidationError(f"interval lower bound exceeds upper ({lo}, {hi})")
        return rng.uniform(lo, hi, n)
    return np.full(n, float(value))


def sensitivity_sweep(spec: SweepSpec) -> List[Row]:
    """
    Analytic RMSE mean and variance per grid point, reported as the mean
    over replications with the min/max envelope as band edges.
    """
    rows: List[Row] = []
    for gi, g in enumerate(spec.grid):
        args = dict(spec.fixed)
        args[spec.varied] = g
        n = _check_n(args["n"])
        means, variances = [], []
        for rep in range(spec.replications):
            rng = _rng(spec.seed, gi, rep)
            deltas = _argument_values(args["delta"], n, rng)
            sigma_sq = _argument_values(args["sigma_sq"], n, rng)
            if np.any(sigma_sq < 0):
                raise ValidationError("sigma_sq must be >= 0")
            dist = rmse_from_mse(mse_moments(deltas, np.sqrt(sigma_sq)))
            means.append(dist.mean)
            variances.append(dist.variance)
        rows.append({
            "varied": spec.varied,
            "value": g,
            "mu_rmse": float(np.mean(means)),
            "mu_rmse_min": float(np.min(means)),
            "mu_rmse_max": float(np.max(means)),
            "var_rmse": float(np.mean(variances)),
            "var_rmse_min": float(np.min(variances)),
            "var_rmse_max": float(np.max(variances)),
        })
    return rows


# --- error probability ----------------------------------------------------

def reference_sigma_levels(bounds: SynthBounds = SynthBounds()) -> Tuple[float, float, float]:
    """Low, mid and high sigma^2 set points: the interval ends and its midpoint."""
    lo, hi = bounds.sigma_sq_range
    return lo, 0.5 * (lo + hi), hi


def _scaled_rmse(deltas: np.ndarray, sigmas: np.ndarray, c: float) -> MetricDistribution:
    return rmse_from_mse(mse_moments(c * deltas, sigmas))


def scale_for_ratio(
    deltas: Sequence[float],
    sigmas: Sequence[float],
    ratio: float = TARGET_RATIO,
) -> float:
    """
    Deviation scale c in [0, 1] with mu_RMSE(c * delta, sigma) = ratio * mu_RMSE(delta, sigma).
    Raises UnreachableTargetError when sigma alone already exceeds the target.
    """
    deltas = np.asarray(deltas, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"target ratio must lie in (0, 1), got {ratio}")
    reference = _scaled_rmse(deltas, sigmas, 1.0).mean
    if reference == 0.0:
        raise UnreachableTargetError("reference RMSE is 0; no better system exists")

    def gap(c: float) -> float:
        return _scaled_rmse(deltas, sigmas, c).mean / reference - ratio

    floor = gap(0.0)
    if floor > 0.0:
        raise UnreachableTargetError(
            f"uncertainty alone gives ratio {floor + ratio:.6f} > target {ratio}"
        )
    c = 0.0 if floor == 0.0 else brentq(gap, 0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    if abs(gap(c)) > RATIO_TOL:
        raise UnreachableTargetError(f"ratio tolerance not met (|gap|={abs(gap(c)):.3g})")
    return float(c)


def _system_pair(deltas: np.ndarray, sigmas: np.ndarray, ratio: float) -> Tuple[float, MetricDistribution, MetricDistribution]:
    c = scale_for_ratio(deltas, sigmas, ratio)
    return c, _scaled_rmse(deltas, sigmas, 1.0), _scaled_rmse(deltas, sigmas, c)


def _error_row(delta: float, n: int, level: Optional[float], deltas, sigmas, ratio: float) -> Row:
    row: Row = {"delta": delta, "n": n, "sigma_sq_level": level}
    try:
        c, a, b = _system_pair(deltas, sigmas, ratio)
    except UnreachableTargetError as exc:
        logger.debug("delta=%g N=%d unreachable: %s", delta, n, exc)
        row.update({"scale": None, "mu_a": None, "mu_b": None, "error_probability": None, "status": "unreachable"})
        return row
    row.update({
        "scale": c,
        "mu_a": a.mean,
        "mu_b": b.mean,
        "error_probability": error_probability(b, a),
        "status": "ok",
    })
    return row


def error_probability_sweep(
    delta_grid: Sequence[float],
    n_grid: Optional[Sequence[int]] = None,
    sigma_levels: Optional[Sequence[float]] = None,
    n: int = 1000,
    bounds: SynthBounds = SynthBounds(),
    seed: int = 0,
    ratio: float = TARGET_RATIO,
) -> List[Row]:
    """
    System A has every delta equal to the grid value; system B scales the
    deviations so its mean RMSE is `ratio` of A's; the error is P(Z_B >= Z_A).

    With n_grid, sigma^2 is drawn once per N (stratified) and shared across
    the delta grid; with sigma_levels, every pair takes the level at size n.
    """
    if not delta_grid:
        raise ValidationError("delta grid must be non-empty")
    if (n_grid is None) == (sigma_levels is None):
        raise ValidationError("give exactly one of n_grid or sigma_levels")
    rows: List[Row] = []
    if n_grid is not None:
        if not n_grid:
            raise ValidationError("N grid must be non-empty")
        for i, size in enumerate(n_grid):
            size = _check_n(size)
            sigmas = np.sqrt(stratified_sigma_sq(size, bounds.sigma_sq_range, _rng(seed, i)))
            for delta in delta_grid:
                rows.append(_error_row(float(delta), size, None, np.full(size, float(delta)), sigmas, ratio))
    else:
        if not sigma_levels:
            raise ValidationError("sigma levels must be non-empty")
        size = _check_n(n)
        for level in sigma_levels:
            if level < 0:
                raise ValidationError(f"sigma^2 level must be >= 0, got {level}")
            sigmas = np.full(size, math.sqrt(level))
            for delta in delta_grid:
                rows.append(_error_row(float(delta), size, float(level), np.full(size, float(delta)), sigmas, ratio))
    unreachable = sum(1 for r in rows if r["status"] == "unreachable")
    if unreachable:
        logger.info("%d of %d grid points cannot reach the target ratio", unreachable, len(rows))
    return rows


def find_crossing(rows: Sequence[Row], threshold: float = 0.05, column: str = "error_probability") -> Optional[float]:
    """Smallest delta whose error falls below the threshold, or None."""
    hits = [float(r["delta"]) for r in rows if r.get(column) is not None and r[column] < threshold]
    return min(hits) if hits else None


def srmse_error_comparison(
    delta_grid: Sequence[float],
    n: int,
    alpha: float,
    tau: int,
    seed: int,
    bounds: SynthBounds = SynthBounds(),
    ratio: float = TARGET_RATIO,
    normalize: str = "kept",
    null_model: str = "feedback",
    empty: str = "zero",
    workers: int = 1,
) -> Tuple[List[Row], Dict[str, Optional[float]]]:
    """
    Error probabilities from MC-fitted RMSE and sRMSE distributions of the
    same system pair. Both metrics and both systems share the trial seed
    of a grid point, so alpha -> 1 yields identical curves.
    """
    if not delta_grid:
        raise ValidationError("delta grid must be non-empty")
    size = _check_n(n)
    sigmas = np.sqrt(stratified_sigma_sq(size, bounds.sigma_sq_range, _rng(seed, 0)))
    zeros = np.zeros(size)
    rows: List[Row] = []
    for gi, delta in enumerate(delta_grid):
        delta = float(delta)
        deltas = np.full(size, delta)
        row: Row = {"delta": delta, "n": size, "alpha": alpha}
        try:
            c = scale_for_ratio(deltas, sigmas, ratio)
        except UnreachableTargetError as exc:
            logger.debug("delta=%g unreachable: %s", delta, exc)
            row.update({"scale": None, "error_rmse": None, "error_srmse": None, "status": "unreachable"})
            rows.append(row)
            continue
        trial_seed = derive_seed(seed, 1, gi)
        system_a = EvaluationSet.from_arrays(deltas, sigmas, zeros)
        system_b = EvaluationSet.from_arrays(c * deltas, sigmas, zeros)
        rmse_a = fit_gaussian(simulate_metric(system_a, "rmse", tau, trial_seed, workers))
        rmse_b = fit_gaussian(simulate_metric(system_b, "rmse", tau, trial_seed, workers))
        srmse_a = fit_gaussian(srmse_simulate(system_a, alpha, tau, trial_seed, normalize, null_model, empty, workers))
        srmse_b = fit_gaussian(srmse_simulate(system_b, alpha, tau, trial_seed, normalize, null_model, empty, workers))
        row.update({
            "scale": c,
            "error_rmse": error_probability(rmse_b, rmse_a),
            "error_srmse": error_probability(srmse_b, srmse_a),
            "status": "ok",
        })
        rows.append(row)
        logger.debug("delta=%g err_rmse=%.4g err_srmse=%.4g", delta, row["error_rmse"], row["error_srmse"])
    crossings = {
        "rmse": find_crossing(rows, column="error_rmse"),
        "srmse": find_crossing(rows, column="error_srmse"),
    }
    return rows, crossings


# --- synthetic repeated ratings -------------------------------------------

RATER_MIX = (("constant", 0.35), ("two-category", 0.50), ("three-plus", 0.15))
RATING_SCALE = (1, 5)


def _window(base: int, width: int) -> List[int]:
    lo = min(max(base - width // 2, RATING_SCALE[0]), RATING_SCALE[1] - width + 1)
    return list(range(lo, lo + width))


def _rater_trials(kind: str, base: int, n_trials: int, rng: np.random.Generator) -> List[int]:
    if kind == "constant" or n_trials == 1:
        return [base] * n_trials
    width = 2 if kind == "two-category" or n_trials == 2 else 3
    values = _window(base, width)
    # every category of the window shows up at least once
    trials = list(values) + [int(v) for v in rng.choice(values, n_trials - width)]
    rng.shuffle(trials)
    return trials


def synthetic_study(n_users: int, n_items: int, n_trials: int, seed: int) -> Tuple[RepeatedRatings, Dict[str, str]]:
    """
    Labeled-synthetic repeated ratings on a 1-5 scale. Each user is a
    constant, two-category or three-plus rater (35% / 50% / 15%).
    Returns the ratings and the rater kind per user.
    """
    for name, value in (("n_users", n_users), ("n_items", n_items), ("n_trials", n_trials)):
        if value < 1:
            raise ValidationError(f"{name} must be >= 1, got {value}")
    rng = _rng(seed)
    kinds = [k for k, _ in RATER_MIX]
    weights = [w for _, w in RATER_MIX]
    user_width = len(str(n_users))
    item_width = len(str(n_items))
    entries = {}
    rater_kinds: Dict[str, str] = {}
    for u in range(n_users):
        user = f"u{u + 1:0{user_width}d}"
        kind = str(rng.choice(kinds, p=weights))
        rater_kinds[user] = kind
        for i in range(n_items):
            item = f"i{i + 1:0{item_width}d}"
            base = int(rng.integers(RATING_SCALE[0], RATING_SCALE[1] + 1))
            ratings = _rater_trials(kind, base, n_trials, rng)
            entries[(user, item)] = tuple((t + 1, float(r)) for t, r in enumerate(ratings))
    logger.info("synthetic study: %d users x %d items x %d trials", n_users, n_items, n_trials)
    return RepeatedRatings(entries=entries), rater_kinds
