"""
Significance-filtered RMSE (sRMSE).

Per pair and trial, a realized rating x is tested against H0: x = pi at
level alpha. Deviations inside the acceptance interval [pi - a, pi + a]
are attributed to human uncertainty and dropped; the rest are scored.
"""

import logging
import math
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from config import BISECTION_TOL, FILTER_OFF_ALPHA
from mc import fit_gaussian, map_trial_blocks, metric_values
from models import (
    EmpiricalDistribution,
    EvaluationSet,
    FeedbackModel,
    MetricDistribution,
    SignificanceInterval,
    ValidationError,
)
from ranking import std_normal_cdf

logger = logging.getLogger(__name__)

NULL_MODELS = ("feedback", "prediction")
NORMALIZATIONS = ("kept", "all")
EMPTY_POLICIES = ("zero", "drop")

_MAX_BISECTIONS = 200


def _check_alpha(alpha: float, allow_one: bool = False) -> None:
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (alpha > 0.0 and upper_ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ValidationError(f"alpha must lie in {bound}, got {alpha}")


def _check_choice(name: str, value: str, choices) -> None:
    if value not in choices:
        raise ValidationError(f"{name} must be one of {choices}, got {value!r}")


def interval_mass(half_widths, mus, sigmas, predictions) -> np.ndarray:
    """Feedback mass N(mu, sigma) on [pi - a, pi + a]; sigma must be > 0."""
    upper = (predictions + half_widths - mus) / sigmas
    lower = (predictions - half_widths - mus) / sigmas
    return std_normal_cdf(upper) - std_normal_cdf(lower)


def significance_half_widths(
    mus: Sequence[float],
    sigmas: Sequence[float],
    predictions: Sequence[float],
    alpha: float,
    null_model: str = "feedback",
) -> np.ndarray:
    """
    Half width a per pair such that the acceptance interval holds mass 1 - alpha.

    feedback:   mass measured under N(mu, sigma), solved by vectorized bisection
    prediction: density re-centred on pi, a = sigma * z_(1 - alpha/2)
    Point masses (sigma = 0) get a = 0.
    """
    _check_alpha(alpha)
    _check_choice("null_model", null_model, NULL_MODELS)
    mus = np.asarray(mus, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    z = float(ndtri(1.0 - alpha / 2.0))
    if null_model == "prediction":
        return sigmas * z

    widths = np.zeros_like(mus)
    live = sigmas > 0
    if not np.any(live):
        return widths
    mu, sigma, pi = mus[live], sigmas[live], predictions[live]
    lo = np.zeros_like(mu)
    # [mu - z sigma, mu + z sigma] already holds 1 - alpha and lies inside this bracket
    hi = np.abs(mu - pi) + sigma * z
    hi = hi + np.maximum(hi, 1.0) * 1e-9
    target = 1.0 - alpha
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        below = interval_mass(mid, mu, sigma, pi) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= BISECTION_TOL * np.maximum(1.0, hi)):
            break
    widths[live] = 0.5 * (lo + hi)
    return widths


def significance_interval(
    model: FeedbackModel,
    prediction: float,
    alpha: float,
    null_model: str = "feedback",
) -> SignificanceInterval:
    """Acceptance interval of H0: x = prediction for one pair."""
    _check_alpha(alpha)
    if model.sigma == 0.0:
        raise ValidationError("significance interval needs sigma > 0 (point mass has no density)")
    if not math.isfinite(prediction):
        raise ValidationError(f"prediction is not finite ({prediction})")
    width = significance_half_widths([model.mu], [model.sigma], [prediction], alpha, null_model)
    return SignificanceInterval(center=float(prediction), half_width=float(width[0]), alpha=alpha)


def _filter_reducer(half_widths: np.ndarray, normalize: str, empty: str):
    def reduce_block(dev: np.ndarray) -> np.ndarray:
        # closed acceptance interval: keep only |x - pi| > a
        keep = np.abs(dev) > half_widths
        sq = dev * dev
        total = np.sum(np.where(keep, sq, 0.0), axis=1)
        kept = np.count_nonzero(keep, axis=1)
        if normalize == "all":
            values = np.sqrt(total / dev.shape[1])
        else:
            values = np.sqrt(total / np.maximum(kept, 1))
        fill = 0.0 if empty == "zero" else np.nan
        return np.where(kept > 0, values, fill)

    return reduce_block


def srmse_simulate(
    eval_set: EvaluationSet,
    alpha: float,
    tau: int,
    seed: int,
    normalize: str = "kept",
    null_model: str = "feedback",
    empty: str = "zero",
    workers: int = 1,
) -> EmpiricalDistribution:
    """
    tau sRMSE realizations on the same per-trial draws as the RMSE simulation.
    alpha >= 1 - 1e-12 disables the filter, reproducing the RMSE samples exactly.
    With empty="drop", trials that keep no pair are removed before returning.
    """
    _check_alpha(alpha, allow_one=True)
    _check_choice("normalize", normalize, NORMALIZATIONS)
    _check_choice("null_model", null_model, NULL_MODELS)
    _check_choice("empty", empty, EMPTY_POLICIES)
    if tau < 1:
        raise ValidationError(f"tau must be >= 1, got {tau}")

    if alpha >= FILTER_OFF_ALPHA:
        logger.debug("alpha=%r disables the significance filter", alpha)
        values = map_trial_blocks(eval_set, tau, seed, lambda dev: metric_values(dev, "rmse"), workers)
    else:
        widths = significance_half_widths(
            eval_set.mus, eval_set.sigmas, eval_set.predictions, alpha, null_model
        )
        values = map_trial_blocks(eval_set, tau, seed, _filter_reducer(widths, normalize, empty), workers)

    if empty == "drop":
        retained = values[~np.isnan(values)]
        if retained.size < values.size:
            logger.info("dropped %d of %d trials with an empty kept set", values.size - retained.size, values.size)
        values = retained
    return EmpiricalDistribution(
        samples=values, seed=seed, tau=int(values.size), metric="srmse", requested_tau=tau
    )


def srmse_distribution(
    eval_set: EvaluationSet,
    alpha: float,
    tau: int,
    seed: int,
    normalize: str = "kept",
    null_model: str = "feedback",
    empty: str = "zero",
    workers: int = 1,
) -> MetricDistribution:
    """Gaussian ML fit of the simulated sRMSE samples."""
    samples = srmse_simulate(eval_set, alpha, tau, seed, normalize, null_model, empty, workers)
    return fit_gaussian(samples)


def retention_rate(
    eval_set: EvaluationSet,
    alpha: float,
    tau: int,
    seed: int,
    null_model: str = "feedback",
    workers: int = 1,
) -> float:
    """Mean share of pairs kept per trial; alpha under the feedback null, by construction."""
    _check_alpha(alpha)
    widths = significance_half_widths(eval_set.mus, eval_set.sigmas, eval_set.predictions, alpha, null_model)
    shares = map_trial_blocks(
        eval_set, tau, seed, lambda dev: np.mean(np.abs(dev) > widths, axis=1), workers
    )
    return float(np.mean(shares))
