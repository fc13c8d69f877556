"""
Repeated-rating ingestion: CSV parsing and serialization, per-pair
feedback models, baseline predictors R1/R2/R3 and per-trial scores.
"""

import csv
import io
import logging
import math
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from mc import METRICS, metric_values
from models import FeedbackModel, IngestError, RepeatedRatings, ValidationError
from utils import format_float

logger = logging.getLogger(__name__)

Pair = Tuple[str, str]
Source = Union[str, TextIO]

RATINGS_HEADER = ["user_id", "item_id", "trial", "rating"]
PREDICTIONS_HEADER = ["user_id", "item_id", "prediction"]
MODELS_HEADER = ["user_id", "item_id", "mu", "sigma"]
PREDICTORS = ("R1", "R2", "R3")
CONSTANT_PREDICTION = 3.0


@contextmanager
def _open_source(source: Source) -> Iterator[TextIO]:
    if isinstance(source, str):
        with open(source, newline="", encoding="utf-8") as handle:
            yield handle
    else:
        yield source


def _rows(source: Source, header: List[str]) -> Iterator[Tuple[int, List[str]]]:
    """(line number, fields) per data row, after checking the header."""
    with _open_source(source) as handle:
        reader = csv.reader(handle)
        first = next(reader, None)
        if first is None:
            raise IngestError("empty file, expected header " + ",".join(header), line=1)
        if [c.strip().lstrip("\ufeff") for c in first] != header:
            raise IngestError(f"expected header {','.join(header)}, got {','.join(first)}", line=1)
        for fields in reader:
            line = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise IngestError(f"expected {len(header)} fields, got {len(fields)}", line=line)
            yield line, [f.strip() for f in fields]


def _number(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"{name} is not numeric: {text!r}", line=line) from None
    if not math.isfinite(value):
        raise IngestError(f"{name} is not finite: {text!r}", line=line)
    return value


def _trial(text: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise IngestError(f"trial is not an integer: {text!r}", line=line) from None
    if value < 1:
        raise IngestError(f"trial must be >= 1, got {value}", line=line)
    return value


def parse_ratings_csv(source: Source) -> RepeatedRatings:
    """`user_id,item_id,trial,rating` rows; pairs keep first-appearance order, ratings sorted by trial."""
    seen: Dict[Tuple[str, str, int], int] = {}
    grouped: Dict[Pair, List[Tuple[int, float]]] = {}
    for line, (user, item, trial_text, rating_text) in _rows(source, RATINGS_HEADER):
        if not user or not item:
            raise IngestError("user_id and item_id must be non-empty", line=line)
        trial = _trial(trial_text, line)
        rating = _number(rating_text, "rating", line)
        key = (user, item, trial)
        if key in seen:
            raise IngestError(f"duplicate rating for {user}/{item} trial {trial} (first on line {seen[key]})", line=line)
        seen[key] = line
        grouped.setdefault((user, item), []).append((trial, rating))
    if not grouped:
        raise IngestError("no ratings found")
    entries = {pair: tuple(sorted(ratings)) for pair, ratings in grouped.items()}
    logger.debug("parsed %d ratings for %d pairs", len(seen), len(entries))
    return RepeatedRatings(entries=entries)


def serialize_ratings_csv(data: RepeatedRatings) -> str:
    """Inverse of parse_ratings_csv; ratings at 17 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RATINGS_HEADER)
    for (user, item), ratings in data.entries.items():
        for trial, rating in ratings:
            writer.writerow([user, item, trial, format_float(rating)])
    return buffer.getvalue()


def parse_predictions_csv(source: Source) -> Dict[Pair, float]:
    """`user_id,item_id,prediction` rows; duplicate pairs are an error."""
    predictions: Dict[Pair, float] = {}
    lines: Dict[Pair, int] = {}
    for line, (user, item, value) in _rows(source, PREDICTIONS_HEADER):
        pair = (user, item)
        if pair in predictions:
            raise IngestError(f"duplicate prediction for {user}/{item} (first on line {lines[pair]})", line=line)
        predictions[pair] = _number(value, "prediction", line)
        lines[pair] = line
    if not predictions:
        raise IngestError("no predictions found")
    return predictions


def parse_models_csv(source: Source) -> List[Tuple[Pair, FeedbackModel]]:
    """`user_id,item_id,mu,sigma` rows as written by write_models_csv."""
    models: List[Tuple[Pair, FeedbackModel]] = []
    seen = set()
    for line, (user, item, mu, sigma) in _rows(source, MODELS_HEADER):
        pair = (user, item)
        if pair in seen:
            raise IngestError(f"duplicate model for {user}/{item}", line=line)
        seen.add(pair)
        sigma_value = _number(sigma, "sigma", line)
        if sigma_value < 0:
            raise IngestError(f"sigma must be >= 0, got {sigma_value}", line=line)
        models.append((pair, FeedbackModel(_number(mu, "mu", line), sigma_value)))
    if not models:
        raise IngestError("no models found")
    return models


def write_models_csv(models: Sequence[Tuple[Pair, FeedbackModel]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(MODELS_HEADER)
    for (user, item), model in models:
        writer.writerow([user, item, format_float(model.mu), format_float(model.sigma)])
    return buffer.getvalue()


def _mean_and_std(ratings: Sequence[float]) -> Tuple[float, float]:
    """ML mean and standard deviation; constant pairs are exact point masses."""
    values = np.asarray(ratings, dtype=float)
    if np.all(values == values[0]):
        return float(values[0]), 0.0
    return float(np.mean(values)), float(np.std(values))


def fit_feedback_models(
    data: RepeatedRatings,
    sigma_floor: Optional[float] = None,
) -> List[Tuple[Pair, FeedbackModel]]:
    """
    mu = sample mean, sigma = ML standard deviation (divide by count).
    Single-rating and constant pairs are point masses unless a floor is given.
    """
    if sigma_floor is not None and (not math.isfinite(sigma_floor) or sigma_floor < 0):
        raise ValidationError(f"sigma floor must be a finite value >= 0, got {sigma_floor}")
    models = []
    floored = 0
    for pair in data.pairs:
        mu, sigma = _mean_and_std(data.ratings(pair))
        if sigma_floor is not None and sigma < sigma_floor:
            sigma = float(sigma_floor)
            floored += 1
        models.append((pair, FeedbackModel(mu, sigma)))
    if floored:
        logger.info("sigma floor %g applied to %d of %d pairs", sigma_floor, floored, len(models))
    return models


def baseline_predictor(data: RepeatedRatings, kind: str) -> Dict[Pair, float]:
    """R1: rating mean, R2: rating of the lowest trial, R3: constant 3."""
    kind = kind.upper()
    if kind == "R1":
        return {pair: _mean_and_std(data.ratings(pair))[0] for pair in data.pairs}
    if kind == "R2":
        return {pair: data.entries[pair][0][1] for pair in data.pairs}
    if kind == "R3":
        return {pair: CONSTANT_PREDICTION for pair in data.pairs}
    raise ValidationError(f"unknown predictor {kind!r}; expected one of {PREDICTORS}")


def common_trials(data: RepeatedRatings) -> List[int]:
    shared = None
    for ratings in data.entries.values():
        trials = {t for t, _ in ratings}
        shared = trials if shared is None else shared & trials
    return sorted(shared or ())


def per_trial_scores(
    data: RepeatedRatings,
    predictions: Dict[Pair, float],
    metric: str = "rmse",
    common_trials_only: bool = False,
) -> Dict[int, float]:
    """
    Metric over all pairs per trial index, ordered by trial. Every pair must
    carry every trial unless common_trials_only restricts to the shared ones.
    """
    metric = metric.lower()
    if metric not in METRICS:
        raise ValidationError(f"unknown metric {metric!r}; expected one of {METRICS}")
    missing = [pair for pair in data.pairs if pair not in predictions]
    if missing:
        raise ValidationError(f"no prediction for {len(missing)} pair(s), first {missing[0][0]}/{missing[0][1]}")

    all_trials = data.trial_indices()
    trials = common_trials(data)
    if trials != all_trials:
        if not common_trials_only:
            ragged = sorted(set(all_trials) - set(trials))
            raise ValidationError(
                f"ragged trials: not every pair has trial(s) {ragged}; "
                "use --common-trials-only to score the shared subset"
            )
        logger.warning("restricting to %d common trials of %d", len(trials), len(all_trials))
        if not trials:
            raise ValidationError("pairs share no trial index")

    pairs = data.pairs
    pi = np.array([predictions[p] for p in pairs])
    lookup = [dict(data.entries[p]) for p in pairs]
    dev = np.array([[lookup[k][t] for k in range(len(pairs))] for t in trials]) - pi
    return dict(zip(trials, (float(v) for v in metric_values(dev, metric))))
