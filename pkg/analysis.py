#!/usr/bin/env python3
"""
One run per subcommand for Uncertain Evaluation Analyzer.
Each run_* takes the resolved config and returns a RunResult; main.py
writes it. Progress goes to stderr so stdout stays clean for data.
"""

import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import DEFAULT_P_MAX
from experiments import (
    distribution_similarity,
    error_probability_sweep,
    find_crossing,
    parameter_matching,
    reference_sigma_levels,
    sensitivity_sweep,
    srmse_error_comparison,
)
from ingest import (
    PREDICTORS,
    baseline_predictor,
    fit_feedback_models,
    parse_models_csv,
    parse_predictions_csv,
    parse_ratings_csv,
    per_trial_scores,
    write_models_csv,
)
from mc import fit_gaussian, simulate_metric, standard_error
from models import (
    EvaluationSet,
    MetricDistribution,
    SweepSpec,
    SynthBounds,
    ValidationError,
    make_evaluation_set,
)
from output import ResultWriter, write_samples
from propagate import metric_distribution, mse_distribution, rmse_distribution
from ranking import rank_systems, ranking_frequencies
from srmse import retention_rate, srmse_simulate
from utils import get_utc_timestamp, load_json

QUIET = False


def say(message: str) -> None:
    """Progress line on stderr (suppressed by --quiet)."""
    if not QUIET:
        print(message, file=sys.stderr)


@dataclass
class RunResult:
    body: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    columns: Optional[List[str]] = None


def _bounds(cfg: Dict[str, Any]) -> SynthBounds:
    return SynthBounds(tuple(cfg["delta_range"]), tuple(cfg["sigma_sq_range"]))


# --- inputs ---------------------------------------------------------------

def load_evaluation_set(cfg: Dict[str, Any]) -> EvaluationSet:
    """
    Models + predictions from `--models`/`--predictions`, or models fitted
    from `--ratings` with predictions from `--predictions` or `--predictor`.
    """
    if cfg.get("ratings"):
        data = parse_ratings_csv(cfg["ratings"])
        models = fit_feedback_models(data, cfg.get("sigma_floor"))
        if cfg.get("predictions"):
            predictions = parse_predictions_csv(cfg["predictions"])
        elif cfg.get("predictor"):
            predictions = baseline_predictor(data, cfg["predictor"])
        else:
            raise ValidationError("--ratings needs --predictions or --predictor {R1,R2,R3}")
        say(f"📥 Fitted {len(models)} feedback models from {cfg['ratings']}")
    elif cfg.get("models"):
        if not cfg.get("predictions"):
            raise ValidationError("--models needs --predictions")
        models = parse_models_csv(cfg["models"])
        predictions = parse_predictions_csv(cfg["predictions"])
        say(f"📥 Loaded {len(models)} feedback models from {cfg['models']}")
    else:
        raise ValidationError("give --models with --predictions, or --ratings")

    missing = [pair for pair, _ in models if pair not in predictions]
    if missing:
        user, item = missing[0]
        raise ValidationError(f"no prediction for {len(missing)} pair(s), first {user}/{item}")
    extra = len(predictions) - len(models)
    if extra > 0:
        say(f"   ⚠️  {extra} prediction(s) without a feedback model ignored")
    pair_ids = [f"{user}/{item}" for (user, item), _ in models]
    return make_evaluation_set(
        [model for _, model in models],
        [predictions[pair] for pair, _ in models],
        pair_ids,
    )


def load_systems(paths: List[str]) -> List[Tuple[str, MetricDistribution]]:
    """
    Systems from JSON files: either {"systems": [{"id", "mean", "variance"}, ...]}
    or `propagate` outputs, named after the file.
    """
    if not paths:
        raise ValidationError("rank needs at least one --systems file")
    systems = []
    for path in paths:
        document = load_json(path)
        if not isinstance(document, dict):
            raise ValidationError(f"{path}: expected a JSON object")
        if "systems" in document:
            for i, entry in enumerate(document["systems"]):
                try:
                    systems.append((str(entry["id"]), MetricDistribution(entry["mean"], entry["variance"])))
                except (KeyError, TypeError) as e:
                    raise ValidationError(f"{path}: system entry needs id, mean and variance ({e})", index=i) from None
        elif "distribution" in document:
            name = os.path.splitext(os.path.basename(path))[0]
            dist = document["distribution"]
            systems.append((name, MetricDistribution(dist["mean"], dist["variance"])))
        else:
            raise ValidationError(f"{path}: neither a systems list nor a propagate output")
    return systems


# --- subcommands ----------------------------------------------------------

def run_propagate(cfg: Dict[str, Any]) -> RunResult:
    eval_set = load_evaluation_set(cfg)
    mse = mse_distribution(eval_set)
    rmse = rmse_distribution(eval_set)
    say(f"✅ RMSE ~ N({rmse.mean:.6g}, {rmse.variance:.6g}) over {eval_set.n} pairs")
    body = {"n": eval_set.n, "mse": mse.to_dict(), "rmse": rmse.to_dict(), "distribution": rmse.to_dict()}
    rows = [
        {"metric": "mse", "mean": mse.mean, "variance": mse.variance, "n": eval_set.n},
        {"metric": "rmse", "mean": rmse.mean, "variance": rmse.variance, "n": eval_set.n},
    ]
    return RunResult(body, rows, ["metric", "mean", "variance", "n"])


def run_simulate(cfg: Dict[str, Any]) -> RunResult:
    eval_set = load_evaluation_set(cfg)
    metric = cfg["metric"]
    say(f"🎲 Simulating {cfg['tau']} trials of {metric.upper()} (seed {cfg['seed']}, {cfg['threads']} thread(s))")
    started = time.monotonic()
    samples = simulate_metric(eval_set, metric, cfg["tau"], cfg["seed"], cfg["threads"])
    fit = fit_gaussian(samples)
    say(f"✅ Done in {time.monotonic() - started:.1f}s: fitted N({fit.mean:.6g}, {fit.variance:.6g})")
    if cfg.get("samples_out"):
        write_samples(cfg["samples_out"], samples.samples, cfg)
        say(f"💾 Samples written to {cfg['samples_out']}")
    body = {
        "metric": metric,
        "n": eval_set.n,
        "tau": samples.tau,
        "seed": samples.seed,
        "fit": fit.to_dict(),
        "standard_error": standard_error(samples),
    }
    if metric in ("mse", "rmse"):
        body["analytic"] = metric_distribution(eval_set, metric).to_dict()
    rows = [{"trial": t, "value": v} for t, v in enumerate(samples.samples.tolist())]
    return RunResult(body, rows, ["trial", "value"])


def run_rank(cfg: Dict[str, Any]) -> RunResult:
    systems = load_systems(cfg["systems"])
    report = rank_systems(systems, cfg["p_max"])
    say(f"🏁 Ranking: {' < '.join(report.order)}")
    for row in report.to_rows():
        marker = "✅" if row["distinguishable"] else "⚠️ "
        say(f"   {marker} {row['system_i']} vs {row['system_j']}: error {row['error_probability']:.4g}")
    return RunResult({"ranking": report.to_dict()}, report.to_rows(),
                     ["system_i", "system_j", "error_probability", "distinguishable"])


def run_gof(cfg: Dict[str, Any]) -> RunResult:
    driver = cfg["driver"]
    bounds = _bounds(cfg)
    say(f"🔬 {driver}: N grid {cfg['n_grid']}, {cfg['replications']} reps, tau {cfg['tau']}")
    if driver == "parameter-matching":
        result = parameter_matching(cfg["n_grid"], cfg["replications"], cfg["tau"], cfg["seed"], bounds, cfg["threads"])
        fit = result.mean_fit
        say(f"✅ mu_sim = {fit.slope:.4f} * mu_apr + {fit.intercept:.4f} (r² {fit.r_squared:.4f})")
        if result.variance_fit is not None:
            vfit = result.variance_fit
            say(f"✅ var_sim = {vfit.slope:.4f} * var_apr + {vfit.intercept:.4g} (r² {vfit.r_squared:.4f})")
        body = {
            "mean_fit": fit.to_dict(),
            "variance_fit": result.variance_fit.to_dict() if result.variance_fit else None,
            "points": list(result.rows),
        }
        return RunResult(body, list(result.rows), ["n", "replication", "mu_apr", "mu_sim", "var_apr", "var_sim"])
    if driver == "distribution-similarity":
        result = distribution_similarity(
            cfg["n_grid"], cfg["replications"], cfg["tau"], cfg["bins"], cfg["seed"], bounds, cfg["threads"]
        )
        s = result.summary
        say(f"✅ nJSD median {s['median']:.4g}, Q3 {s['q3']:.4g}, max {s['max']:.4g}")
        return RunResult({"summary": s, "values": list(result.rows)}, list(result.rows), ["n", "replication", "njsd"])
    raise ValidationError(f"unknown gof driver {driver!r}")


def run_sweep(cfg: Dict[str, Any]) -> RunResult:
    driver = cfg["driver"]
    if driver == "sensitivity":
        fixed = {k: v for k, v in cfg["fixed"].items() if k != cfg["varied"]}
        spec = SweepSpec(cfg["varied"], cfg["grid"], fixed, cfg["replications"], cfg["seed"])
        say(f"📈 Sensitivity of the RMSE to {spec.varied} over {len(spec.grid)} grid points")
        rows = sensitivity_sweep(spec)
        return RunResult({"varied": spec.varied, "curve": rows}, rows)
    if driver == "error-probability":
        bounds = _bounds(cfg)
        levels = cfg.get("sigma_levels")
        if levels == "reference":
            levels = list(reference_sigma_levels(bounds))
        if levels:
            say(f"📈 Error probability at sigma² levels {levels}, N = {cfg['n']}")
            rows = error_probability_sweep(cfg["grid"], sigma_levels=levels, n=cfg["n"], bounds=bounds, seed=cfg["seed"])
            key, groups = "sigma_sq_level", levels
        else:
            say(f"📈 Error probability over N grid {cfg['n_grid']}")
            rows = error_probability_sweep(cfg["grid"], n_grid=cfg["n_grid"], bounds=bounds, seed=cfg["seed"])
            key, groups = "n", cfg["n_grid"]
        crossings = []
        for g in groups:
            crossing = find_crossing([r for r in rows if r[key] == g], cfg["p_max"])
            crossings.append({key: g, "crossing_delta": crossing})
            shown = "never" if crossing is None else f"delta = {crossing:g}"
            say(f"   {key} = {g}: error < {cfg['p_max']} from {shown}")
        columns = ["delta", "n", "sigma_sq_level", "scale", "mu_a", "mu_b", "error_probability", "status"]
        return RunResult({"curve": rows, "crossings": crossings}, rows, columns)
    raise ValidationError(f"unknown sweep driver {driver!r}")


def run_srmse(cfg: Dict[str, Any]) -> RunResult:
    driver = cfg["driver"]
    options = dict(normalize=cfg["srmse_normalize"], null_model=cfg["srmse_null"], empty=cfg["srmse_empty"])
    if driver == "simulate":
        eval_set = load_evaluation_set(cfg)
        say(f"🎲 sRMSE at alpha {cfg['alpha']} over {cfg['tau']} trials (seed {cfg['seed']})")
        samples = srmse_simulate(eval_set, cfg["alpha"], cfg["tau"], cfg["seed"], workers=cfg["threads"], **options)
        fit = fit_gaussian(samples)
        rmse = fit_gaussian(simulate_metric(eval_set, "rmse", cfg["tau"], cfg["seed"], cfg["threads"]))
        body = {
            "alpha": cfg["alpha"],
            "n": eval_set.n,
            "tau": samples.tau,
            "requested_tau": samples.requested_tau,
            "seed": cfg["seed"],
            "fit": fit.to_dict(),
            "rmse_fit": rmse.to_dict(),
        }
        if cfg["alpha"] < 1.0:
            body["retention_rate"] = retention_rate(
                eval_set, cfg["alpha"], cfg["tau"], cfg["seed"], options["null_model"], cfg["threads"]
            )
        say(f"✅ sRMSE ~ N({fit.mean:.6g}, {fit.variance:.6g}); RMSE ~ N({rmse.mean:.6g}, {rmse.variance:.6g})")
        if cfg.get("samples_out"):
            write_samples(cfg["samples_out"], samples.samples, cfg)
            say(f"💾 Samples written to {cfg['samples_out']}")
        rows = [{"trial": t, "value": v} for t, v in enumerate(samples.samples.tolist())]
        return RunResult(body, rows, ["trial", "value"])
    if driver == "comparison":
        say(f"📈 RMSE vs sRMSE error curves: N = {cfg['n']}, alpha {cfg['alpha']}, tau {cfg['tau']}")
        rows, crossings = srmse_error_comparison(
            cfg["delta_grid"], cfg["n"], cfg["alpha"], cfg["tau"], cfg["seed"], _bounds(cfg),
            workers=cfg["threads"], **options,
        )
        for name, crossing in crossings.items():
            shown = "never" if crossing is None else f"delta = {crossing:g}"
            say(f"   {name}: error < 0.05 from {shown}")
        columns = ["delta", "n", "alpha", "scale", "error_rmse", "error_srmse", "status"]
        return RunResult({"curve": rows, "crossings": crossings}, rows, columns)
    raise ValidationError(f"unknown srmse driver {driver!r}")


def run_analyze(cfg: Dict[str, Any]) -> RunResult:
    """Fitted models, per-trial scores and ranking frequencies for R1/R2/R3 (plus --predictions as P)."""
    if not cfg.get("ratings"):
        raise ValidationError("analyze needs --ratings")
    data = parse_ratings_csv(cfg["ratings"])
    models = fit_feedback_models(data, cfg.get("sigma_floor"))
    say(f"📥 {len(data.pairs)} pairs, trials {data.trial_indices()}")
    if cfg.get("models_out"):
        with ResultWriter(cfg["models_out"]) as writer:
            writer.write_text(write_models_csv(models))
        say(f"💾 Fitted models written to {cfg['models_out']}")

    systems: Dict[str, Dict] = {}
    for kind in cfg["predictors"]:
        if kind.upper() not in PREDICTORS:
            raise ValidationError(f"unknown predictor {kind!r}; expected one of {PREDICTORS}")
        systems[kind.upper()] = baseline_predictor(data, kind)
    if cfg.get("predictions"):
        systems["P"] = parse_predictions_csv(cfg["predictions"])
    if not systems:
        raise ValidationError("analyze needs at least one predictor")

    metric = cfg["metric"]
    per_system: Dict[str, Any] = {}
    distributions = []
    scores: Dict[str, Dict[int, float]] = {}
    for name, predictions in systems.items():
        scores[name] = per_trial_scores(data, predictions, metric, cfg["common_trials_only"])
        entry: Dict[str, Any] = {"per_trial": {str(t): v for t, v in scores[name].items()}}
        if metric in ("mse", "rmse"):
            eval_set = make_evaluation_set([m for _, m in models], [predictions[p] for p, _ in models])
            dist = metric_distribution(eval_set, metric)
            entry["distribution"] = dist.to_dict()
            distributions.append((name, dist))
        per_system[name] = entry

    names = list(systems)
    trials = list(next(iter(scores.values())))
    body: Dict[str, Any] = {"metric": metric, "pairs": len(data.pairs), "trials": trials, "systems": per_system}
    if len(names) >= 2:
        matrix = np.array([[scores[name][t] for name in names] for t in trials])
        frequencies = ranking_frequencies(matrix, names)
        body["ranking_frequencies"] = frequencies.to_dict()
        if distributions:
            body["ranking"] = rank_systems(distributions, DEFAULT_P_MAX).to_dict()
        say(f"✅ Most frequent ranking: {' < '.join(next(iter(frequencies.counts)))}")
    rows = [{"system": name, "trial": t, "score": scores[name][t]} for name in names for t in trials]
    return RunResult(body, rows, ["system", "trial", "score"])


RUNNERS = {
    "propagate": run_propagate,
    "simulate": run_simulate,
    "rank": run_rank,
    "gof": run_gof,
    "sweep": run_sweep,
    "srmse": run_srmse,
    "analyze": run_analyze,
}


def run(subcommand: str, cfg: Dict[str, Any]) -> None:
    """Dispatch one subcommand and write its result to cfg["out"]."""
    say(f"🔄 {subcommand} started {get_utc_timestamp()}")
    result = RUNNERS[subcommand](cfg)
    with ResultWriter(cfg["out"], dict(cfg, subcommand=subcommand)) as writer:
        writer.write(cfg["format"], result.body, result.rows, result.columns)
    if cfg["out"] != "-":
        say(f"💾 Results written to {cfg['out']}")
