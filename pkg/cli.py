import argparse
import copy
import json
import logging
import sys
import time
from typing import Any, Dict, List, Optional, Tuple

from config import SUBCOMMAND_DEFAULTS, TOOL_NAME, TOOL_VERSION
from models import ValidationError
from utils import get_utc_timestamp, load_json_config, parse_float_list


class UsageError(Exception):
    """Bad command line or config file (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def print_startup_banner():
    """Print ASCII art startup banner (stderr)."""
    banner = f"""
    ╔══════════════════════════════════════════════════════════════╗
    ║                                                              ║
    ║          Uncertain Evaluation Analyzer - v{TOOL_VERSION:<19s}║
    ║     Recommender metrics under human rating uncertainty       ║
    ║                                                              ║
    ║  Features:                                                   ║
    ║   • Analytic MSE / RMSE Distributions                        ║
    ║   • Seeded Monte-Carlo Convolution                           ║
    ║   • Ranking Error Probabilities                              ║
    ║   • Goodness-of-Fit (nJSD, OLS)                              ║
    ║   • Significance-Filtered RMSE                               ║
    ║   • Repeated-Rating Ingestion                                ║
    ║                                                              ║
    ╚══════════════════════════════════════════════════════════════╝
    """
    print(banner, file=sys.stderr)
    print(f"    Started: {get_utc_timestamp()}", file=sys.stderr)
    print(file=sys.stderr)


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    formatter = logging.Formatter("%(asctime)s UTC %(levelname)s %(name)s: %(message)s", "%H:%M:%S")
    formatter.converter = time.gmtime
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1], got {text}")
    return value


def _open_probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _int_list(text: str) -> List[int]:
    return [int(v) for v in parse_float_list(text)]


def _interval(text: str) -> Tuple[float, float]:
    values = parse_float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}")
    return values[0], values[1]


def _sigma_levels(text: str):
    return "reference" if text == "reference" else parse_float_list(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    d = argparse.SUPPRESS
    p.add_argument("--config", default=None, help="JSON run configuration (flags override it)")
    p.add_argument("--out", "-o", default=d, help="output path, '-' for stdout")
    p.add_argument("--format", choices=["csv", "json"], default=d, help="output format")
    p.add_argument("--threads", type=_positive_int, default=d, help="worker threads (results do not depend on it)")
    p.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    p.add_argument("--quiet", "-q", action="store_true", help="only warnings and errors on stderr")


def _add_inputs(p: argparse.ArgumentParser) -> None:
    d = argparse.SUPPRESS
    p.add_argument("--models", default=d, help="models.csv (user_id,item_id,mu,sigma)")
    p.add_argument("--predictions", default=d, help="predictions.csv (user_id,item_id,prediction)")
    p.add_argument("--ratings", default=d, help="ratings.csv (user_id,item_id,trial,rating); models are fitted")
    p.add_argument("--predictor", choices=["R1", "R2", "R3"], default=d, help="baseline predictor for --ratings")
    p.add_argument("--sigma-floor", dest="sigma_floor", type=float, default=d, help="lower bound for fitted sigma")


def _add_mc(p: argparse.ArgumentParser) -> None:
    d = argparse.SUPPRESS
    p.add_argument("--tau", type=_positive_int, default=d, help="Monte-Carlo trials")
    p.add_argument("--seed", type=_seed, default=d, help="RNG seed (u64)")


def _add_bounds(p: argparse.ArgumentParser) -> None:
    d = argparse.SUPPRESS
    p.add_argument("--delta-range", dest="delta_range", type=_interval, default=d, help="lo,hi for delta")
    p.add_argument("--sigma-sq-range", dest="sigma_sq_range", type=_interval, default=d, help="lo,hi for sigma^2")


def build_parser() -> argparse.ArgumentParser:
    d = argparse.SUPPRESS
    parser = _Parser(
        prog=TOOL_NAME,
        description="Uncertain Evaluation Analyzer - recommender metrics as distributions under human uncertainty",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("propagate", help="analytic MSE/RMSE distribution")
    _add_inputs(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte-Carlo metric samples and fitted Gaussian")
    _add_inputs(p)
    _add_mc(p)
    p.add_argument("--metric", choices=["rmse", "mse", "mae"], default=d)
    p.add_argument("--samples-out", dest="samples_out", default=d, help="raw samples CSV")
    _add_common(p)

    p = sub.add_parser("rank", help="rank systems and their pairwise error probabilities")
    p.add_argument("--systems", nargs="+", default=d, help="systems JSON or propagate outputs")
    p.add_argument("--p-max", dest="p_max", type=_open_probability, default=d, help="distinguishability threshold")
    _add_common(p)

    p = sub.add_parser("gof", help="parameter matching / distribution similarity")
    p.add_argument("--driver", choices=["parameter-matching", "distribution-similarity"], default=d)
    p.add_argument("--n-grid", dest="n_grid", type=_int_list, default=d, help="N values, e.g. 50,250,500")
    p.add_argument("--replications", type=_positive_int, default=d)
    p.add_argument("--bins", type=_positive_int, default=d)
    _add_mc(p)
    _add_bounds(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="sensitivity and error-probability curves")
    p.add_argument("--driver", choices=["sensitivity", "error-probability"], default=d)
    p.add_argument("--varied", choices=["n", "delta", "sigma_sq"], default=d)
    p.add_argument("--grid", type=parse_float_list, default=d, help="grid values or start:stop:step")
    p.add_argument("--fixed", type=json.loads, default=d, help='JSON, e.g. {"n": 1000, "sigma_sq": [0.16, 3.86]}')
    p.add_argument("--n-grid", dest="n_grid", type=_int_list, default=d)
    p.add_argument("--sigma-levels", dest="sigma_levels", type=_sigma_levels, default=d,
                   help="sigma^2 levels, or 'reference' for interval ends and midpoint")
    p.add_argument("--n", type=_positive_int, default=d, help="set size for --sigma-levels")
    p.add_argument("--replications", type=_positive_int, default=d)
    p.add_argument("--p-max", dest="p_max", type=_open_probability, default=d)
    p.add_argument("--seed", type=_seed, default=d)
    _add_bounds(p)
    _add_common(p)

    p = sub.add_parser("srmse", help="significance-filtered RMSE")
    p.add_argument("--driver", choices=["simulate", "comparison"], default=d)
    _add_inputs(p)
    _add_mc(p)
    p.add_argument("--alpha", type=_probability, default=d, help="significance level; 1 disables the filter")
    p.add_argument("--srmse-normalize", dest="srmse_normalize", choices=["kept", "all"], default=d)
    p.add_argument("--srmse-null", dest="srmse_null", choices=["feedback", "prediction"], default=d)
    p.add_argument("--srmse-empty", dest="srmse_empty", choices=["zero", "drop"], default=d)
    p.add_argument("--delta-grid", dest="delta_grid", type=parse_float_list, default=d)
    p.add_argument("--n", type=_positive_int, default=d)
    p.add_argument("--samples-out", dest="samples_out", default=d)
    _add_bounds(p)
    _add_common(p)

    p = sub.add_parser("analyze", help="ingest repeated ratings: fitted models, per-trial scores, ranking frequencies")
    p.add_argument("--ratings", default=d)
    p.add_argument("--predictions", default=d, help="extra system 'P'")
    p.add_argument("--predictors", type=lambda s: [v.strip() for v in s.split(",") if v.strip()], default=d,
                   help="baseline predictors, e.g. R1,R2,R3")
    p.add_argument("--metric", choices=["rmse", "mse", "mae"], default=d)
    p.add_argument("--sigma-floor", dest="sigma_floor", type=float, default=d)
    p.add_argument("--common-trials-only", dest="common_trials_only", action="store_const", const=True, default=d)
    p.add_argument("--models-out", dest="models_out", default=d)
    _add_common(p)
    return parser


_META_KEYS = ("subcommand", "config", "verbose", "quiet")


def resolve_config(args: argparse.Namespace) -> Dict[str, Any]:
    """built-in defaults < --config JSON < explicit flags"""
    cfg = copy.deepcopy(SUBCOMMAND_DEFAULTS[args.subcommand])
    if args.config:
        try:
            from_file = load_json_config(args.config, cfg.keys())
        except (OSError, json.JSONDecodeError, ValidationError) as e:
            raise UsageError(f"config {args.config}: {e}") from None
        if from_file.get("subcommand", args.subcommand) != args.subcommand:
            raise UsageError(f"config {args.config} is for '{from_file['subcommand']}', not '{args.subcommand}'")
        from_file.pop("subcommand", None)
        cfg.update(from_file)
    cfg.update({k: v for k, v in vars(args).items() if k not in _META_KEYS})
    if cfg.get("format") not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {cfg.get('format')!r}")
    return cfg


def parse_args(argv: Optional[List[str]] = None) -> Tuple[str, Dict[str, Any], argparse.Namespace]:
    """Parse the command line into (subcommand, resolved config, raw args)."""
    args = build_parser().parse_args(argv)
    return args.subcommand, resolve_config(args), args
