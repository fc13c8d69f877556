# config.py

import os

import environment  # noqa: F401  (loads .env before the getenv calls below)

TOOL_NAME = "uncertain-eval"
TOOL_VERSION = "1.0.0"

# Monte-Carlo
DEFAULT_TAU = int(os.getenv("UEA_TAU", 20000))
DEFAULT_SEED = int(os.getenv("UEA_SEED", 42))
DEFAULT_THREADS = int(os.getenv("UEA_THREADS", 1))
# Trials per RNG block; part of the reproducibility contract, do not tune per run
TRIAL_BLOCK = 256

# Goodness of fit
DEFAULT_BINS = int(os.getenv("UEA_BINS", 100))
GRID_MARGIN = 0.01
GAUSSIAN_SUPPORT_SIGMAS = 5.0
KL_SMOOTHING = 1e-12

# Ranking / significance
DEFAULT_P_MAX = float(os.getenv("UEA_P_MAX", 0.05))
DEFAULT_ALPHA = float(os.getenv("UEA_ALPHA", 0.05))
FILTER_OFF_ALPHA = 1.0 - 1e-12
BISECTION_TOL = 1e-12

# Synthetic test data on a 5-star scale with five repeated trials
DELTA_RANGE = (0.0, 4.0)
SIGMA_SQ_RANGE = (0.16, 3.86)
N_GRID = (50, 250, 500, 750, 1000, 1250, 1500, 1750, 2000, 2250, 2500)
DEFAULT_REPLICATIONS = 10
TARGET_RATIO = 0.9
RATIO_TOL = 1e-8

# Input and output
DEFAULT_OUT = os.getenv("UEA_OUT", "-")
CSV_PRECISION = 17

# Built-in defaults per subcommand; --config JSON overrides these, flags override both
SUBCOMMAND_DEFAULTS = {
    "propagate": {
        "threads": DEFAULT_THREADS,
        "models": None,
        "predictions": None,
        "ratings": None,
        "predictor": None,
        "sigma_floor": None,
        "format": "json",
        "out": DEFAULT_OUT,
    },
    "simulate": {
        "models": None,
        "predictions": None,
        "ratings": None,
        "predictor": None,
        "sigma_floor": None,
        "metric": "rmse",
        "tau": DEFAULT_TAU,
        "seed": DEFAULT_SEED,
        "threads": DEFAULT_THREADS,
        "samples_out": None,
        "format": "json",
        "out": DEFAULT_OUT,
    },
    "rank": {
        "threads": DEFAULT_THREADS,
        "systems": [],
        "p_max": DEFAULT_P_MAX,
        "format": "json",
        "out": DEFAULT_OUT,
    },
    "gof": {
        "driver": "parameter-matching",
        "n_grid": list(N_GRID),
        "replications": DEFAULT_REPLICATIONS,
        "tau": DEFAULT_TAU,
        "bins": DEFAULT_BINS,
        "seed": DEFAULT_SEED,
        "threads": DEFAULT_THREADS,
        "delta_range": list(DELTA_RANGE),
        "sigma_sq_range": list(SIGMA_SQ_RANGE),
        "format": "csv",
        "out": DEFAULT_OUT,
    },
    "sweep": {
        "threads": DEFAULT_THREADS,
        "driver": "error-probability",
        "varied": "delta",
        "grid": [round(0.1 * i, 1) for i in range(41)],
        "fixed": {"n": 1000, "sigma_sq": list(SIGMA_SQ_RANGE)},
        "n_grid": [50, 100, 250, 500, 1000, 2500],
        "sigma_levels": None,
        "n": 1000,
        "replications": DEFAULT_REPLICATIONS,
        "p_max": DEFAULT_P_MAX,
        "seed": DEFAULT_SEED,
        "delta_range": list(DELTA_RANGE),
        "sigma_sq_range": list(SIGMA_SQ_RANGE),
        "format": "csv",
        "out": DEFAULT_OUT,
    },
    "srmse": {
        "driver": "simulate",
        "models": None,
        "predictions": None,
        "ratings": None,
        "predictor": None,
        "sigma_floor": None,
        "alpha": DEFAULT_ALPHA,
        "tau": DEFAULT_TAU,
        "seed": DEFAULT_SEED,
        "threads": DEFAULT_THREADS,
        "srmse_normalize": "kept",
        "srmse_null": "feedback",
        "srmse_empty": "zero",
        "delta_grid": [round(0.25 * i, 2) for i in range(17)],
        "n": 1000,
        "p_max": DEFAULT_P_MAX,
        "delta_range": list(DELTA_RANGE),
        "sigma_sq_range": list(SIGMA_SQ_RANGE),
        "samples_out": None,
        "format": "csv",
        "out": DEFAULT_OUT,
    },
    "analyze": {
        "threads": DEFAULT_THREADS,
        "ratings": None,
        "predictions": None,
        "predictors": ["R1", "R2", "R3"],
        "metric": "rmse",
        "sigma_floor": None,
        "common_trials_only": False,
        "models_out": None,
        "format": "json",
        "out": DEFAULT_OUT,
    },
}
