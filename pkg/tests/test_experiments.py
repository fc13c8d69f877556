import math

import numpy as np
import pytest

from experiments import (
    RATER_MIX,
    derive_seed,
    distribution_similarity,
    error_probability_sweep,
    find_crossing,
    parameter_matching,
    reference_sigma_levels,
    sample_pairs,
    scale_for_ratio,
    sensitivity_sweep,
    srmse_error_comparison,
    stratified_sigma_sq,
    synthetic_study,
)
from ingest import fit_feedback_models
from models import SweepSpec, SynthBounds, UnreachableTargetError, ValidationError
from propagate import mse_moments, rmse_from_mse

DELTA_GRID = [round(0.1 * i, 1) for i in range(41)]


class TestSamplePairs:
    def test_within_bounds(self):
        s = sample_pairs(500, SynthBounds(), 1)
        assert np.all((s.deltas >= 0) & (s.deltas <= 4))
        assert np.all((s.sigmas ** 2 >= 0.16 - 1e-12) & (s.sigmas ** 2 <= 3.86 + 1e-12))
        np.testing.assert_array_equal(s.predictions, 0.0)

    def test_same_seed_same_set(self):
        a, b = sample_pairs(50, SynthBounds(), 9), sample_pairs(50, SynthBounds(), 9)
        np.testing.assert_array_equal(a.mus, b.mus)
        np.testing.assert_array_equal(a.sigmas, b.sigmas)

    def test_uniform_mean(self):
        s = sample_pairs(10000, SynthBounds(), 3)
        assert abs(float(np.mean(s.deltas)) - 2.0) < 0.04

    def test_n_must_be_positive(self):
        with pytest.raises(ValidationError):
            sample_pairs(0, SynthBounds(), 1)


class TestDeriveSeed:
    def test_stable_and_distinct(self):
        assert derive_seed(42, 1, 2) == derive_seed(42, 1, 2)
        assert derive_seed(42, 1, 2) != derive_seed(42, 2, 1)
        assert 0 <= derive_seed(42, 0) < 2 ** 63


class TestStratifiedSigma:
    def test_one_draw_per_stratum(self):
        values = np.sort(stratified_sigma_sq(100, (0.16, 3.86), np.random.default_rng(0)))
        width = (3.86 - 0.16) / 100
        lower = 0.16 + width * np.arange(100)
        assert np.all(values >= lower - 1e-12) and np.all(values <= lower + width + 1e-12)


class TestParameterMatching:
    def test_small_run(self):
        result = parameter_matching([50, 200], 3, 4000, 11)
        assert len(result.rows) == 6
        assert 0.9 <= result.mean_fit.slope <= 1.1
        assert result.mean_fit.r_squared > 0.95

    def test_zero_uncertainty(self):
        bounds = SynthBounds(sigma_sq_range=(0.0, 0.0))
        result = parameter_matching([20, 40], 2, 50, 5, bounds)
        for row in result.rows:
            assert row["mu_sim"] == pytest.approx(row["mu_apr"], abs=1e-12)
            assert row["var_sim"] == pytest.approx(0.0, abs=1e-24)
        assert result.mean_fit.slope == pytest.approx(1.0, abs=1e-9)
        assert result.mean_fit.intercept == pytest.approx(0.0, abs=1e-9)
        assert result.variance_fit is None

    def test_needs_two_replications(self):
        with pytest.raises(ValidationError):
            parameter_matching([50], 1, 100, 1)

    @pytest.mark.slow
    def test_desk_scale(self):
        result = parameter_matching([50, 250, 500, 750, 1000, 1250, 1500, 1750, 2000, 2250, 2500], 10, 20000, 42)
        assert 0.95 <= result.mean_fit.slope <= 1.05
        assert abs(result.mean_fit.intercept) <= 0.05
        assert result.mean_fit.r_squared >= 0.99
        assert 0.90 <= result.variance_fit.slope <= 1.10
        assert result.variance_fit.r_squared >= 0.95


class TestDistributionSimilarity:
    def test_small_run(self):
        result = distribution_similarity([500], 2, 20000, 100, 3)
        assert len(result.rows) == 2
        assert result.summary["max"] < 0.05
        assert result.summary["min"] <= result.summary["median"] <= result.summary["max"]

    @pytest.mark.slow
    def test_desk_scale(self):
        result = distribution_similarity([50, 250, 500, 750, 1000, 1250, 1500, 1750, 2000, 2250, 2500], 10, 20000, 100, 42)
        assert result.summary["median"] <= 0.01
        assert result.summary["q3"] <= 0.03
        assert result.summary["max"] <= 0.10


class TestSensitivitySweep:
    def test_n_does_not_move_the_mean(self):
        spec = SweepSpec(varied="n", grid=[10, 100, 1000], fixed={"delta": 1.5, "sigma_sq": 0.5})
        rows = sensitivity_sweep(spec)
        means = [r["mu_rmse"] for r in rows]
        assert means == pytest.approx([math.sqrt(0.5 + 2.25)] * 3, abs=1e-12)

    def test_doubling_n_halves_variance(self):
        spec = SweepSpec(varied="n", grid=[100, 200], fixed={"delta": 1.0, "sigma_sq": 1.0})
        rows = sensitivity_sweep(spec)
        assert rows[1]["var_rmse"] == pytest.approx(rows[0]["var_rmse"] / 2, rel=1e-12)

    def test_delta_asymptote(self):
        spec = SweepSpec(varied="delta", grid=[1.0, 10.0, 100.0], fixed={"n": 100, "sigma_sq": 0.16})
        rows = sensitivity_sweep(spec)
        gaps = [r["mu_rmse"] - r["value"] for r in rows]
        assert gaps[0] > gaps[1] > gaps[2] > 0
        assert gaps[2] < 1e-3

    def test_interval_band(self):
        spec = SweepSpec(varied="delta", grid=[0.0, 2.0], fixed={"n": 50, "sigma_sq": [0.16, 3.86]},
                         replications=8, seed=4)
        rows = sensitivity_sweep(spec)
        for row in rows:
            assert row["mu_rmse_min"] <= row["mu_rmse"] <= row["mu_rmse_max"]
            assert row["mu_rmse_min"] < row["mu_rmse_max"]
        assert sensitivity_sweep(spec) == rows


class TestScaleForRatio:
    def test_hits_target(self):
        deltas, sigmas = np.full(100, 2.0), np.full(100, 1.0)
        c = scale_for_ratio(deltas, sigmas, 0.9)
        a = rmse_from_mse(mse_moments(deltas, sigmas)).mean
        b = rmse_from_mse(mse_moments(c * deltas, sigmas)).mean
        assert b / a == pytest.approx(0.9, abs=1e-8)
        assert 0 < c < 1

    def test_unreachable(self):
        with pytest.raises(UnreachableTargetError):
            scale_for_ratio(np.full(10, 0.1), np.full(10, 1.0), 0.9)


class TestErrorProbabilitySweep:
    @pytest.fixture(scope="class")
    def rows(self):
        return error_probability_sweep(DELTA_GRID, n_grid=[50, 100, 250, 1000], seed=42)

    def curve(self, rows, n):
        return [r for r in rows if r["n"] == n]

    def test_n50_never_distinguishable(self, rows):
        for row in self.curve(rows, 50):
            assert row["status"] == "unreachable" or row["error_probability"] > 0.05

    def test_n100_crossing(self, rows):
        crossing = find_crossing(self.curve(rows, 100), 0.05)
        assert crossing is not None
        assert 2.85 <= crossing <= 3.5

    def test_decreasing_in_n(self, rows):
        for delta in DELTA_GRID:
            errors = [r["error_probability"] for r in rows if r["delta"] == delta and r["status"] == "ok"]
            if len(errors) == 4:
                assert all(a > b for a, b in zip(errors, errors[1:]))

    def test_not_constant_in_delta(self, rows):
        errors = [r["error_probability"] for r in self.curve(rows, 100) if r["status"] == "ok"]
        assert max(errors) - min(errors) > 0.01

    def test_small_delta_unreachable(self, rows):
        first = self.curve(rows, 100)[0]
        assert first["delta"] == 0.0
        assert first["status"] == "unreachable"
        assert first["error_probability"] is None

    def test_ratio_holds(self, rows):
        for row in rows:
            if row["status"] == "ok":
                assert row["mu_b"] / row["mu_a"] == pytest.approx(0.9, abs=1e-8)

    def test_sigma_levels(self):
        levels = reference_sigma_levels()
        assert levels == pytest.approx((0.16, 2.01, 3.86))
        rows = error_probability_sweep([2.0, 3.0], sigma_levels=levels, n=100)
        by_level = {r["sigma_sq_level"]: r["error_probability"] for r in rows if r["delta"] == 3.0}
        assert by_level[0.16] < by_level[levels[1]] < by_level[3.86]

    def test_needs_exactly_one_grid(self):
        with pytest.raises(ValidationError):
            error_probability_sweep([1.0])
        with pytest.raises(ValidationError):
            error_probability_sweep([1.0], n_grid=[10], sigma_levels=[1.0])


class TestFindCrossing:
    def test_smallest_delta(self):
        rows = [{"delta": 1.0, "error_probability": 0.2}, {"delta": 2.0, "error_probability": 0.04},
                {"delta": 3.0, "error_probability": 0.01}, {"delta": 0.5, "error_probability": None}]
        assert find_crossing(rows) == 2.0

    def test_never(self):
        assert find_crossing([{"delta": 1.0, "error_probability": 0.3}]) is None


class TestSrmseErrorComparison:
    def test_filter_off_gives_identical_curves(self):
        rows, crossings = srmse_error_comparison([1.0, 2.5, 4.0], 200, 1.0, 1000, 7)
        for row in rows:
            assert row["error_srmse"] == row["error_rmse"]
        assert crossings["srmse"] == crossings["rmse"]

    def test_shape(self):
        rows, crossings = srmse_error_comparison([0.0, 2.0, 4.0], 100, 0.05, 500, 7)
        assert [r["status"] for r in rows] == ["unreachable", "ok", "ok"]
        assert rows[0]["error_rmse"] is None
        assert set(crossings) == {"rmse", "srmse"}
        for row in rows[1:]:
            assert 0.0 <= row["error_rmse"] <= 1.0
            assert 0.0 <= row["error_srmse"] <= 1.0

    def test_deterministic(self):
        a = srmse_error_comparison([2.0, 3.0], 100, 0.05, 500, 3)
        b = srmse_error_comparison([2.0, 3.0], 100, 0.05, 500, 3)
        assert a == b

    @pytest.mark.slow
    @pytest.mark.parametrize("null_model", ["feedback", "prediction"])
    def test_desk_scale_rmse_crosses_first(self, null_model):
        grid = [0.25 * k for k in range(17)]
        rows, crossings = srmse_error_comparison(grid, 1000, 0.05, 20000, 42, null_model=null_model)
        ok = [r for r in rows if r["status"] == "ok"]
        # RMSE already separates the systems at the first reachable delta
        assert crossings["rmse"] == ok[0]["delta"]
        assert crossings["srmse"] is None or crossings["srmse"] >= crossings["rmse"]
        for row in ok:
            assert row["error_srmse"] >= row["error_rmse"] - 1e-12


class TestSyntheticStudy:
    def test_shape_and_scale(self):
        data, kinds = synthetic_study(40, 3, 5, 1)
        assert len(data.pairs) == 120
        assert data.trial_indices() == [1, 2, 3, 4, 5]
        ratings = [r for pair in data.pairs for r in data.ratings(pair)]
        assert min(ratings) >= 1 and max(ratings) <= 5

    def test_rater_kinds_match_categories(self):
        data, kinds = synthetic_study(60, 4, 5, 2)
        for (user, item) in data.pairs:
            distinct = len(set(data.ratings((user, item))))
            expected = {"constant": 1, "two-category": 2, "three-plus": 3}[kinds[user]]
            assert distinct == expected

    def test_mix_proportions(self):
        _, kinds = synthetic_study(4000, 1, 5, 3)
        counts = {k: sum(1 for v in kinds.values() if v == k) for k, _ in RATER_MIX}
        for kind, share in RATER_MIX:
            assert counts[kind] / 4000 == pytest.approx(share, abs=0.04)

    def test_constant_raters_are_point_masses(self):
        data, kinds = synthetic_study(30, 2, 5, 4)
        for (user, _), model in fit_feedback_models(data):
            if kinds[user] == "constant":
                assert model.sigma == 0.0
