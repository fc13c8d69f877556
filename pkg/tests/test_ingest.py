import io
import math

import pytest

from ingest import (
    baseline_predictor,
    common_trials,
    fit_feedback_models,
    parse_models_csv,
    parse_predictions_csv,
    parse_ratings_csv,
    per_trial_scores,
    serialize_ratings_csv,
    write_models_csv,
)
from models import IngestError, RepeatedRatings, ValidationError, make_evaluation_set
from propagate import mse_distribution, rmse_distribution
from ranking import ranking_frequencies


def ratings_csv(*rows):
    return io.StringIO("user_id,item_id,trial,rating\n" + "".join(r + "\n" for r in rows))


def one_pair(*values):
    return RepeatedRatings(entries={("u", "i"): tuple((t + 1, float(v)) for t, v in enumerate(values))})


class TestParseRatings:
    def test_single_row(self):
        data = parse_ratings_csv(ratings_csv("u1,i1,1,4"))
        assert data.pairs == [("u1", "i1")]
        assert data.ratings(("u1", "i1")) == [4.0]

    def test_sorted_by_trial(self):
        data = parse_ratings_csv(ratings_csv("u1,i1,3,2", "u1,i1,1,4", "u1,i1,2,5"))
        assert data.entries[("u1", "i1")] == ((1, 4.0), (2, 5.0), (3, 2.0))

    def test_duplicate_trial_names_both_lines(self):
        with pytest.raises(IngestError) as info:
            parse_ratings_csv(ratings_csv("u1,i1,1,4", "u1,i2,1,3", "u1,i1,1,5"))
        assert info.value.line == 4
        assert "line 2" in str(info.value)

    def test_bad_header(self):
        with pytest.raises(IngestError) as info:
            parse_ratings_csv(io.StringIO("user,item,trial,rating\nu1,i1,1,4\n"))
        assert info.value.line == 1

    def test_bom_header(self):
        data = parse_ratings_csv(io.StringIO("\ufeffuser_id,item_id,trial,rating\nu1,i1,1,4\n"))
        assert len(data.pairs) == 1

    def test_non_numeric_rating(self):
        with pytest.raises(IngestError) as info:
            parse_ratings_csv(ratings_csv("u1,i1,1,4", "u1,i1,2,four"))
        assert info.value.line == 3

    @pytest.mark.parametrize("trial", ["0", "1.5", "x"])
    def test_bad_trial(self, trial):
        with pytest.raises(IngestError):
            parse_ratings_csv(ratings_csv(f"u1,i1,{trial},4"))

    def test_wrong_field_count(self):
        with pytest.raises(IngestError):
            parse_ratings_csv(ratings_csv("u1,i1,1"))

    def test_blank_lines_skipped(self):
        data = parse_ratings_csv(ratings_csv("u1,i1,1,4", "", "u1,i1,2,5"))
        assert data.ratings(("u1", "i1")) == [4.0, 5.0]

    def test_no_rows(self):
        with pytest.raises(IngestError):
            parse_ratings_csv(ratings_csv())

    def test_fixture_round_trip(self, fixture_path):
        path = fixture_path("ratings_4pairs.csv")
        with open(path, encoding="utf-8") as f:
            text = f.read()
        assert serialize_ratings_csv(parse_ratings_csv(path)) == text


class TestParsePredictionsAndModels:
    def test_predictions(self, fixture_path):
        predictions = parse_predictions_csv(fixture_path("predictions_4pairs.csv"))
        assert predictions[("u1", "i2")] == 3.5
        assert len(predictions) == 4

    def test_duplicate_prediction(self):
        with pytest.raises(IngestError):
            parse_predictions_csv(io.StringIO("user_id,item_id,prediction\nu,i,3\nu,i,4\n"))

    def test_negative_sigma(self):
        with pytest.raises(IngestError):
            parse_models_csv(io.StringIO("user_id,item_id,mu,sigma\nu,i,3,-1\n"))

    def test_models_fixture_matches_fit(self, fixture_path):
        stored = parse_models_csv(fixture_path("models_4pairs.csv"))
        fitted = fit_feedback_models(parse_ratings_csv(fixture_path("ratings_4pairs.csv")))
        assert [pair for pair, _ in stored] == [pair for pair, _ in fitted]
        for (_, a), (_, b) in zip(stored, fitted):
            assert a.mu == pytest.approx(b.mu, abs=1e-12)
            assert a.sigma == pytest.approx(b.sigma, abs=1e-12)

    def test_written_models_parse_back(self, fixture_path):
        fitted = fit_feedback_models(parse_ratings_csv(fixture_path("ratings_4pairs.csv")))
        again = parse_models_csv(io.StringIO(write_models_csv(fitted)))
        assert again == fitted


class TestFitFeedbackModels:
    @pytest.mark.parametrize("values, mu, sigma", [
        ((3, 3, 3), 3.0, 0.0),
        ((2, 4), 3.0, 1.0),
        ((1, 2, 3, 4, 5), 3.0, math.sqrt(2.0)),
    ])
    def test_ml_estimates(self, values, mu, sigma):
        [(_, model)] = fit_feedback_models(one_pair(*values))
        assert model.mu == pytest.approx(mu, abs=1e-15)
        assert model.sigma == pytest.approx(sigma, abs=1e-15)

    def test_single_rating_is_point_mass(self):
        [(_, model)] = fit_feedback_models(one_pair(4))
        assert model.sigma == 0.0

    def test_sigma_floor(self):
        [(_, model)] = fit_feedback_models(one_pair(3, 3, 3), sigma_floor=0.25)
        assert model.sigma == 0.25
        [(_, wide)] = fit_feedback_models(one_pair(2, 4), sigma_floor=0.25)
        assert wide.sigma == 1.0

    def test_negative_floor(self):
        with pytest.raises(ValidationError):
            fit_feedback_models(one_pair(3, 4), sigma_floor=-0.1)


class TestBaselines:
    def test_values(self):
        data = one_pair(2, 3, 4)
        assert baseline_predictor(data, "R1")[("u", "i")] == 3.0
        assert baseline_predictor(data, "R2")[("u", "i")] == 2.0
        assert baseline_predictor(data, "r3")[("u", "i")] == 3.0

    def test_unknown(self):
        with pytest.raises(ValidationError):
            baseline_predictor(one_pair(3), "R4")

    def test_mean_predictor_minimizes_expected_mse(self, fixture_path):
        data = parse_ratings_csv(fixture_path("ratings_4pairs.csv"))
        models = [m for _, m in fit_feedback_models(data)]
        expected = {}
        for kind in ("R1", "R2", "R3"):
            predictions = baseline_predictor(data, kind)
            eval_set = make_evaluation_set(models, [predictions[p] for p in data.pairs])
            expected[kind] = mse_distribution(eval_set).mean
        assert expected["R1"] <= expected["R2"]
        assert expected["R1"] <= expected["R3"]

    def test_constant_raters_score_zero_under_r1(self):
        data = RepeatedRatings(entries={
            ("a", "x"): ((1, 4.0), (2, 4.0), (3, 4.0)),
            ("b", "x"): ((1, 2.0), (2, 2.0), (3, 2.0)),
        })
        models = [m for _, m in fit_feedback_models(data)]
        predictions = baseline_predictor(data, "R1")
        dist = mse_distribution(make_evaluation_set(models, [predictions[p] for p in data.pairs]))
        assert (dist.mean, dist.variance) == (0.0, 0.0)

    def test_constant_non_integer_raters_are_point_masses(self):
        data = RepeatedRatings(entries={
            ("u1", "i1"): ((1, 0.1), (2, 0.1), (3, 0.1)),
            ("u1", "i2"): ((1, 3.7), (2, 3.7), (3, 3.7), (4, 3.7), (5, 3.7)),
        })
        fitted = fit_feedback_models(data)
        assert [(m.mu, m.sigma) for _, m in fitted] == [(0.1, 0.0), (3.7, 0.0)]
        predictions = baseline_predictor(data, "R1")
        dist = rmse_distribution(make_evaluation_set([m for _, m in fitted], [predictions[p] for p in data.pairs]))
        assert (dist.mean, dist.variance) == (0.0, 0.0)


class TestPerTrialScores:
    def test_rmse_per_trial(self):
        data = RepeatedRatings(entries={("a", "x"): ((1, 3.0), (2, 3.0)), ("b", "x"): ((1, 5.0), (2, 3.0))})
        scores = per_trial_scores(data, {("a", "x"): 3.0, ("b", "x"): 3.0})
        assert scores[1] == pytest.approx(math.sqrt(2.0), abs=1e-15)
        assert scores[2] == 0.0
        assert list(scores) == [1, 2]

    def test_ragged_trials(self):
        data = RepeatedRatings(entries={("a", "x"): ((1, 3.0), (2, 4.0)), ("b", "x"): ((1, 5.0),)})
        predictions = {("a", "x"): 3.0, ("b", "x"): 3.0}
        with pytest.raises(ValidationError):
            per_trial_scores(data, predictions)
        assert common_trials(data) == [1]
        scores = per_trial_scores(data, predictions, common_trials_only=True)
        assert list(scores) == [1]
        assert scores[1] == pytest.approx(math.sqrt(2.0), abs=1e-15)

    def test_missing_prediction(self):
        with pytest.raises(ValidationError):
            per_trial_scores(one_pair(3, 4), {})

    def test_fixture_ranking_frequencies(self, fixture_path):
        data = parse_ratings_csv(fixture_path("ratings_2x2x2.csv"))
        names = ["R1", "R2", "R3"]
        scores = {k: per_trial_scores(data, baseline_predictor(data, k)) for k in names}
        matrix = [[scores[k][t] for k in names] for t in (1, 2)]
        assert scores["R1"][1] == pytest.approx(math.sqrt(1.5 / 4), abs=1e-15)
        assert scores["R2"][1] == 0.0
        freq = ranking_frequencies(matrix, names)
        assert freq.counts == {("R2", "R1", "R3"): 1, ("R1", "R2", "R3"): 1}
