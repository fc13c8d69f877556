import json

import pytest

import main
from cli import UsageError, parse_args


def run(*argv):
    return main.main(list(argv) + ["--quiet"])


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def model_inputs(fixture_path):
    return ["--models", fixture_path("models_4pairs.csv"), "--predictions", fixture_path("predictions_4pairs.csv")]


class TestRank:
    def test_zero_variance_systems(self, tmp_path):
        systems = tmp_path / "systems.json"
        systems.write_text(json.dumps({"systems": [
            {"id": "B", "mean": 2.0, "variance": 0.0},
            {"id": "A", "mean": 1.0, "variance": 0.0},
        ]}))
        out = tmp_path / "rank.json"
        assert run("rank", "--systems", str(systems), "--out", str(out), "--format", "json") == main.EXIT_OK
        document = read_json(out)
        assert list(document)[0] == "provenance"
        assert document["provenance"]["config"]["subcommand"] == "rank"
        assert document["ranking"]["order"] == ["A", "B"]
        assert document["ranking"]["error_matrix"][0][1] == 0.0

    def test_propagate_output_as_system(self, tmp_path, model_inputs):
        first = tmp_path / "first.json"
        assert run("propagate", *model_inputs, "--out", str(first)) == main.EXIT_OK
        second = tmp_path / "second.json"
        second.write_text(json.dumps({"distribution": {"mean": 10.0, "variance": 0.0}}))
        out = tmp_path / "rank.json"
        assert run("rank", "--systems", str(first), str(second), "--out", str(out), "--format", "json") == 0
        assert read_json(out)["ranking"]["order"] == ["first", "second"]


class TestSimulate:
    def test_same_seed_same_bytes(self, tmp_path, model_inputs):
        out, samples = tmp_path / "sim.json", tmp_path / "samples.csv"
        args = ["simulate", *model_inputs, "--tau", "600", "--seed", "42",
                "--out", str(out), "--samples-out", str(samples)]
        assert run(*args) == main.EXIT_OK
        first = (out.read_bytes(), samples.read_bytes())
        assert run(*args) == main.EXIT_OK
        assert (out.read_bytes(), samples.read_bytes()) == first

    def test_samples_file(self, tmp_path, model_inputs):
        samples = tmp_path / "samples.csv"
        run("simulate", *model_inputs, "--tau", "50", "--out", str(tmp_path / "o.json"), "--samples-out", str(samples))
        lines = samples.read_text().splitlines()
        assert lines[0].startswith("# ")
        assert lines[1] == "sample"
        assert len(lines) == 52

    def test_config_precedence(self, tmp_path, model_inputs):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"subcommand": "simulate", "tau": 300, "seed": 5}))
        out = tmp_path / "o.json"
        assert run("simulate", *model_inputs, "--config", str(config), "--out", str(out)) == 0
        document = read_json(out)
        assert (document["tau"], document["seed"]) == (300, 5)
        assert run("simulate", *model_inputs, "--config", str(config), "--tau", "200", "--out", str(out)) == 0
        document = read_json(out)
        assert (document["tau"], document["seed"]) == (200, 5)

    def test_csv_preamble(self, tmp_path, model_inputs):
        out = tmp_path / "sim.csv"
        assert run("simulate", *model_inputs, "--tau", "20", "--format", "csv", "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        preamble = json.loads(lines[0][2:])
        assert preamble["config"]["tau"] == 20
        assert lines[1] == "trial,value"
        assert len(lines) == 22


class TestAnalyze:
    def test_fixture_frequencies(self, tmp_path, fixture_path):
        out, models = tmp_path / "analyze.json", tmp_path / "models.csv"
        code = run("analyze", "--ratings", fixture_path("ratings_2x2x2.csv"),
                   "--out", str(out), "--models-out", str(models))
        assert code == main.EXIT_OK
        document = read_json(out)
        assert document["ranking_frequencies"] == {"n_trials": 2, "counts": {"R2,R1,R3": 1, "R1,R2,R3": 1}}
        assert document["systems"]["R2"]["per_trial"]["1"] == 0.0
        assert models.read_text().splitlines()[0] == "user_id,item_id,mu,sigma"


class TestExitCodes:
    def test_unknown_flag(self):
        assert run("simulate", "--bogus") == main.EXIT_USAGE

    def test_unknown_config_key(self, tmp_path, model_inputs):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"taus": 10}))
        assert run("simulate", *model_inputs, "--config", str(config)) == main.EXIT_USAGE

    def test_config_for_other_subcommand(self, tmp_path, model_inputs):
        config = tmp_path / "gof.json"
        config.write_text(json.dumps({"subcommand": "gof"}))
        assert run("simulate", *model_inputs, "--config", str(config)) == main.EXIT_USAGE

    def test_p_max_of_one_is_a_usage_error(self, tmp_path):
        systems = tmp_path / "systems.json"
        systems.write_text(json.dumps({"systems": [{"id": "A", "mean": 1.0, "variance": 0.0},
                                                   {"id": "B", "mean": 2.0, "variance": 0.0}]}))
        assert run("rank", "--systems", str(systems), "--p-max", "1.0") == main.EXIT_USAGE

    def test_bad_data(self, tmp_path):
        ratings = tmp_path / "ratings.csv"
        ratings.write_text("user_id,item_id,trial,rating\nu1,i1,1,four\n")
        assert run("analyze", "--ratings", str(ratings), "--out", str(tmp_path / "o.json")) == main.EXIT_DATA

    def test_missing_file(self, tmp_path):
        missing = str(tmp_path / "nope.csv")
        assert run("analyze", "--ratings", missing, "--out", str(tmp_path / "o.json")) == main.EXIT_DATA

    def test_missing_predictions(self, tmp_path, fixture_path):
        code = run("propagate", "--models", fixture_path("models_4pairs.csv"), "--out", str(tmp_path / "o.json"))
        assert code == main.EXIT_DATA


class TestParseArgs:
    def test_defaults_and_flags(self):
        subcommand, cfg, _ = parse_args(["sweep", "--driver", "sensitivity", "--grid", "0:1:0.5"])
        assert subcommand == "sweep"
        assert cfg["grid"] == [0.0, 0.5, 1.0]
        assert cfg["format"] == "csv"

    @pytest.mark.parametrize("p_max", ["0", "1.0", "1.5"])
    def test_p_max_range(self, p_max):
        with pytest.raises(UsageError):
            parse_args(["rank", "--systems", "x.json", "--p-max", p_max])


class TestEnvironment:
    def test_preflight_passes_with_numerical_stack(self):
        import environment

        assert environment.preflight_checks() is None
        assert environment.ENV_PATH.endswith(".env")
