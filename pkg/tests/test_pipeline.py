"""Config parsing, end-to-end orchestration, and bundle writing."""

import datetime as dt
import json

import numpy as np
import pytest

from crisiscast.errors import BadParameter, ParseError, PlanTooLarge
from crisiscast.evaluation import BacktestPlan
from crisiscast.io_csv import IngestConfig
from crisiscast.peaks import PeakConfig
from crisiscast.pipeline import (
    KeywordsConfig,
    PipelineConfig,
    PipelineResult,
    _derive_plan,
    run_pipeline,
    write_bundle,
)
from crisiscast.autoorder import SearchSpace
from crisiscast.series import ScenarioConfig
from crisiscast.synthetic import SyntheticParams, generate_synthetic

UTC = dt.timezone.utc

EXPECTED_FILES = {
    "order_search.csv",
    "forecast.csv",
    "peaks.csv",
    "regimes.csv",
    "regime_spans.csv",
    "backtest.csv",
    "leaderboard.csv",
    "summary.csv",
    "plot.csv",
    "model.json",
}


def fast_config(**overrides):
    """Small search space and short horizon so a full run stays quick."""
    base = dict(
        years=3,
        scenario=ScenarioConfig(
            covid_positive_weeks=("2016-W10", "2016-W11"),
            covid_negative_weeks=("2017-W10", "2017-W11"),
            horizon_weeks=12,
        ),
        search=SearchSpace(
            max_p=1, max_q=0, max_P=0, max_Q=0, d_set=(0,), D_set=(0,), s=52
        ),
        peak=PeakConfig(window_n=4, k=3.0),
        backtest_plan=BacktestPlan(
            initial_train_weeks=104, step_weeks=26, horizon_weeks=26, n_folds=1
        ),
        baseline_methods=("naive", "seasonal_naive", "trailing_yoy"),
        seed=11,
    )
    base.update(overrides)
    return PipelineConfig(**base)


class TestConfigParsing:
    def test_json_round_trip(self):
        config = fast_config()
        back = PipelineConfig.from_json(config.to_json())
        assert back == config

    def test_nested_objects_from_dicts(self):
        config = PipelineConfig.from_dict(
            {
                "years": 4,
                "seed": 3,
                "search": {"max_p": 1, "max_q": 1, "d_set": [0, 1], "s": 4},
                "peak": {"window_n": 5, "k": 2.5},
                "backtest_plan": {
                    "initial_train_weeks": 104,
                    "step_weeks": 26,
                    "horizon_weeks": 26,
                    "n_folds": 2,
                },
                "scenario": {"covid_positive_weeks": ["2020-W12"], "horizon_weeks": 10},
                "synthetic": {"annual_growth": 0.05},
                "ingest": {"metrics": ["tpv"]},
                "variants": ["with_covid"],
            }
        )
        assert isinstance(config.search, SearchSpace)
        assert config.search.d_set == (0, 1)
        assert isinstance(config.peak, PeakConfig)
        assert isinstance(config.backtest_plan, BacktestPlan)
        assert isinstance(config.scenario, ScenarioConfig)
        assert config.scenario.horizon_weeks == 10
        assert isinstance(config.synthetic, SyntheticParams)
        assert isinstance(config.ingest, IngestConfig)
        assert config.ingest.metrics == ("tpv",)

    def test_unknown_keys_rejected(self):
        with pytest.raises(BadParameter, match="unknown PipelineConfig keys"):
            PipelineConfig.from_dict({"yeers": 4})
        with pytest.raises(BadParameter, match="unknown SearchSpace keys"):
            PipelineConfig.from_dict({"search": {"maxp": 1}})

    def test_bad_json(self):
        with pytest.raises(ParseError):
            PipelineConfig.from_json("{not json")
        with pytest.raises(ParseError):
            PipelineConfig.from_json("[1, 2]")

    def test_variant_validation(self):
        with pytest.raises(BadParameter):
            PipelineConfig(variants=())
        with pytest.raises(BadParameter):
            PipelineConfig(variants=("with_covid", "with_covid"))
        with pytest.raises(BadParameter):
            PipelineConfig(variants=("sideways",))

    def test_scalar_validation(self):
        with pytest.raises(BadParameter):
            PipelineConfig(growth_mode="daily")
        with pytest.raises(BadParameter):
            PipelineConfig(seed="7")
        with pytest.raises(BadParameter):
            PipelineConfig(target_metric="")
        with pytest.raises(ParseError):
            PipelineConfig(covid_cutoff="2020-13")


class TestDerivePlan:
    def test_full_history_keeps_four_folds(self):
        plan = _derive_plan(313)
        assert (plan.initial_train_weeks, plan.n_folds) == (209, 4)
        assert plan.required_length() == 313

    def test_folds_shrink_for_short_series(self):
        plan = _derive_plan(160)
        assert (plan.initial_train_weeks, plan.n_folds) == (108, 2)

    def test_too_short(self):
        with pytest.raises(PlanTooLarge):
            _derive_plan(129)


class TestRunPipeline:
    def test_bundle_contents_and_determinism(self):
        config = fast_config()
        result = run_pipeline(config)
        assert isinstance(result, PipelineResult)
        assert result.variants == ("with_covid",)
        assert set(result.files) == EXPECTED_FILES | {"config.json"}

        # forecast covers the configured horizon, one row per week
        lines = result.files["forecast.csv"].splitlines()
        assert lines[0] == "week_start,p50,p90,flagged"
        assert len(lines) == 1 + 12

        again = run_pipeline(config)
        assert again.files == result.files

    def test_forecast_quantiles_ordered(self):
        result = run_pipeline(fast_config())
        for line in result.files["forecast.csv"].splitlines()[1:]:
            week, p50, p90, flagged = line.split(",")
            assert float(p90) >= float(p50)
            assert flagged in ("0", "1")

    def test_model_json_documents_the_fit(self):
        result = run_pipeline(fast_config())
        doc = json.loads(result.files["model.json"])
        assert doc["variant"] == "with_covid"
        assert tuple(doc["order"]) == result.selected_orders["with_covid"]
        assert doc["converged"] is True
        rows = doc["regimes"]["transition"]
        assert sum(rows[0]) == pytest.approx(1.0, abs=1e-9)
        assert sum(rows[1]) == pytest.approx(1.0, abs=1e-9)
        assert "covid" in doc["exog_betas"]
        assert "peak" in doc["exog_betas"]

    def test_empty_scenario_drops_the_covid_flag(self):
        config = fast_config(
            scenario=ScenarioConfig(
                covid_positive_weeks=(), covid_negative_weeks=(), horizon_weeks=12
            )
        )
        result = run_pipeline(config)
        doc = json.loads(result.files["model.json"])
        assert "covid" not in doc["exog_betas"]

    def test_two_variants_namespace_the_bundle(self, tmp_path):
        from crisiscast.report import render_input_csv
        from crisiscast.series import build_covid_flag

        multi = generate_synthetic(6, seed=4)
        text = render_input_csv(list(multi.components), [])
        path = tmp_path / "input.csv"
        path.write_text(text, encoding="utf-8")

        config = fast_config(
            input_path=str(path),
            scenario=ScenarioConfig(horizon_weeks=12),
            variants=("with_covid", "without_covid"),
            covid_cutoff="2020-W01",
            backtest_plan=BacktestPlan(
                initial_train_weeks=180, step_weeks=26, horizon_weeks=26, n_folds=1
            ),
        )
        result = run_pipeline(config)
        assert result.variants == ("with_covid", "without_covid")
        for variant in result.variants:
            for name in EXPECTED_FILES:
                assert f"{variant}/{name}" in result.files
        assert set(result.selected_orders) == {"with_covid", "without_covid"}

        # the without-covid forecast starts at the cutoff week
        first = result.files["without_covid/forecast.csv"].splitlines()[1]
        assert first.split(",")[0] == "2019-12-30"
        later = result.files["with_covid/forecast.csv"].splitlines()[1]
        assert later.split(",")[0] > "2020-06-01"

    def test_missing_input_fails_in_ingest_stage(self, tmp_path):
        config = fast_config(input_path=str(tmp_path / "gone.csv"))
        with pytest.raises(ParseError, match="^ingest: "):
            run_pipeline(config)

    def test_unknown_target_fails_in_generate_stage(self):
        config = fast_config(target_metric="revenue")
        with pytest.raises(BadParameter, match="^generate: "):
            run_pipeline(config)

    def test_backtest_stage_flags_short_series(self):
        config = fast_config(years=2, backtest_plan=None)
        with pytest.raises(PlanTooLarge, match="^backtest: "):
            run_pipeline(config)

    def test_keywords_stage(self, tmp_path):
        corpus = tmp_path / "docs.txt"
        corpus.write_text(
            "\n".join(
                ["bread flour yeast water"] * 10
                + ["lego bricks toys puzzle"] * 10
            ),
            encoding="utf-8",
        )
        seeds = tmp_path / "seeds.csv"
        seeds.write_text("bread,1.0\nflour,0.9\nlego,0.1\n", encoding="utf-8")
        rng = np.random.default_rng(12)
        vocab = ["bread", "flour", "yeast", "water", "lego", "bricks", "toys", "puzzle"]
        emb = tmp_path / "vectors.txt"
        emb.write_text(
            "\n".join(
                f"{term} " + " ".join(f"{x:.6f}" for x in rng.normal(size=4))
                for term in vocab
            ),
            encoding="utf-8",
        )
        config = fast_config(
            keywords=KeywordsConfig(
                corpus_path=str(corpus),
                seeds_path=str(seeds),
                embeddings_path=str(emb),
                n_topics=2,
                iterations=20,
                m_neighbors=2,
                min_count=1,
            )
        )
        result = run_pipeline(config)
        lines = result.files["keywords.csv"].splitlines()
        assert lines[0] == "term,frequency,saliency,best_topic,relevance,essentiality,trend_ratio"
        assert len(lines) == 1 + len(vocab)

    def test_keywords_stage_prefixes_errors(self, tmp_path):
        config = fast_config(
            keywords=KeywordsConfig(corpus_path=str(tmp_path / "missing.txt"))
        )
        with pytest.raises(ParseError, match="^keywords: "):
            run_pipeline(config)


class TestWriteBundle:
    def test_writes_and_names_the_run_dir(self, tmp_path):
        files = {"a.csv": "x,y\n1,2\n", "nested/b.json": "{}"}
        when = dt.datetime(2021, 1, 2, 3, 4, 5, tzinfo=UTC)
        run_dir = write_bundle(files, tmp_path, seed=9, when=when)
        assert run_dir.name == "run-20210102T030405Z-seed9"
        assert (run_dir / "a.csv").read_text(encoding="utf-8") == files["a.csv"]
        assert (run_dir / "nested" / "b.json").read_text(encoding="utf-8") == "{}"

    def test_collision_appends_counter(self, tmp_path):
        when = dt.datetime(2021, 1, 2, 3, 4, 5, tzinfo=UTC)
        first = write_bundle({"a": "1"}, tmp_path, seed=9, when=when)
        second = write_bundle({"a": "2"}, tmp_path, seed=9, when=when)
        assert second.name == f"{first.name}-2"
        assert (first / "a").read_text() == "1"
        assert (second / "a").read_text() == "2"
