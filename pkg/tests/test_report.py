"""Annual summary arithmetic and CSV renderer contracts."""

import datetime as dt
import io as stdio

import numpy as np
import pytest

from conftest import MONDAY, make_series
from crisiscast.errors import BadParameter, IncompleteYear
from crisiscast.io_csv import ingest
from crisiscast.msar import RegimeFit, RegimeParams, RegimeSpan, TransitionMatrix
from crisiscast.peaks import PeakConfig, scan_peaks
from crisiscast.report import (
    emit_summary,
    format_cell,
    render_csv,
    render_forecast_csv,
    render_input_csv,
    render_keywords_csv,
    render_peaks_csv,
    render_plot_csv,
    render_regime_spans_csv,
    render_regimes_csv,
    render_summary_csv,
)
from crisiscast.series import WEEK, FlagSeries, WeeklySeries

Y2016 = dt.date.fromisocalendar(2016, 1, 1)


def year_series(name, *year_values):
    """One constant block of 52 weekly values per year, starting 2016."""
    values = np.concatenate([np.full(52, v) for v in year_values])
    return WeeklySeries(name=name, start_week=Y2016, values=values)


class TestEmitSummary:
    def test_constant_two_years(self):
        table = emit_summary({"tpv": year_series("tpv", 1.0, 1.0)})
        assert table.years == (2016, 2017)
        levels = dict(table.levels)
        assert levels["tpv"] == (52.0, 52.0)
        assert levels["ttm_tpv"] == (52.0, 52.0)
        yoy = dict(table.yoy)
        assert yoy["tpv"] == (None, 0.0)

    def test_fifty_percent_growth(self):
        table = emit_summary({"tpv": year_series("tpv", 2.0, 3.0)})
        yoy = dict(table.yoy)
        assert yoy["tpv"][1] == pytest.approx(50.0, abs=1e-12)

    def test_yoy_recomputable_from_levels(self):
        rng = np.random.default_rng(110)
        histories = {
            name: WeeklySeries(
                name=name, start_week=Y2016, values=rng.uniform(10.0, 90.0, size=156)
            )
            for name in ("tpv", "new_usd")
        }
        table = emit_summary(histories)
        yoy = dict(table.yoy)
        for label, row in table.levels:
            for j in range(1, len(row)):
                want = (row[j] / row[j - 1] - 1.0) * 100.0
                assert yoy[label][j] == pytest.approx(want, abs=1e-9)

    def test_ttm_is_trailing_52_week_sum(self):
        rng = np.random.default_rng(111)
        values = rng.uniform(1.0, 5.0, size=156)
        table = emit_summary({"tpv": WeeklySeries("tpv", Y2016, values)})
        levels = dict(table.levels)
        for j, year in enumerate(table.years):
            hi = (dt.date.fromisocalendar(year + 1, 1, 1) - Y2016).days // 7
            assert levels["ttm_tpv"][j] == pytest.approx(values[hi - 52 : hi].sum(), rel=1e-12)

    def test_forecast_extends_the_years(self):
        history = {"tpv": year_series("tpv", 1.0)}
        # ten extra weeks cannot complete 2017
        short = emit_summary(history, forecasts={"tpv": [2.0] * 10})
        assert short.years == (2016,)
        table = emit_summary(history, forecasts={"tpv": [2.0] * 52})
        levels = dict(table.levels)
        assert table.years == (2016, 2017)
        assert levels["tpv"] == (52.0, 104.0)
        assert dict(table.yoy)["tpv"][1] == pytest.approx(100.0, abs=1e-12)

    def test_share_averages(self):
        tpv = year_series("tpv", 4.0, 4.0)
        new = year_series("new_usd", 1.0, 2.0)
        table = emit_summary({"tpv": tpv, "new_usd": new})
        averages = dict(table.averages)
        assert averages["new_usd_share_pct"][0] == pytest.approx(25.0, abs=1e-12)
        assert averages["new_usd_share_pct"][1] == pytest.approx(50.0, abs=1e-12)

    def test_partial_year_rejected(self):
        start = Y2016 + 2 * WEEK
        series = WeeklySeries("tpv", start, np.ones(60))
        with pytest.raises(IncompleteYear):
            emit_summary({"tpv": series})

    def test_grid_mismatch_rejected(self):
        a = year_series("tpv", 1.0, 1.0)
        b = WeeklySeries("new_usd", Y2016 + WEEK, np.ones(104))
        with pytest.raises(BadParameter):
            emit_summary({"tpv": a, "new_usd": b})
        with pytest.raises(BadParameter):
            emit_summary({})

    def test_zero_prior_year_yields_blank(self):
        table = emit_summary({"tpv": year_series("tpv", 0.0, 3.0)})
        assert dict(table.yoy)["tpv"] == (None, None)


def parse(text):
    import csv

    return list(csv.reader(stdio.StringIO(text)))


class TestRenderers:
    def test_format_cell(self):
        assert format_cell(None) == ""
        assert format_cell(float("nan")) == ""
        assert format_cell(True) == "1"
        assert format_cell(False) == "0"
        assert format_cell(np.int64(7)) == "7"
        assert format_cell(0.1) == "0.1"
        assert format_cell(dt.date(2020, 3, 2)) == "2020-03-02"
        assert format_cell("x") == "x"
        with pytest.raises(BadParameter):
            format_cell(complex(1, 2))

    def test_float_cells_round_trip(self):
        value = 1072639.6427744324
        text = render_csv(["v"], [[value]])
        assert float(parse(text)[1][0]) == value

    def test_summary_csv_layout(self):
        table = emit_summary({"tpv": year_series("tpv", 1.0, 1.0)})
        grid = parse(render_summary_csv(table))
        assert grid[0] == ["section", "row", "2016", "2017"]
        sections = {row[0] for row in grid[1:]}
        assert sections == {"levels", "yoy_pct"}
        yoy_row = next(r for r in grid[1:] if r[0] == "yoy_pct" and r[1] == "tpv")
        assert yoy_row[2] == ""  # no prior year
        assert float(yoy_row[3]) == 0.0

    def test_forecast_csv(self):
        text = render_forecast_csv(
            MONDAY, [10.0, 11.0, 12.0], [13.0, 14.0, 15.0], np.array([False, True, False])
        )
        grid = parse(text)
        assert grid[0] == ["week_start", "p50", "p90", "flagged"]
        assert len(grid) == 4
        assert grid[1][0] == MONDAY.isoformat()
        assert grid[2][0] == (MONDAY + WEEK).isoformat()
        assert [r[3] for r in grid[1:]] == ["0", "1", "0"]

    def test_peaks_csv(self):
        values = [10.0] * 8 + [10.0 + 40.0]
        series = make_series(values)
        scan = scan_peaks(series, PeakConfig(window_n=8, k=3.0))
        grid = parse(render_peaks_csv(series, scan))
        assert grid[0][:3] == ["week_start", "forecast", "moving_avg"]
        assert len(grid) == 10
        assert grid[1][2] == ""  # before the first full window
        assert grid[9][4] == "1"

    def test_regimes_csv(self):
        probs = np.array([0.1, 0.9, 0.6])
        smoothed = np.column_stack([1.0 - probs, probs])
        fit = RegimeFit(
            regimes=(RegimeParams(0.0, (0.1,), 1.0), RegimeParams(0.0, (0.1,), 2.0)),
            trans=TransitionMatrix(0.9, 0.1, 0.3, 0.7),
            initial_dist=(0.5, 0.5),
            filtered_probs=smoothed.copy(),
            smoothed_probs=smoothed,
            loglik=-10.0,
            ar_order=1,
            start_week=MONDAY + WEEK,
            em_histories=((-11.0, -10.0),),
        )
        growth = make_series([0.0, 0.01, -0.02, 0.03])
        grid = parse(render_regimes_csv(fit, growth))
        assert grid[0] == ["week_start", "growth", "covid_probability", "regime"]
        assert len(grid) == 4
        assert [r[3] for r in grid[1:]] == ["Normal", "COVID", "COVID"]
        assert float(grid[1][1]) == 0.01  # offset by the conditioning week

    def test_regime_spans_csv(self):
        spans = [RegimeSpan(MONDAY, MONDAY + WEEK, "COVID")]
        grid = parse(render_regime_spans_csv(spans))
        assert grid[1] == [MONDAY.isoformat(), (MONDAY + WEEK).isoformat(), "COVID"]

    def test_keywords_csv_blank_optionals(self):
        from crisiscast.keywords import KeywordRow

        rows = [KeywordRow("bread", 4, 1.5, 0, 0.7, None, None)]
        grid = parse(render_keywords_csv(rows))
        assert grid[1] == ["bread", "4", "1.5", "0", "0.7", "", ""]

    def test_plot_csv_splits_history_and_forecast(self):
        actual = make_series([5.0, 6.0])
        fitted = np.array([np.nan, 5.5])
        text = render_plot_csv(
            actual,
            fitted,
            MONDAY + 2 * WEEK,
            [7.0],
            [8.0],
            regime_weeks={MONDAY + WEEK: 0.25},
            peak_flags={MONDAY + 2 * WEEK: 1},
            covid_flags={MONDAY: 1},
        )
        grid = parse(text)
        assert len(grid) == 4
        history_row = grid[1]
        assert history_row[1] == "5.0" and history_row[2] == "" and history_row[3] == ""
        assert history_row[7] == "1"
        forecast_row = grid[3]
        assert forecast_row[1] == "" and forecast_row[3] == "7.0" and forecast_row[4] == "8.0"
        assert forecast_row[6] == "1"
        assert grid[2][5] == "0.25"

    def test_input_csv_round_trips_through_ingest(self, tmp_path):
        metrics = [make_series([1.5, 2.5, 3.5], name="tpv")]
        flags = [FlagSeries("covid", MONDAY, np.array([0, 1, -1]))]
        text = render_input_csv(metrics, flags)
        path = tmp_path / "round.csv"
        path.write_text(text, encoding="utf-8")
        multi, back_flags = ingest(str(path))
        assert np.array_equal(multi.get("tpv").values, metrics[0].values)
        assert list(back_flags[0].values) == [0, 1, -1]

    def test_input_csv_grid_checked(self):
        metrics = [make_series([1.0, 2.0]), make_series([1.0, 2.0, 3.0], name="other")]
        with pytest.raises(BadParameter):
            render_input_csv(metrics, [])
        with pytest.raises(BadParameter):
            render_input_csv([], [])
