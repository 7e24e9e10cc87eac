"""Weekly CSV contract: header, Mondays, consecutive weeks, flag domain."""

import datetime as dt

import numpy as np
import pytest

from crisiscast.errors import BadParameter, GapError, NonMondayDate, ParseError
from crisiscast.io_csv import IngestConfig, ingest

START = dt.date(2019, 1, 7)


def write_csv(tmp_path, rows, header="week_start,tpv", name="input.csv"):
    path = tmp_path / name
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return str(path)


def weekly_rows(n, value=lambda i: 100.0 + i, start=START):
    return [
        f"{(start + dt.timedelta(weeks=i)).isoformat()},{value(i)}" for i in range(n)
    ]


class TestHappyPath:
    def test_two_column_file(self, tmp_path):
        path = write_csv(tmp_path, weekly_rows(260))
        multi, flags = ingest(path)
        assert len(multi.components) == 1
        assert len(multi.get("tpv")) == 260
        assert multi.get("tpv").start_week == START
        assert flags == []
        assert multi.get("tpv").values[3] == 103.0

    def test_metric_and_flag_split(self, tmp_path):
        rows = [
            f"{(START + dt.timedelta(weeks=i)).isoformat()},{50.0 + i},{10.0 * i},{1 if i == 2 else 0}"
            for i in range(5)
        ]
        path = write_csv(tmp_path, rows, header="week_start,tpv,new_usd,covid")
        multi, flags = ingest(path)
        assert {s.name for s in multi.components} == {"tpv", "new_usd"}
        assert len(flags) == 1 and flags[0].name == "covid"
        assert list(flags[0].values) == [0, 0, 1, 0, 0]

    def test_explicit_flag_config(self, tmp_path):
        rows = [f"{(START + dt.timedelta(weeks=i)).isoformat()},{i},{0}" for i in range(4)]
        path = write_csv(tmp_path, rows, header="week_start,tpv,promo")
        multi, flags = ingest(path, IngestConfig(flags=("promo",)))
        assert [s.name for s in multi.components] == ["tpv"]
        assert flags[0].name == "promo"

    def test_metric_subset_config(self, tmp_path):
        rows = [f"{(START + dt.timedelta(weeks=i)).isoformat()},{i},{2 * i}" for i in range(4)]
        path = write_csv(tmp_path, rows, header="week_start,tpv,extra")
        multi, flags = ingest(path, IngestConfig(metrics=("tpv",)))
        assert [s.name for s in multi.components] == ["tpv"]


class TestGaps:
    def test_missing_week_named(self, tmp_path):
        rows = weekly_rows(6)
        del rows[3]
        path = write_csv(tmp_path, rows)
        missing = (START + dt.timedelta(weeks=3)).isoformat()
        with pytest.raises(GapError, match=missing):
            ingest(path)

    def test_gap_fill_interpolates(self, tmp_path):
        rows = [
            f"{START.isoformat()},10.0",
            f"{(START + dt.timedelta(weeks=2)).isoformat()},30.0",
            f"{(START + dt.timedelta(weeks=3)).isoformat()},40.0",
        ]
        path = write_csv(tmp_path, rows)
        multi, _ = ingest(path, IngestConfig(fill_gaps=True))
        assert list(multi.get("tpv").values) == [10.0, 20.0, 30.0, 40.0]

    def test_gap_fill_zeroes_flags(self, tmp_path):
        rows = [
            f"{START.isoformat()},10.0,1",
            f"{(START + dt.timedelta(weeks=2)).isoformat()},30.0,1",
        ]
        path = write_csv(tmp_path, rows, header="week_start,tpv,covid")
        multi, flags = ingest(path, IngestConfig(fill_gaps=True))
        assert list(multi.get("tpv").values) == [10.0, 20.0, 30.0]
        assert list(flags[0].values) == [1, 0, 1]

    def test_out_of_order_rejected(self, tmp_path):
        rows = weekly_rows(2)[::-1]
        with pytest.raises(ParseError, match="out of order"):
            ingest(write_csv(tmp_path, rows))

    def test_duplicate_week_rejected(self, tmp_path):
        rows = weekly_rows(3) + [weekly_rows(3)[-1]]
        with pytest.raises(ParseError, match="out of order or duplicated"):
            ingest(write_csv(tmp_path, rows))


class TestBadCells:
    def test_flag_value_two_rejected(self, tmp_path):
        rows = [
            f"{START.isoformat()},10.0,0",
            f"{(START + dt.timedelta(weeks=1)).isoformat()},11.0,2",
        ]
        path = write_csv(tmp_path, rows, header="week_start,tpv,covid")
        with pytest.raises(ParseError, match=r"covid.*2"):
            ingest(path)

    def test_fractional_flag_rejected(self, tmp_path):
        rows = [f"{START.isoformat()},10.0,0.5"]
        path = write_csv(tmp_path, rows, header="week_start,tpv,covid")
        with pytest.raises(ParseError):
            ingest(path)

    def test_non_numeric_metric_names_row(self, tmp_path):
        rows = weekly_rows(3)
        rows[1] = rows[1].replace("101.0", "lots")
        with pytest.raises(ParseError, match=r":3.*tpv"):
            ingest(write_csv(tmp_path, rows))

    def test_non_finite_metric(self, tmp_path):
        rows = weekly_rows(2) + [f"{(START + dt.timedelta(weeks=2)).isoformat()},nan"]
        with pytest.raises(ParseError, match="non-finite"):
            ingest(write_csv(tmp_path, rows))

    def test_non_monday_rejected(self, tmp_path):
        rows = weekly_rows(2) + [f"{(START + dt.timedelta(weeks=2, days=1)).isoformat()},5.0"]
        with pytest.raises(NonMondayDate, match=":4"):
            ingest(write_csv(tmp_path, rows))

    def test_bad_date_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            ingest(write_csv(tmp_path, ["2019-13-45,1.0"]))

    def test_ragged_row_rejected(self, tmp_path):
        rows = weekly_rows(2) + [f"{(START + dt.timedelta(weeks=2)).isoformat()}"]
        with pytest.raises(ParseError, match="cells"):
            ingest(write_csv(tmp_path, rows))


class TestFileShape:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            ingest(str(tmp_path / "nope.csv"))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ParseError, match="empty"):
            ingest(str(path))

    def test_header_only(self, tmp_path):
        with pytest.raises(ParseError, match="no data rows"):
            ingest(write_csv(tmp_path, []))

    def test_wrong_first_column(self, tmp_path):
        with pytest.raises(ParseError, match="week_start"):
            ingest(write_csv(tmp_path, ["2019-01-07,1"], header="date,tpv"))

    def test_duplicate_columns(self, tmp_path):
        with pytest.raises(ParseError, match="duplicate"):
            ingest(write_csv(tmp_path, ["2019-01-07,1,2"], header="week_start,tpv,tpv"))

    def test_no_metric_columns(self, tmp_path):
        path = write_csv(tmp_path, ["2019-01-07,0"], header="week_start,covid")
        with pytest.raises(ParseError, match="no metric columns"):
            ingest(path)

    def test_config_names_missing_column(self, tmp_path):
        path = write_csv(tmp_path, weekly_rows(3))
        with pytest.raises(BadParameter, match="not in the header"):
            ingest(path, IngestConfig(metrics=("revenue",)))

    def test_column_cannot_be_metric_and_flag(self, tmp_path):
        path = write_csv(tmp_path, weekly_rows(3))
        with pytest.raises(BadParameter, match="both"):
            ingest(path, IngestConfig(metrics=("tpv",), flags=("tpv",)))


class TestRoundTrip:
    def test_generated_bundle_reingests(self, tmp_path):
        from crisiscast.synthetic import generate_synthetic

        multi = generate_synthetic(3, seed=5)
        tpv = multi.get("tpv")
        rows = [
            f"{tpv.week_at(i).isoformat()},{float(tpv.values[i])!r},"
            f"{float(multi.get('new_usd').values[i])!r}"
            for i in range(len(tpv))
        ]
        path = write_csv(tmp_path, rows, header="week_start,tpv,new_usd")
        back, _ = ingest(path)
        assert np.array_equal(back.get("tpv").values, tpv.values)
        assert np.array_equal(back.get("new_usd").values, multi.get("new_usd").values)
