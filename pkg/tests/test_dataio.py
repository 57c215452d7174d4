"""CSV ingestion and canonical round-trip tests."""

import datetime as dt

import numpy as np
import pytest

from enspost.core import MarginIndex, TEMPERATURE, WIND_SPEED
from enspost.dataio import (
    ingest_dataset,
    read_ensemble_csv,
    write_dataset_csv,
    write_ensemble_csv,
)
from enspost.errors import EmptyDatasetError, ParseError, SchemaError

from conftest import make_dataset


def _write_files(tmp_path, dates, members=2, drop_obs_dates=(), wind_value=3.5):
    forecast = tmp_path / "forecast.csv"
    obs = tmp_path / "observations.csv"
    fc_lines = ["date,station,variable,lead_hours,member,value"]
    ob_lines = ["date,station,variable,lead_hours,value"]
    for d in dates:
        iso = d.isoformat()
        for k in range(1, members + 1):
            fc_lines.append(f"{iso},s1,temperature,24,{k},{10.0 + k}")
            fc_lines.append(f"{iso},s1,wind_speed,24,{k},{wind_value + 0.1 * k}")
        if d not in drop_obs_dates:
            ob_lines.append(f"{iso},s1,temperature,24,11.2")
            ob_lines.append(f"{iso},s1,wind_speed,24,{wind_value}")
    forecast.write_text("\n".join(fc_lines) + "\n", encoding="utf-8")
    obs.write_text("\n".join(ob_lines) + "\n", encoding="utf-8")
    return forecast, obs


def test_identity_ingestion(tmp_path):
    dates = [dt.date(2021, 1, 1) + dt.timedelta(days=i) for i in range(10)]
    forecast, obs = _write_files(tmp_path, dates)
    ds = ingest_dataset(forecast, obs)
    assert len(ds) == 10
    assert ds.dropped_dates == ()
    assert len(ds.margin_catalog) == 2


def test_missing_observation_date_dropped(tmp_path):
    dates = [dt.date(2021, 1, 1) + dt.timedelta(days=i) for i in range(5)]
    forecast, obs = _write_files(tmp_path, dates, drop_obs_dates={dates[2]})
    ds = ingest_dataset(forecast, obs)
    assert len(ds) == 4
    assert ds.dropped_dates == (dates[2],)


def test_negative_wind_observation_is_schema_error(tmp_path):
    dates = [dt.date(2021, 1, 1)]
    forecast, obs = _write_files(tmp_path, dates)
    text = obs.read_text().replace("wind_speed,24,3.5", "wind_speed,24,-0.3")
    obs.write_text(text)
    with pytest.raises(SchemaError, match=r"wind_speed.*line|line.*wind_speed"):
        ingest_dataset(forecast, obs)


def test_malformed_row_reports_line_number(tmp_path):
    dates = [dt.date(2021, 1, 1)]
    forecast, obs = _write_files(tmp_path, dates)
    forecast.write_text(forecast.read_text().replace("24,1,11.0", "24,1,not-a-number"))
    with pytest.raises(ParseError, match="line"):
        ingest_dataset(forecast, obs)


def test_inconsistent_member_count_is_schema_error(tmp_path):
    dates = [dt.date(2021, 1, 1)]
    forecast, obs = _write_files(tmp_path, dates)
    with open(forecast, "a", encoding="utf-8") as fh:
        fh.write("2021-01-01,s1,temperature,24,3,12.5\n")
    with pytest.raises(SchemaError, match="member"):
        ingest_dataset(forecast, obs)


def test_empty_intersection(tmp_path):
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    dir_a.mkdir()
    dir_b.mkdir()
    forecast, _ = _write_files(dir_a, [dt.date(2021, 1, 1)])
    _, obs = _write_files(dir_b, [dt.date(2022, 1, 1)])
    with pytest.raises(EmptyDatasetError):
        ingest_dataset(forecast, obs)


def test_serialize_ingest_is_fixed_point(tmp_path):
    ds = make_dataset(n_days=8, n_members=4)
    f1, o1 = tmp_path / "f1.csv", tmp_path / "o1.csv"
    write_dataset_csv(ds, f1, o1)
    ds2 = ingest_dataset(f1, o1)
    f2, o2 = tmp_path / "f2.csv", tmp_path / "o2.csv"
    write_dataset_csv(ds2, f2, o2)
    assert f1.read_bytes() == f2.read_bytes()
    assert o1.read_bytes() == o2.read_bytes()
    # and values survive exactly
    np.testing.assert_array_equal(
        ds.instances[0][0].members, ds2.instances[0][0].members
    )


def test_ensemble_csv_round_trip(tmp_path):
    ds = make_dataset(n_days=3, n_members=4)
    named = [("variant_a", ds.instances[0][0]), ("variant_b", ds.instances[1][0])]
    path = tmp_path / "ens.csv"
    write_ensemble_csv(named, path)
    back = read_ensemble_csv(path)
    assert set(back) == {"variant_a", "variant_b"}
    np.testing.assert_array_equal(back["variant_a"][0].members, ds.instances[0][0].members)
