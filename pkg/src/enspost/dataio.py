"""CSV ingestion and canonical serialization.

File schemas (UTF-8, LF-terminated, `.` decimal separator):

* forecast:     ``date,station,variable,lead_hours,member,value``
* observation:  ``date,station,variable,lead_hours,value``
* ensemble:     forecast schema plus a leading ``ensemble_name`` column
* histogram:    ``kind,rank,count``
* score report: ``ensemble_name,metric,value``

Serialization is canonical: rows sorted by (date, station, lead, variable,
member), floats written with shortest round-trip ``repr``. Ingesting a
serialized dataset and serializing again reproduces the bytes exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import io

import numpy as np

from .core import (
    Dataset,
    EnsembleForecast,
    MarginIndex,
    NONNEGATIVE_VARIABLES,
    Observation,
    canonical_catalog,
)
from .errors import EmptyDatasetError, ParseError, SchemaError

FORECAST_HEADER = ["date", "station", "variable", "lead_hours", "member", "value"]
OBSERVATION_HEADER = ["date", "station", "variable", "lead_hours", "value"]
ENSEMBLE_HEADER = ["ensemble_name"] + FORECAST_HEADER
HISTOGRAM_HEADER = ["kind", "rank", "count"]
SCORE_HEADER = ["ensemble_name", "metric", "value"]


def _open_rows(path, expected_header):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line_number=1) from None
        if header != expected_header:
            raise ParseError(f"{path}: expected header {expected_header}, got {header}", line_number=1)
        yield from ((lineno, row) for lineno, row in enumerate(reader, start=2))


def _parse_common(row, lineno, n_fields):
    if len(row) != n_fields:
        raise ParseError(f"expected {n_fields} fields, got {len(row)}", line_number=lineno)
    try:
        date = dt.date.fromisoformat(row[0])
    except ValueError:
        raise ParseError(f"bad date {row[0]!r}", line_number=lineno) from None
    station, variable = row[1], row[2]
    try:
        lead = int(row[3])
    except ValueError:
        raise ParseError(f"bad lead_hours {row[3]!r}", line_number=lineno) from None
    try:
        margin = MarginIndex(variable, station, lead)
    except SchemaError as exc:
        raise ParseError(str(exc), line_number=lineno) from None
    try:
        value = float(row[-1])
    except ValueError:
        raise ParseError(f"bad value {row[-1]!r}", line_number=lineno) from None
    if not np.isfinite(value):
        raise SchemaError(f"line {lineno}: non-finite value for margin {margin}")
    if variable in NONNEGATIVE_VARIABLES and value < 0:
        raise SchemaError(f"line {lineno}: negative {variable} value {value} for margin {margin}")
    return date, margin, value


def _read_forecasts(path):
    """-> dict date -> dict margin -> dict member -> value, and the margin set."""
    by_date = {}
    margins = set()
    for lineno, row in _open_rows(path, FORECAST_HEADER):
        date, margin, value = _parse_common(row, lineno, 6)
        try:
            member = int(row[4])
        except ValueError:
            raise ParseError(f"bad member index {row[4]!r}", line_number=lineno) from None
        if member < 1:
            raise ParseError(f"member indices start at 1, got {member}", line_number=lineno)
        margins.add(margin)
        cell = by_date.setdefault(date, {}).setdefault(margin, {})
        if member in cell:
            raise SchemaError(f"line {lineno}: duplicate member {member} for {margin} on {date}")
        cell[member] = value
    return by_date, margins


def _read_observations(path):
    by_date = {}
    for lineno, row in _open_rows(path, OBSERVATION_HEADER):
        date, margin, value = _parse_common(row, lineno, 5)
        cell = by_date.setdefault(date, {})
        if margin in cell:
            raise SchemaError(f"line {lineno}: duplicate observation for {margin} on {date}")
        cell[margin] = value
    return by_date


def ingest_dataset(forecast_file, observation_file, exchangeable: bool = True) -> Dataset:
    """Build a Dataset from forecast and observation CSV files.

    Dates with an incomplete forecast (missing margins, ragged member
    counts across margins) or an incomplete observation vector are dropped
    and recorded in ``Dataset.dropped_dates``. The margin catalog is the
    canonically sorted set of margins seen in the forecast file.
    """
    fc_by_date, margins = _read_forecasts(forecast_file)
    ob_by_date = _read_observations(observation_file)
    if not margins:
        raise EmptyDatasetError(f"no forecast rows in {forecast_file}")
    catalog = canonical_catalog(margins)

    instances = []
    dropped = []
    for date in sorted(set(fc_by_date) | set(ob_by_date)):
        fc = fc_by_date.get(date)
        ob = ob_by_date.get(date)
        if fc is None or ob is None:
            dropped.append(date)
            continue
        if set(fc) != set(catalog) or not set(catalog) <= set(ob):
            dropped.append(date)
            continue
        member_sets = {frozenset(fc[m]) for m in catalog}
        if len(member_sets) != 1:
            raise SchemaError(f"inconsistent member count across margins on {date}")
        members_idx = sorted(next(iter(member_sets)))
        if members_idx != list(range(1, len(members_idx) + 1)):
            raise SchemaError(f"member indices on {date} are not 1..M: {members_idx}")
        matrix = np.array([[fc[m][k] for m in catalog] for k in members_idx])
        forecast = EnsembleForecast(date, matrix, catalog, exchangeable=exchangeable)
        observation = Observation(date, np.array([ob[m] for m in catalog]), catalog)
        instances.append((forecast, observation))

    if not instances:
        raise EmptyDatasetError("no date has both a complete forecast and observation")
    return Dataset(tuple(instances), catalog, dropped_dates=tuple(dropped))


def _fmt(value: float) -> str:
    return repr(float(value))


def _forecast_rows(forecast: EnsembleForecast):
    order = sorted(range(forecast.n_margins), key=lambda j: forecast.margin_catalog[j].sort_key)
    date = forecast.valid_date.isoformat()
    for j in order:
        m = forecast.margin_catalog[j]
        for k in range(forecast.n_members):
            yield [date, m.station, m.variable, str(m.lead_hours), str(k + 1),
                   _fmt(forecast.members[k, j])]


def write_forecast_csv(forecasts, path) -> None:
    """Write forecasts in canonical order; accepts any EnsembleForecast iterable."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FORECAST_HEADER)
        for forecast in sorted(forecasts, key=lambda f: f.valid_date):
            writer.writerows(_forecast_rows(forecast))


def write_observation_csv(observations, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBSERVATION_HEADER)
        for ob in sorted(observations, key=lambda o: o.valid_date):
            order = sorted(range(len(ob.margin_catalog)), key=lambda j: ob.margin_catalog[j].sort_key)
            date = ob.valid_date.isoformat()
            for j in order:
                m = ob.margin_catalog[j]
                writer.writerow([date, m.station, m.variable, str(m.lead_hours), _fmt(ob.values[j])])


def write_dataset_csv(dataset: Dataset, forecast_path, observation_path) -> None:
    write_forecast_csv((fc for fc, _ in dataset.instances), forecast_path)
    write_observation_csv((ob for _, ob in dataset.instances), observation_path)


def write_ensemble_csv(named_forecasts, path) -> None:
    """Write (ensemble_name, EnsembleForecast) pairs with canonical ordering."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ENSEMBLE_HEADER)
        for name, forecast in sorted(named_forecasts, key=lambda nf: (nf[0], nf[1].valid_date)):
            for row in _forecast_rows(forecast):
                writer.writerow([name] + row)


def read_ensemble_csv(path):
    """-> dict ensemble_name -> list of EnsembleForecast (date-ordered)."""
    by_name = {}
    margins = set()
    for lineno, row in _open_rows(path, ENSEMBLE_HEADER):
        if len(row) != 7:
            raise ParseError(f"expected 7 fields, got {len(row)}", line_number=lineno)
        name = row[0]
        date, margin, value = _parse_common(row[1:], lineno, 6)
        try:
            member = int(row[5])
        except ValueError:
            raise ParseError(f"bad member index {row[5]!r}", line_number=lineno) from None
        margins.add(margin)
        by_name.setdefault(name, {}).setdefault(date, {}).setdefault(margin, {})[member] = value
    catalog = canonical_catalog(margins)
    out = {}
    for name, by_date in by_name.items():
        forecasts = []
        for date in sorted(by_date):
            fc = by_date[date]
            if set(fc) != set(catalog):
                raise SchemaError(f"ensemble {name!r} on {date} is missing margins")
            members_idx = sorted(next(iter(fc.values())))
            matrix = np.array([[fc[m][k] for m in catalog] for k in members_idx])
            forecasts.append(EnsembleForecast(date, matrix, catalog))
        out[name] = forecasts
    return out


def write_histogram_csv(histogram, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTOGRAM_HEADER)
        for rank, count in enumerate(histogram.counts, start=1):
            writer.writerow([histogram.kind, str(rank), str(int(count))])


def write_scores_csv(rows, path) -> None:
    """rows: iterable of (ensemble_name, metric, value)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORE_HEADER)
        for name, metric, value in rows:
            writer.writerow([name, metric, _fmt(value)])


def render_scores(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_HEADER)
    for name, metric, value in rows:
        writer.writerow([name, metric, _fmt(value)])
    return buf.getvalue()


def write_univariate_params_csv(entries, path) -> None:
    """entries: iterable of (date, station, variable, param, value)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "station", "variable", "param", "value"])
        for date, station, variable, param, value in entries:
            writer.writerow([date.isoformat(), station, variable, param, _fmt(value)])


def write_bivariate_params_csv(entries, path) -> None:
    """entries: iterable of (date, station, param, row, col, value)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "station", "param", "row", "col", "value"])
        for date, station, param, row, col, value in entries:
            writer.writerow([date.isoformat(), station, param, str(row), str(col), _fmt(value)])
