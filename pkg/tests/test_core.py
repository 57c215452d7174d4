"""Tests for the domain model, climatology, and training windows."""

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from enspost.core import (
    CasePartition,
    Climatology,
    Dataset,
    EnsembleForecast,
    MarginIndex,
    Observation,
    BIVARIATE_TRUNCATED_NORMAL,
    TEMPERATURE,
    UNIVARIATE_NORMAL,
    WIND_SPEED,
    destandardize,
    fit_climatology,
    standardize,
    training_window,
)
from enspost.errors import (
    DegenerateClimatologyError,
    InsufficientTrainingError,
    MarginLookupError,
    ParameterError,
    SchemaError,
)

from conftest import make_dataset

D = dt.date


def _single_margin_dataset(values, n_members=3):
    catalog = (MarginIndex(TEMPERATURE, "s1", 24),)
    instances = []
    for i, v in enumerate(values):
        date = D(2021, 1, 1) + dt.timedelta(days=i)
        members = np.full((n_members, 1), float(v)) + np.arange(n_members)[:, None] * 0.1
        instances.append(
            (EnsembleForecast(date, members, catalog), Observation(date, [float(v)], catalog))
        )
    return Dataset(tuple(instances), catalog)


class TestTypes:
    def test_negative_wind_member_rejected(self):
        catalog = (MarginIndex(WIND_SPEED, "s1", 24),)
        with pytest.raises(SchemaError, match="negative wind_speed"):
            EnsembleForecast(D(2021, 1, 1), [[1.0], [-0.3]], catalog)

    def test_non_finite_observation_rejected(self):
        catalog = (MarginIndex(TEMPERATURE, "s1", 24),)
        with pytest.raises(SchemaError, match="non-finite"):
            Observation(D(2021, 1, 1), [np.nan], catalog)

    def test_members_are_immutable(self):
        catalog = (MarginIndex(TEMPERATURE, "s1", 24),)
        fc = EnsembleForecast(D(2021, 1, 1), [[1.0], [2.0]], catalog)
        with pytest.raises(ValueError):
            fc.members[0, 0] = 5.0

    def test_dataset_requires_increasing_dates(self):
        catalog = (MarginIndex(TEMPERATURE, "s1", 24),)
        fc = EnsembleForecast(D(2021, 1, 2), [[1.0], [2.0]], catalog)
        ob = Observation(D(2021, 1, 2), [1.5], catalog)
        with pytest.raises(SchemaError, match="strictly increasing"):
            Dataset(((fc, ob), (fc, ob)), catalog)

    def test_bivariate_case_must_lead_with_wind(self):
        wind = MarginIndex(WIND_SPEED, "s1", 24)
        temp = MarginIndex(TEMPERATURE, "s1", 24)
        CasePartition((((wind, temp), BIVARIATE_TRUNCATED_NORMAL),))
        with pytest.raises(ParameterError, match="first margin"):
            CasePartition((((temp, wind), BIVARIATE_TRUNCATED_NORMAL),))

    def test_partition_coverage_check(self):
        wind = MarginIndex(WIND_SPEED, "s1", 24)
        temp = MarginIndex(TEMPERATURE, "s1", 24)
        partition = CasePartition((((temp,), UNIVARIATE_NORMAL),))
        with pytest.raises(ParameterError, match="does not cover"):
            partition.validate_against((wind, temp))


class TestClimatology:
    def test_hand_arithmetic(self):
        ds = _single_margin_dataset([1.0, 2.0, 3.0])
        clim = fit_climatology(ds)
        assert clim.mean[0] == pytest.approx(2.0)
        assert clim.std[0] == pytest.approx(1.0)

    def test_constant_observations_degenerate(self):
        ds = _single_margin_dataset([4.0, 4.0, 4.0])
        with pytest.raises(DegenerateClimatologyError):
            fit_climatology(ds)

    def test_margins_are_independent(self):
        catalog = (
            MarginIndex(TEMPERATURE, "s1", 24),
            MarginIndex(WIND_SPEED, "s1", 24),
        )
        instances = []
        for i, (t, w) in enumerate([(0.0, 1.0), (10.0, 2.0), (20.0, 3.0)]):
            date = D(2021, 1, 1) + dt.timedelta(days=i)
            members = np.array([[t, w], [t + 1, w + 1]])
            instances.append(
                (EnsembleForecast(date, members, catalog), Observation(date, [t, w], catalog))
            )
        clim = fit_climatology(Dataset(tuple(instances), catalog))
        assert clim.mean[0] == pytest.approx(10.0)
        assert clim.std[0] == pytest.approx(10.0)
        assert clim.mean[1] == pytest.approx(2.0)
        assert clim.std[1] == pytest.approx(1.0)


class TestStandardize:
    def setup_method(self):
        self.margin = MarginIndex(TEMPERATURE, "s1", 24)
        self.clim = Climatology((self.margin,), [5.0], [2.0])

    def test_centering_and_scaling(self):
        assert standardize(5.0, self.margin, self.clim) == 0.0
        assert standardize(7.0, self.margin, self.clim) == 1.0

    def test_round_trip(self):
        z = standardize(17.3, self.margin, self.clim)
        assert destandardize(z, self.margin, self.clim) == pytest.approx(17.3, abs=1e-12)

    def test_unknown_margin(self):
        other = MarginIndex(TEMPERATURE, "elsewhere", 24)
        with pytest.raises(MarginLookupError):
            standardize(1.0, other, self.clim)

    @given(st.floats(-1e6, 1e6), st.floats(1e-3, 1e6))
    def test_strictly_monotone(self, lo, gap):
        hi = lo + gap
        assert standardize(lo, self.margin, self.clim) < standardize(hi, self.margin, self.clim)


class TestTrainingWindow:
    def test_suffix_selection(self):
        ds = _single_margin_dataset(range(60))
        window = training_window(ds, ds.dates[-1] + dt.timedelta(days=1), 50)
        assert len(window) == 50
        assert window[0][0].valid_date == ds.dates[10]
        assert window[-1][0].valid_date == ds.dates[-1]

    def test_insufficient_training(self):
        ds = _single_margin_dataset(range(49))
        with pytest.raises(InsufficientTrainingError) as err:
            training_window(ds, ds.dates[-1] + dt.timedelta(days=1), 50)
        assert err.value.available == 49

    def test_gaps_reach_further_back(self):
        ds = _single_margin_dataset(range(60))
        # drop ten instances in the middle: the window must span the gap
        kept = ds.instances[:20] + ds.instances[30:]
        gappy = Dataset(kept, ds.margin_catalog)
        window = training_window(gappy, gappy.dates[-1] + dt.timedelta(days=1), 50)
        assert len(window) == 50

    def test_never_includes_target_or_later(self):
        ds = make_dataset(n_days=30)
        target = ds.dates[20]
        window = training_window(ds, target, 15)
        assert all(fc.valid_date < target for fc, _ in window)
