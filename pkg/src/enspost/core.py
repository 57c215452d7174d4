"""Domain data model: margins, forecasts, observations, datasets.

A *margin* is one scalar forecast quantity, addressed by the triple
(variable, station, lead time). A forecast instance holds an M x L member
matrix whose columns follow the dataset's margin catalog; the verifying
observation is the matching length-L vector.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateClimatologyError,
    InsufficientTrainingError,
    MarginLookupError,
    ParameterError,
    SchemaError,
)

TEMPERATURE = "temperature"
WIND_SPEED = "wind_speed"

#: Variables whose values must be >= 0 everywhere (forecasts and observations).
NONNEGATIVE_VARIABLES = frozenset({WIND_SPEED})

#: Postprocessor kinds usable in a case partition.
UNIVARIATE_NORMAL = "univariate_normal"
UNIVARIATE_TRUNCATED_NORMAL = "univariate_truncated_normal"
BIVARIATE_TRUNCATED_NORMAL = "bivariate_truncated_normal"

CASE_KINDS = frozenset(
    {UNIVARIATE_NORMAL, UNIVARIATE_TRUNCATED_NORMAL, BIVARIATE_TRUNCATED_NORMAL}
)


@dataclass(frozen=True)
class MarginIndex:
    """Address of one forecast margin: (variable, station, lead time)."""

    variable: str
    station: str
    lead_hours: int

    def __post_init__(self):
        if self.lead_hours < 0:
            raise SchemaError(f"lead_hours must be >= 0, got {self.lead_hours}")

    @property
    def sort_key(self):
        return (self.station, self.lead_hours, self.variable)

    def __str__(self):
        return f"{self.variable}@{self.station}+{self.lead_hours}h"


def canonical_catalog(margins) -> tuple[MarginIndex, ...]:
    """Sorted, duplicate-checked margin catalog (station, lead, variable)."""
    catalog = tuple(sorted(set(margins), key=lambda m: m.sort_key))
    if len(catalog) != len(tuple(margins)):
        raise SchemaError("duplicate margins in catalog")
    return catalog


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_margin_values(values_by_margin, catalog, what):
    """values_by_margin: array whose last axis follows the catalog."""
    if not np.all(np.isfinite(values_by_margin)):
        raise SchemaError(f"non-finite value in {what}")
    for j, margin in enumerate(catalog):
        if margin.variable in NONNEGATIVE_VARIABLES:
            col = values_by_margin[..., j]
            if np.any(col < 0):
                raise SchemaError(f"negative {margin.variable} value in {what} for margin {margin}")


@dataclass(frozen=True)
class EnsembleForecast:
    """One M-member forecast of all L margins for a single valid date."""

    valid_date: dt.date
    members: np.ndarray  # (M, L)
    margin_catalog: tuple[MarginIndex, ...]
    exchangeable: bool = True

    def __post_init__(self):
        members = _frozen_array(self.members)
        object.__setattr__(self, "members", members)
        catalog = tuple(self.margin_catalog)
        object.__setattr__(self, "margin_catalog", catalog)
        if members.ndim != 2:
            raise SchemaError("members must be a 2-d (M, L) matrix")
        m, l = members.shape
        if m < 2:
            raise SchemaError(f"need at least 2 members, got {m}")
        if l < 1 or l != len(catalog):
            raise SchemaError(f"member columns ({l}) do not match catalog ({len(catalog)})")
        _check_margin_values(members, catalog, f"forecast {self.valid_date}")

    @property
    def n_members(self) -> int:
        return self.members.shape[0]

    @property
    def n_margins(self) -> int:
        return self.members.shape[1]


@dataclass(frozen=True)
class Observation:
    """Verifying observation vector aligned with a margin catalog."""

    valid_date: dt.date
    values: np.ndarray  # (L,)
    margin_catalog: tuple[MarginIndex, ...]

    def __post_init__(self):
        values = _frozen_array(self.values)
        object.__setattr__(self, "values", values)
        catalog = tuple(self.margin_catalog)
        object.__setattr__(self, "margin_catalog", catalog)
        if values.ndim != 1 or len(values) != len(catalog):
            raise SchemaError("observation length does not match catalog")
        _check_margin_values(values, catalog, f"observation {self.valid_date}")


@dataclass(frozen=True)
class Dataset:
    """Date-ordered (forecast, observation) pairs sharing one margin catalog."""

    instances: tuple[tuple[EnsembleForecast, Observation], ...]
    margin_catalog: tuple[MarginIndex, ...]
    dropped_dates: tuple[dt.date, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "margin_catalog", tuple(self.margin_catalog))
        prev = None
        for fc, ob in self.instances:
            if fc.valid_date != ob.valid_date:
                raise SchemaError(f"forecast/observation date mismatch: {fc.valid_date} vs {ob.valid_date}")
            if fc.margin_catalog != self.margin_catalog or ob.margin_catalog != self.margin_catalog:
                raise SchemaError("all instances must share the dataset margin catalog")
            if prev is not None and fc.valid_date <= prev:
                raise SchemaError("instance dates must be strictly increasing")
            prev = fc.valid_date

    def __len__(self):
        return len(self.instances)

    @property
    def dates(self) -> tuple[dt.date, ...]:
        return tuple(fc.valid_date for fc, _ in self.instances)

    def observation_matrix(self) -> np.ndarray:
        """All observations stacked as a (T, L) matrix."""
        return np.array([ob.values for _, ob in self.instances])


@dataclass(frozen=True)
class Climatology:
    """Per-margin observation mean and standard deviation."""

    margin_catalog: tuple[MarginIndex, ...]
    mean: np.ndarray  # (L,)
    std: np.ndarray  # (L,)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "margin_catalog", tuple(self.margin_catalog))
        object.__setattr__(self, "mean", _frozen_array(self.mean))
        object.__setattr__(self, "std", _frozen_array(self.std))
        if np.any(self.std <= 0):
            bad = self.margin_catalog[int(np.argmin(self.std))]
            raise DegenerateClimatologyError(f"margin {bad} has non-positive standard deviation")
        object.__setattr__(self, "_index", {m: j for j, m in enumerate(self.margin_catalog)})

    def position(self, margin: MarginIndex) -> int:
        try:
            return self._index[margin]
        except KeyError:
            raise MarginLookupError(f"margin {margin} not in climatology") from None


@dataclass(frozen=True)
class CasePartition:
    """Disjoint cover of the margin catalog by per-case postprocessors.

    Each case is a pair (margins, kind). Bivariate cases must list the
    wind-speed margin first: that coordinate carries the zero truncation.
    """

    cases: tuple[tuple[tuple[MarginIndex, ...], str], ...]

    def __post_init__(self):
        cases = tuple((tuple(margins), kind) for margins, kind in self.cases)
        object.__setattr__(self, "cases", cases)
        seen = set()
        for margins, kind in cases:
            if kind not in CASE_KINDS:
                raise ParameterError(f"unknown postprocessor kind {kind!r}")
            if kind == BIVARIATE_TRUNCATED_NORMAL:
                if len(margins) != 2:
                    raise ParameterError("bivariate cases must have exactly 2 margins")
                if margins[0].variable not in NONNEGATIVE_VARIABLES:
                    raise ParameterError(
                        "first margin of a bivariate case must be the truncated (wind) one"
                    )
                if margins[1].variable != TEMPERATURE:
                    raise ParameterError("second margin of a bivariate case must be temperature")
            elif len(margins) != 1:
                raise ParameterError("univariate cases must have exactly 1 margin")
            for m in margins:
                if m in seen:
                    raise ParameterError(f"margin {m} appears in more than one case")
                seen.add(m)

    @property
    def n_cases(self) -> int:
        return len(self.cases)

    def all_margins(self) -> set[MarginIndex]:
        return {m for margins, _ in self.cases for m in margins}

    def validate_against(self, catalog) -> None:
        """Check the cases cover the catalog exactly (sum of L_c = L)."""
        mine = self.all_margins()
        cat = set(catalog)
        if mine != cat:
            missing = cat - mine
            extra = mine - cat
            raise ParameterError(
                f"case partition does not cover catalog (missing={sorted(map(str, missing))}, "
                f"extra={sorted(map(str, extra))})"
            )


def fit_climatology(dataset: Dataset) -> Climatology:
    """Per-margin sample mean and standard deviation (ddof 1) of all observations."""
    if len(dataset) == 0:
        raise ParameterError("cannot fit a climatology on an empty dataset")
    obs = dataset.observation_matrix()
    mean = obs.mean(axis=0)
    if len(obs) < 2:
        raise DegenerateClimatologyError("need at least 2 observations for a standard deviation")
    std = obs.std(axis=0, ddof=1)
    if np.any(std == 0):
        bad = dataset.margin_catalog[int(np.argmin(std))]
        raise DegenerateClimatologyError(f"margin {bad} has constant observations")
    return Climatology(dataset.margin_catalog, mean, std)


def standardize(value, margin: MarginIndex, clim: Climatology):
    """Map a raw value to (value - mean) / std for the given margin."""
    j = clim.position(margin)
    return (value - clim.mean[j]) / clim.std[j]


def destandardize(value, margin: MarginIndex, clim: Climatology):
    """Inverse of :func:`standardize`."""
    j = clim.position(margin)
    return value * clim.std[j] + clim.mean[j]


def standardize_values(values: np.ndarray, clim: Climatology) -> np.ndarray:
    """Standardize an array whose last axis follows the climatology's catalog."""
    return (np.asarray(values, dtype=float) - clim.mean) / clim.std


def training_window(dataset: Dataset, target_date: dt.date, window_days: int):
    """The most recent ``window_days`` instances strictly before ``target_date``.

    The window counts available instances, not calendar days, so gaps from
    missing dates never shrink the training set.
    """
    if window_days < 1:
        raise ParameterError("window_days must be >= 1")
    prior = [pair for pair in dataset.instances if pair[0].valid_date < target_date]
    if len(prior) < window_days:
        raise InsufficientTrainingError(
            f"only {len(prior)} instances available before {target_date}, need {window_days}",
            available=len(prior),
        )
    return prior[-window_days:]
