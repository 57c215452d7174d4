"""Synthetic wind/temperature datasets with controllable miscalibration.

Each day has a latent weather state drawn around a seasonal mean with a
cross-margin correlation structure. The observation is the state plus one
weather-noise draw; each raw member is the state plus bias plus an
independent, dispersion-scaled draw of the same noise. With dispersion 1
and zero bias the observation is exchangeable with the members, so the
raw ensemble is perfectly calibrated; dispersion < 1 yields the familiar
underdispersive U-shaped rank histograms. Wind margins are floored at
zero (observations and members alike).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Dataset,
    EnsembleForecast,
    MarginIndex,
    Observation,
    TEMPERATURE,
    WIND_SPEED,
)
from .errors import ParameterError

#: Per-variable base climate (mean, state sd, weather-noise sd).
VARIABLE_BASELINES = {
    WIND_SPEED: (6.0, 1.6, 1.0),
    TEMPERATURE: (12.0, 3.2, 1.6),
}

LEAD_HOURS = 24


def correlation_from_kernels(n_stations: int, station_corr: float, variable_corr: float) -> np.ndarray:
    """2J x 2J correlation matrix as a station-kernel x variable-kernel product.

    Margin order is (wind, temperature) per station, station-major. The
    Kronecker structure keeps the matrix positive definite for any
    kernel pair that is itself positive definite.
    """
    if not (0 <= station_corr < 1 and -1 < variable_corr < 1):
        raise ParameterError("correlations must satisfy 0 <= station < 1, |variable| < 1")
    stations = np.full((n_stations, n_stations), station_corr)
    np.fill_diagonal(stations, 1.0)
    variables = np.array([[1.0, variable_corr], [variable_corr, 1.0]])
    return np.kron(stations, variables)


@dataclass(frozen=True)
class SyntheticSpec:
    """Geometry and miscalibration knobs of a synthetic dataset."""

    n_stations: int = 3
    n_days: int = 1100
    n_members: int = 50
    correlation: np.ndarray | None = None  # (2J, 2J), unit diagonal
    bias: np.ndarray | None = None  # (2J,) added to members only
    dispersion: float = 1.0
    seasonal_amplitude: float = 6.0  # applied to temperature margins
    start_date: dt.date = dt.date(2020, 1, 1)
    margin_catalog: tuple = field(init=False)

    def __post_init__(self):
        if self.n_stations < 1 or self.n_days < 1 or self.n_members < 2:
            raise ParameterError("need >= 1 station, >= 1 day, >= 2 members")
        if self.dispersion <= 0:
            raise ParameterError("dispersion factor must be > 0")
        catalog = []
        for j in range(self.n_stations):
            station = f"S{j + 1}"
            catalog.append(MarginIndex(WIND_SPEED, station, LEAD_HOURS))
            catalog.append(MarginIndex(TEMPERATURE, station, LEAD_HOURS))
        object.__setattr__(self, "margin_catalog", tuple(catalog))
        l_total = 2 * self.n_stations
        corr = self.correlation
        if corr is None:
            corr = correlation_from_kernels(self.n_stations, 0.75, 0.35)
        corr = np.asarray(corr, dtype=float)
        if corr.shape != (l_total, l_total) or not np.allclose(corr, corr.T):
            raise ParameterError(f"correlation must be a symmetric ({l_total}, {l_total}) matrix")
        if not np.allclose(np.diag(corr), 1.0):
            raise ParameterError("correlation matrix must have a unit diagonal")
        try:
            np.linalg.cholesky(corr)
        except np.linalg.LinAlgError:
            raise ParameterError("correlation matrix must be positive definite") from None
        corr.setflags(write=False)
        object.__setattr__(self, "correlation", corr)
        bias = np.zeros(l_total) if self.bias is None else np.asarray(self.bias, dtype=float)
        if bias.shape != (l_total,):
            raise ParameterError(f"bias must be a ({l_total},) vector")
        bias.setflags(write=False)
        object.__setattr__(self, "bias", bias)

    @property
    def n_margins(self) -> int:
        return 2 * self.n_stations


def _margin_profiles(spec: SyntheticSpec):
    mean = np.empty(spec.n_margins)
    state_sd = np.empty(spec.n_margins)
    noise_sd = np.empty(spec.n_margins)
    seasonal = np.empty(spec.n_margins)
    for j, margin in enumerate(spec.margin_catalog):
        base_mean, base_state, base_noise = VARIABLE_BASELINES[margin.variable]
        mean[j] = base_mean
        state_sd[j] = base_state
        noise_sd[j] = base_noise
        seasonal[j] = spec.seasonal_amplitude if margin.variable == TEMPERATURE else 0.0
    return mean, state_sd, noise_sd, seasonal


def synth_generate(spec: SyntheticSpec, rng: np.random.Generator) -> Dataset:
    """Draw a full dataset; deterministic for a given generator state."""
    mean, state_sd, noise_sd, seasonal = _margin_profiles(spec)
    chol = np.linalg.cholesky(spec.correlation)
    wind_cols = np.array(
        [j for j, m in enumerate(spec.margin_catalog) if m.variable == WIND_SPEED]
    )

    instances = []
    date = spec.start_date
    for day in range(spec.n_days):
        cycle = np.sin(2.0 * np.pi * day / 365.25)
        day_mean = mean + seasonal * cycle
        state = day_mean + state_sd * (chol @ rng.standard_normal(spec.n_margins))
        obs = state + noise_sd * (chol @ rng.standard_normal(spec.n_margins))
        obs[wind_cols] = np.maximum(obs[wind_cols], 0.0)
        noise = rng.standard_normal((spec.n_members, spec.n_margins)) @ chol.T
        members = state + spec.bias + spec.dispersion * noise_sd * noise
        members[:, wind_cols] = np.maximum(members[:, wind_cols], 0.0)
        instances.append(
            (
                EnsembleForecast(date, members, spec.margin_catalog, exchangeable=True),
                Observation(date, obs, spec.margin_catalog),
            )
        )
        date += dt.timedelta(days=1)
    return Dataset(tuple(instances), spec.margin_catalog)
