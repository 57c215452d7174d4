"""Proper scores, multivariate rank histograms, and the reliability index.

Scores are negatively oriented: smaller is better. The CRPS closed forms
are checked against numerical integration of the defining integral in the
test suite; the quadrature is the authority, the closed forms the fast
path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import MarginIndex
from .errors import AggregationError, DomainError, ParameterError
from .normal import SQRT_2PI, norm_pdf
from .ranking import (
    AVERAGE,
    BAND_DEPTH,
    MULTIVARIATE,
    RankingKind,
    compute_characteristics,
    rank_characteristics,
)

INV_SQRT_PI = 1.0 / np.sqrt(np.pi)
SQRT2 = np.sqrt(2.0)
LOG_2PI = np.log(2.0 * np.pi)

#: Rank histogram flavors (signed-Euclidean-norm ranking is a reordering
#: device, not a histogram flavor).
HISTOGRAM_KINDS = (MULTIVARIATE, BAND_DEPTH, AVERAGE)


@dataclass(frozen=True)
class VerificationRecord:
    """One postprocessed ensemble paired with its verifying observation."""

    ensemble: np.ndarray  # (N, L)
    observation: np.ndarray  # (L,)
    margin_catalog: tuple[MarginIndex, ...] | None = None

    def __post_init__(self):
        ens = np.asarray(self.ensemble, dtype=float)
        obs = np.asarray(self.observation, dtype=float)
        object.__setattr__(self, "ensemble", ens)
        object.__setattr__(self, "observation", obs)
        if ens.ndim != 2 or obs.ndim != 1 or ens.shape[1] != obs.shape[0]:
            raise ParameterError("ensemble must be (N, L) and observation (L,)")
        if ens.shape[0] < 1:
            raise ParameterError("need at least one ensemble member")
        if not (np.all(np.isfinite(ens)) and np.all(np.isfinite(obs))):
            raise ParameterError("record values must be finite")

    @property
    def n_members(self) -> int:
        return self.ensemble.shape[0]

    @property
    def n_margins(self) -> int:
        return self.ensemble.shape[1]


@dataclass(frozen=True)
class RankHistogram:
    """Counts of observation ranks 1..N+1 for one histogram flavor."""

    kind: str
    counts: np.ndarray  # (N+1,) nonnegative integers

    def __post_init__(self):
        if self.kind not in HISTOGRAM_KINDS:
            raise ParameterError(f"unknown histogram kind {self.kind!r}")
        counts = np.asarray(self.counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 1 or np.any(counts < 0):
            raise ParameterError("counts must be a vector of nonnegative integers")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "RankHistogram") -> "RankHistogram":
        if other.kind != self.kind or len(other.counts) != len(self.counts):
            raise AggregationError("histograms must share kind and bin count to merge")
        return RankHistogram(self.kind, self.counts + other.counts)


def crps_normal(mu: float, sigma: float, y: float) -> float:
    """CRPS of a normal predictive distribution at observation y."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    z = (y - mu) / sigma
    return float(sigma * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * norm_pdf(z) - INV_SQRT_PI))


def crps_normal_vec(mu, sigma, y):
    """Vectorized :func:`crps_normal` without argument checks (fit hot path)."""
    z = (y - mu) / sigma
    return sigma * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * norm_pdf(z) - INV_SQRT_PI)


def crps_truncnormal(mu: float, sigma: float, y: float) -> float:
    """CRPS of a zero-truncated normal predictive distribution at y >= 0."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    if y < 0:
        raise ParameterError(f"observation must be >= 0, got {y}")
    return float(crps_truncnormal_vec(mu, sigma, y))


def crps_truncnormal_vec(mu, sigma, y):
    """Vectorized zero-truncated normal CRPS (no argument checks).

    Written with complementary tail probabilities so strongly truncated
    cases (mu/sigma << 0) keep full precision; if the truncation mass
    underflows entirely the distribution is the point mass at zero, whose
    CRPS is y.
    """
    p = ndtr(np.asarray(mu, dtype=float) / sigma)
    z = (y - mu) / np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (sigma / p**2) * (
            z * p * (p - 2.0 * ndtr(-z))
            + 2.0 * norm_pdf(z) * p
            - INV_SQRT_PI * ndtr(SQRT2 * mu / sigma)
        )
    return np.where(p > 0.0, val, np.asarray(y, dtype=float))


def crps_ensemble(members, y: float) -> float:
    """CRPS of the empirical ensemble distribution (one-dimensional energy score)."""
    x = np.asarray(members, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ParameterError("members must be a nonempty vector")
    n = len(x)
    term1 = np.abs(x - y).mean()
    term2 = np.abs(x[:, None] - x[None, :]).sum() / (2.0 * n * n)
    return float(term1 - term2)


def logscore_bivariate_truncnormal(mu, sigma_mat, y) -> float:
    """Negative log density of the wind/temperature truncated normal pair.

    The first coordinate is truncated below at zero; the density is the
    bivariate normal density renormalized by the mass above the cut.
    """
    mu = np.asarray(mu, dtype=float)
    sig = np.asarray(sigma_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    if mu.shape != (2,) or sig.shape != (2, 2) or y.shape != (2,):
        raise ParameterError("need 2-vectors and a 2x2 scale matrix")
    if not np.allclose(sig, sig.T):
        raise ParameterError("scale matrix must be symmetric")
    s11, s12, s22 = sig[0, 0], sig[0, 1], sig[1, 1]
    det = s11 * s22 - s12 * s12
    if s11 <= 0 or det <= 0:
        raise ParameterError("scale matrix must be positive definite")
    if y[0] < 0:
        raise DomainError(f"first (wind) coordinate must be >= 0, got {y[0]}")
    r1, r2 = y[0] - mu[0], y[1] - mu[1]
    quad = (r1 * r1 * s22 - 2.0 * r1 * r2 * s12 + r2 * r2 * s11) / det
    mass = ndtr(mu[0] / np.sqrt(s11))
    if mass <= 0.0:
        raise DomainError("truncation mass underflows; distribution is degenerate")
    return float(LOG_2PI + 0.5 * np.log(det) + 0.5 * quad + np.log(mass))


def energy_score(record: VerificationRecord) -> float:
    """Energy score: mean distance to the observation minus half the
    mean pairwise member distance."""
    x = record.ensemble
    y = record.observation
    n = record.n_members
    to_obs = np.sqrt(((x - y) ** 2).sum(axis=1)).mean()
    diff = x[:, None, :] - x[None, :, :]
    pairwise = np.sqrt((diff**2).sum(axis=2)).sum()
    return float(to_obs - pairwise / (2.0 * n * n))


def variogram_score_05(record: VerificationRecord) -> float:
    """Unweighted variogram score of order 0.5 over all ordered margin pairs."""
    x = record.ensemble
    y = record.observation
    g_obs = np.sqrt(np.abs(y[:, None] - y[None, :]))
    g_ens = np.sqrt(np.abs(x[:, :, None] - x[:, None, :])).mean(axis=0)
    return float(((g_obs - g_ens) ** 2).sum())


def observation_rank(record: VerificationRecord, kind: str, rng: np.random.Generator) -> int:
    """Rank of the observation within the pooled member/observation set.

    Pools the N members with the observation, computes the chosen pre-rank
    characteristic over the N+1 points and returns the observation's rank,
    ties resolved uniformly at random.
    """
    if kind not in HISTOGRAM_KINDS:
        raise ParameterError(f"unknown histogram kind {kind!r}")
    pooled = np.vstack([record.ensemble, record.observation])
    chars = compute_characteristics(pooled, RankingKind(kind))
    ranks = rank_characteristics(chars, rng)
    return int(ranks[-1])


def accumulate_histogram(records, kind: str, rng: np.random.Generator) -> RankHistogram:
    """Histogram of observation ranks over a stream of records.

    Each record consumes one child stream spawned from ``rng``, so any
    batch partitioning that preserves record order reproduces the same
    counts.
    """
    counts = None
    n_members = None
    for record in records:
        if n_members is None:
            n_members = record.n_members
            counts = np.zeros(n_members + 1, dtype=np.int64)
        elif record.n_members != n_members:
            raise AggregationError(
                f"records disagree on ensemble size: {record.n_members} vs {n_members}"
            )
        rank = observation_rank(record, kind, rng.spawn(1)[0])
        counts[rank - 1] += 1
    if counts is None:
        raise ParameterError("no records to accumulate")
    return RankHistogram(kind, counts)


def reliability_index(hist: RankHistogram) -> float:
    """Total absolute deviation of rank frequencies from uniformity."""
    total = hist.total
    if total <= 0:
        raise ParameterError("histogram is empty")
    freq = hist.counts / total
    return float(np.abs(freq - 1.0 / len(hist.counts)).sum())
