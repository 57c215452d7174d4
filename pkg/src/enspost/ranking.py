"""Multivariate ranking: pre-rank characteristics and tie-randomized ranks.

A set of N points in R^L is ranked in two steps: first each point is
reduced to a scalar characteristic (one of the four pre-rank notions
below), then the characteristics are ranked with the usual univariate
ordering, ties resolved uniformly at random.

All pre-ranks except the signed Euclidean norm depend only on per-margin
orderings and are therefore invariant under strictly increasing
transformations of each margin. The signed Euclidean norm uses the raw
values, so its inputs should be standardized by the caller when margins
carry different units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

MULTIVARIATE = "multivariate"
AVERAGE = "average"
SEN = "sen"
BAND_DEPTH = "band_depth"

RANKING_TAGS = (MULTIVARIATE, AVERAGE, SEN, BAND_DEPTH)


@dataclass(frozen=True)
class RankingKind:
    """Selects a pre-rank characteristic.

    For the signed Euclidean norm the two column positions of the wind and
    temperature coordinates within the case must be given.
    """

    tag: str
    wind_index: int | None = None
    temp_index: int | None = None

    def __post_init__(self):
        if self.tag not in RANKING_TAGS:
            raise ParameterError(f"unknown ranking tag {self.tag!r}")
        if self.tag == SEN and (self.wind_index is None or self.temp_index is None):
            raise ParameterError("SEN ranking needs wind_index and temp_index")


@dataclass(frozen=True)
class RankResult:
    characteristics: np.ndarray  # (N,)
    permutation: np.ndarray  # (N,) ranks 1..N


def prerank_multivariate(points: np.ndarray) -> np.ndarray:
    """Number of points weakly dominated coordinatewise, self included."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 1:
        raise ParameterError("points must be a nonempty (N, L) matrix")
    # dominated[n, v] = 1 iff z_v <= z_n in every coordinate
    dominated = (pts[None, :, :] <= pts[:, None, :]).all(axis=2)
    return dominated.sum(axis=1).astype(float)


def prerank_average(points: np.ndarray) -> np.ndarray:
    """Mean over margins of the per-margin <=-count ranks."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 1:
        raise ParameterError("points must be a nonempty (N, L) matrix")
    le = pts[None, :, :] <= pts[:, None, :]  # le[n, v, l] = z_v^l <= z_n^l
    return le.sum(axis=1).mean(axis=1)


def prerank_sen(points: np.ndarray, wind_index: int = 0, temp_index: int = 1) -> np.ndarray:
    """Euclidean norm signed by the temperature coordinate (sign of 0 is +1)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise ParameterError("SEN needs an (N, >=2) matrix")
    w = pts[:, wind_index]
    t = pts[:, temp_index]
    sign = np.where(t >= 0, 1.0, -1.0)
    return sign * np.hypot(w, t)


def prerank_banddepth(points: np.ndarray) -> np.ndarray:
    """Mean over margins of the number of point pairs bracketing each point.

    A pair {i, j}, i != j, brackets point n on margin l when
    min(z_i^l, z_j^l) <= z_n^l <= max(z_i^l, z_j^l); pairs containing n
    itself count. With all-distinct margin values this equals
    (rank - 1) * (N - rank) + (N - 1) per margin.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ParameterError("band depth needs at least 2 points")
    n = len(pts)
    total_pairs = n * (n - 1) // 2
    below = (pts[None, :, :] < pts[:, None, :]).sum(axis=1)  # strictly below, per margin
    above = (pts[None, :, :] > pts[:, None, :]).sum(axis=1)
    bracketing = total_pairs - below * (below - 1) // 2 - above * (above - 1) // 2
    return bracketing.mean(axis=1)


def compute_characteristics(points: np.ndarray, kind: RankingKind) -> np.ndarray:
    if kind.tag == MULTIVARIATE:
        return prerank_multivariate(points)
    if kind.tag == AVERAGE:
        return prerank_average(points)
    if kind.tag == BAND_DEPTH:
        return prerank_banddepth(points)
    return prerank_sen(points, kind.wind_index, kind.temp_index)


def rank_characteristics(characteristics: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Univariate ranks 1..N with tied blocks permuted uniformly at random.

    Each maximal block of equal characteristics receives its run of ranks
    in the order of one Fisher-Yates shuffle drawn from ``rng``.
    """
    chars = np.asarray(characteristics, dtype=float)
    if chars.ndim != 1 or len(chars) < 1:
        raise ParameterError("characteristics must be a nonempty vector")
    if not np.all(np.isfinite(chars)):
        raise ParameterError("characteristics must be finite")
    order = np.argsort(chars, kind="stable")
    ranks = np.empty(len(chars), dtype=np.int64)
    start = 0
    n = len(chars)
    while start < n:
        stop = start
        while stop + 1 < n and chars[order[stop + 1]] == chars[order[start]]:
            stop += 1
        block = order[start : stop + 1]
        if len(block) > 1:
            block = block[rng.permutation(len(block))]
        ranks[block] = np.arange(start + 1, stop + 2)
        start = stop + 1
    return ranks


def rank_points(points: np.ndarray, kind: RankingKind, rng: np.random.Generator) -> RankResult:
    """Characteristics plus their tie-randomized permutation, in one call."""
    chars = compute_characteristics(points, kind)
    return RankResult(chars, rank_characteristics(chars, rng))
