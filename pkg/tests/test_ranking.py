"""Pre-rank characteristic and tie-randomization tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enspost.errors import ParameterError
from enspost.ranking import (
    MULTIVARIATE,
    RankingKind,
    SEN,
    prerank_average,
    prerank_banddepth,
    prerank_multivariate,
    prerank_sen,
    rank_characteristics,
    rank_points,
)

from oracles import (
    prerank_average_bruteforce,
    prerank_banddepth_bruteforce,
    prerank_multivariate_bruteforce,
)

CHAIN = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


point_sets = st.integers(2, 12).flatmap(
    lambda n: st.integers(1, 4).flatmap(
        lambda l: st.lists(
            st.lists(st.integers(0, 4).map(float), min_size=l, max_size=l),
            min_size=n,
            max_size=n,
        )
    )
)


class TestMultivariatePrerank:
    def test_chain(self):
        np.testing.assert_array_equal(prerank_multivariate(CHAIN), [1, 2, 3])

    def test_antichain(self):
        np.testing.assert_array_equal(prerank_multivariate([[1, 2], [2, 1]]), [1, 1])

    def test_square(self):
        np.testing.assert_array_equal(prerank_multivariate(SQUARE), [1, 2, 2, 4])

    @settings(max_examples=150, deadline=None)
    @given(point_sets)
    def test_matches_bruteforce(self, points):
        pts = np.array(points)
        np.testing.assert_array_equal(
            prerank_multivariate(pts), prerank_multivariate_bruteforce(pts)
        )


class TestAveragePrerank:
    def test_chain(self):
        np.testing.assert_array_equal(prerank_average(CHAIN), [1, 2, 3])

    def test_square_with_duplicate_values(self):
        np.testing.assert_array_equal(prerank_average(SQUARE), [2, 3, 3, 4])

    def test_single_point(self):
        np.testing.assert_array_equal(prerank_average([[5.0, -1.0]]), [1])

    @settings(max_examples=150, deadline=None)
    @given(point_sets)
    def test_matches_bruteforce(self, points):
        pts = np.array(points)
        np.testing.assert_allclose(prerank_average(pts), prerank_average_bruteforce(pts))


class TestSen:
    @pytest.mark.parametrize(
        "w, t, expected",
        [(3.0, 4.0, 5.0), (3.0, -4.0, -5.0), (0.0, 0.0, 0.0)],
    )
    def test_signed_norm(self, w, t, expected):
        assert prerank_sen(np.array([[w, t]]))[0] == expected

    def test_sign_of_zero_temperature_is_positive(self):
        assert prerank_sen(np.array([[2.0, 0.0]]))[0] == 2.0

    def test_positive_scaling_equivariance(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(8, 2))
        lam = 3.7
        np.testing.assert_allclose(prerank_sen(lam * pts), lam * prerank_sen(pts))


class TestBandDepth:
    def test_two_points_symmetric(self):
        vals = prerank_banddepth([[0.0, 9.0], [5.0, -2.0]])
        assert vals[0] == vals[1]

    def test_middle_point_maximal_1d(self):
        vals = prerank_banddepth(np.array([[1.0], [2.0], [3.0]]))
        assert vals[1] > vals[0]
        assert vals[1] > vals[2]
        np.testing.assert_array_equal(vals, [2, 3, 2])

    def test_chain_center_maximal(self):
        pts = np.array([[float(i), float(i)] for i in range(5)])
        vals = prerank_banddepth(pts)
        assert np.argmax(vals) == 2
        assert vals[0] == vals[-1] == min(vals)

    def test_needs_two_points(self):
        with pytest.raises(ParameterError):
            prerank_banddepth([[1.0, 2.0]])

    @settings(max_examples=150, deadline=None)
    @given(point_sets)
    def test_matches_bruteforce(self, points):
        pts = np.array(points)
        np.testing.assert_allclose(prerank_banddepth(pts), prerank_banddepth_bruteforce(pts))


class TestRankCharacteristics:
    def test_distinct_values(self, rng):
        np.testing.assert_array_equal(rank_characteristics([0.3, 0.1, 0.2], rng), [3, 1, 2])

    def test_sorted_input_is_identity(self, rng):
        np.testing.assert_array_equal(rank_characteristics([1.0, 2.0, 5.0], rng), [1, 2, 3])

    def test_tie_frequencies(self):
        counts = {(1, 2): 0, (2, 1): 0}
        for seed in range(10_000):
            tau = tuple(rank_characteristics([1.0, 1.0], np.random.default_rng(seed)))
            counts[tau] += 1
        assert counts[(1, 2)] / 10_000 == pytest.approx(0.5, abs=0.02)

    def test_non_finite_rejected(self, rng):
        with pytest.raises(ParameterError):
            rank_characteristics([1.0, np.inf], rng)

    def test_always_a_permutation(self, rng):
        for _ in range(50):
            chars = rng.integers(0, 3, size=9).astype(float)
            tau = rank_characteristics(chars, rng)
            assert sorted(tau) == list(range(1, 10))

    def test_ranks_sort_characteristics(self, rng):
        chars = np.array([3.0, 1.0, 3.0, 2.0, 1.0])
        tau = rank_characteristics(chars, rng)
        by_rank = chars[np.argsort(tau)]
        assert np.all(np.diff(by_rank) >= 0)


class TestRankPoints:
    def test_univariate_case_matches_classical_rank(self, rng):
        pts = rng.normal(size=(7, 1))
        result = rank_points(pts, RankingKind(MULTIVARIATE), rng)
        classical = 1 + np.argsort(np.argsort(pts[:, 0]))
        np.testing.assert_array_equal(result.permutation, classical)

    def test_sen_requires_indices(self):
        with pytest.raises(ParameterError):
            RankingKind(SEN)

    def test_monotone_margin_transform_invariance(self, rng):
        pts = rng.normal(size=(9, 3))
        transformed = np.column_stack(
            [np.exp(pts[:, 0]), 2.0 * pts[:, 1] + 5.0, pts[:, 2] ** 3]
        )
        for kind in (MULTIVARIATE, "average", "band_depth"):
            a = rank_points(pts, RankingKind(kind), np.random.default_rng(0)).permutation
            b = rank_points(transformed, RankingKind(kind), np.random.default_rng(0)).permutation
            np.testing.assert_array_equal(a, b)
