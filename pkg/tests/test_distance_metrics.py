"""
Distance metric tests
"""
from datetime import time

import numpy as np
import pytest

from stopprofiler.analyzers.distance_metrics import (DistanceMatrix,
                                                     MetricKind,
                                                     band_distance_matrix,
                                                     canonical_location_values,
                                                     curve_euclidean,
                                                     euclidean_distance_matrix,
                                                     location_distance_matrix,
                                                     metric_distance_matrix,
                                                     reorder, select,
                                                     variation_order)
from stopprofiler.core.apc import StopInfo
from stopprofiler.core.errors import (InvalidMatrixError, LabelMismatchError,
                                      LengthMismatchError,
                                      NotAPermutationError,
                                      TooFewCurvesError, UnknownVariationError)


def brute_force_band(curves):
    """Pair, other curve, time point: the definition written out as loops"""
    n = len(curves)
    length = len(curves[0])
    out = [[0.0] * n for _ in range(n)]
    if n <= 2:
        return out
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            count = 0
            for h in range(n):
                if h in (i, j):
                    continue
                for t in range(length):
                    lo = min(curves[i][t], curves[j][t])
                    hi = max(curves[i][t], curves[j][t])
                    if lo <= curves[h][t] <= hi:
                        count += 1
            out[i][j] = count / ((n - 2) * length)
    return out


def _info(stop_id, gseq=1, cum=0.0, lat=0.0, lon=0.0) -> StopInfo:
    return StopInfo(stop_id=stop_id, stop_name=stop_id, canonical_global_seq=gseq,
                    canonical_cum_distance=cum, canonical_lat=lat, canonical_lon=lon)


class TestDistanceMatrix:
    """DistanceMatrix construction checks"""

    def test_valid(self):
        """A symmetric zero-diagonal matrix is accepted and read-only"""
        matrix = DistanceMatrix(("A", "B"), [[0, 2], [2, 0]], MetricKind.SEQ_NUMBER)
        assert matrix.size == 2
        with pytest.raises(ValueError):
            matrix.values[0, 1] = 5

    @pytest.mark.parametrize("values", [
        [[0, 1], [2, 0]],
        [[1, 1], [1, 0]],
        [[0, -1], [-1, 0]],
        [[0, np.nan], [np.nan, 0]],
        [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
    ])
    def test_invalid(self, values):
        """Asymmetric, nonzero diagonal, negative, NaN or misshapen"""
        with pytest.raises(InvalidMatrixError):
            DistanceMatrix(("A", "B"), values, MetricKind.SEQ_NUMBER)

    def test_band_bounded(self):
        """Band entries cannot exceed 1"""
        with pytest.raises(InvalidMatrixError):
            DistanceMatrix(("A", "B"), [[0, 1.5], [1.5, 0]], MetricKind.CURVE_BAND)

    def test_duplicate_labels(self):
        """Labels are unique"""
        with pytest.raises(InvalidMatrixError):
            DistanceMatrix(("A", "A"), [[0, 1], [1, 0]], MetricKind.GEOGRAPHIC)

    def test_from_condensed(self):
        """Row-major upper triangle expands to the square matrix"""
        matrix = DistanceMatrix.from_condensed("ABC", [1, 2, 3], MetricKind.TRAVEL_DISTANCE)
        assert matrix.values.tolist() == [[0, 1, 2], [1, 0, 3], [2, 3, 0]]
        assert list(matrix.to_frame().index) == ["A", "B", "C"]

    def test_metric_parse(self):
        """Metric names parse case-insensitively"""
        assert MetricKind.parse(" Band ") is MetricKind.CURVE_BAND
        assert MetricKind.CURVE_EUCLIDEAN.is_curve_metric
        assert not MetricKind.GEOGRAPHIC.is_curve_metric
        with pytest.raises(ValueError):
            MetricKind.parse("cosine")


class TestCurveEuclidean:
    """curve_euclidean and euclidean_distance_matrix"""

    def test_identity(self, rng):
        """d(a, a) = 0"""
        a = rng.random(24)
        assert curve_euclidean(a, a) == 0.0

    def test_three_four_five(self):
        """sqrt(9 + 16) = 5"""
        b = np.zeros(24)
        b[8], b[17] = 3, 4
        assert curve_euclidean(np.zeros(24), b) == 5.0

    def test_symmetric(self, rng):
        """Argument order does not matter"""
        a, b = rng.random(24), rng.random(24)
        assert curve_euclidean(a, b) == curve_euclidean(b, a)

    def test_length_mismatch(self):
        """Curves must have equal length"""
        with pytest.raises(LengthMismatchError):
            curve_euclidean(np.zeros(24), np.zeros(23))

    def test_matrix_properties(self, rng):
        """Triangle inequality and scaling by c"""
        curves = rng.random((12, 24))
        matrix = euclidean_distance_matrix(curves).values
        assert np.all(matrix[:, :, None] <= matrix[:, None, :] + matrix.T[None, :, :] + 1e-12)
        scaled = euclidean_distance_matrix(3.0 * curves).values
        np.testing.assert_allclose(scaled, 3.0 * matrix, rtol=1e-12)
        assert matrix[2, 5] == pytest.approx(curve_euclidean(curves[2], curves[5]), rel=1e-12)

    def test_single_curve(self):
        """One curve gives a 1x1 zero matrix"""
        assert euclidean_distance_matrix([np.ones(24)], ["A"]).values.tolist() == [[0.0]]


class TestBandDistance:
    """band_distance_matrix"""

    def test_three_flat_curves(self):
        """The outer pair's band holds the middle curve everywhere"""
        matrix = band_distance_matrix([(0, 0, 0), (2, 2, 2), (1, 1, 1)], ["c1", "c2", "c3"])
        assert matrix.values[0, 1] == 1.0
        assert matrix.values[0, 2] == 0.0
        assert matrix.values[1, 2] == 0.0

    def test_two_curves(self):
        """No reference curves leaves the pair at 0"""
        matrix = band_distance_matrix([np.zeros(24), np.ones(24)])
        assert matrix.values.tolist() == [[0.0, 0.0], [0.0, 0.0]]

    def test_too_few(self):
        """A single curve has no pairs"""
        with pytest.raises(TooFewCurvesError):
            band_distance_matrix([np.zeros(24)])

    def test_length_mismatch(self):
        """Curves of different lengths are rejected"""
        with pytest.raises(LengthMismatchError):
            band_distance_matrix([np.zeros(24), np.zeros(24), np.zeros(12)])

    def test_matches_brute_force(self, rng):
        """Exact agreement with the loop oracle on random integer curves"""
        for _ in range(200):
            n = int(rng.integers(3, 13))
            curves = rng.integers(0, 6, size=(n, 24)).tolist()
            expected = brute_force_band(curves)
            actual = band_distance_matrix(curves).values
            assert actual.tolist() == expected

    def test_ten_real_curves(self, rng):
        """Ties are rare on continuous curves; the oracle still matches exactly"""
        curves = rng.random((10, 24)).tolist()
        assert band_distance_matrix(curves).values.tolist() == brute_force_band(curves)

    @pytest.mark.parametrize("transform", [lambda x: x ** 3, lambda x: 2 * x + 1])
    def test_monotone_transform_invariance(self, rng, transform):
        """Only the pointwise ordering matters, on 50 instances per transform"""
        for _ in range(50):
            n = int(rng.integers(3, 13))
            curves = rng.integers(0, 20, size=(n, 24)).astype(float)
            before = band_distance_matrix(curves).values
            after = band_distance_matrix(transform(curves)).values
            np.testing.assert_allclose(after, before, rtol=0, atol=1e-12)

    def test_bounds(self, rng):
        """Entries lie in [0, 1]"""
        values = band_distance_matrix(rng.random((15, 24))).values
        assert values.min() >= 0 and values.max() <= 1

    def test_threads_give_identical_result(self, rng):
        """Row-parallel evaluation reproduces the sequential matrix"""
        curves = rng.random((20, 24))
        sequential = band_distance_matrix(curves, threads=0).values
        parallel = band_distance_matrix(curves, threads=4).values
        assert np.array_equal(sequential, parallel)

    def test_metric_dispatch(self, rng):
        """metric_distance_matrix picks curves by label"""
        curves = {s: rng.random(24) for s in "ABCD"}
        matrix = metric_distance_matrix(MetricKind.CURVE_BAND, ["D", "A", "C"], curves=curves)
        assert matrix.labels == ("D", "A", "C")
        expected = band_distance_matrix([curves["D"], curves["A"], curves["C"]]).values
        assert np.array_equal(matrix.values, expected)


class TestCanonicalLocations:
    """canonical_location_values"""

    def test_modal_sequence(self, make_event):
        """{12, 12, 45} -> 12"""
        events = [make_event(trip_id=t, global_seq=g) for t, g in [("a", 12), ("b", 12), ("c", 45)]]
        assert canonical_location_values(events)["A"].canonical_global_seq == 12

    def test_tie_takes_smallest(self, make_event):
        """{100.0, 200.0} -> 100.0"""
        events = [make_event(trip_id="a", cum_distance=200.0), make_event(trip_id="b", cum_distance=100.0)]
        assert canonical_location_values(events)["A"].canonical_cum_distance == 100.0

    def test_single_event(self, make_event):
        """A lone event's values are the stop's values"""
        event = make_event(global_seq=7, cum_distance=3.5, lat=43.2, lon=-77.5, boardings=4)
        info = canonical_location_values([event])["A"]
        assert (info.canonical_global_seq, info.canonical_cum_distance) == (7, 3.5)
        assert (info.canonical_lat, info.canonical_lon) == (43.2, -77.5)
        assert info.total_boardings == 4

    def test_coordinates_as_pair(self, make_event):
        """Latitude and longitude come from the same observation"""
        events = [make_event(trip_id="a", lat=43.0, lon=-77.0),
                  make_event(trip_id="b", lat=43.0, lon=-77.0),
                  make_event(trip_id="c", lat=42.0, lon=-78.0)]
        info = canonical_location_values(events)["A"]
        assert (info.canonical_lat, info.canonical_lon) == (43.0, -77.0)


class TestLocationDistance:
    """location_distance_matrix"""

    def test_seq_number(self):
        """gseq 3 and 7 -> 4"""
        matrix = location_distance_matrix([_info("A", gseq=3), _info("B", gseq=7)], MetricKind.SEQ_NUMBER)
        assert matrix.values[0, 1] == 4

    def test_planar_geographic(self):
        """(0, 0) to (3, 4) -> 5 degrees"""
        matrix = location_distance_matrix([_info("A"), _info("B", lat=3.0, lon=4.0)], MetricKind.GEOGRAPHIC)
        assert matrix.values[0, 1] == 5.0

    def test_travel_distance(self):
        """Absolute difference of cumulative distance"""
        matrix = location_distance_matrix([_info("A", cum=250.0), _info("B", cum=1000.0)],
                                          MetricKind.TRAVEL_DISTANCE)
        assert matrix.values[1, 0] == 750.0

    def test_identical_values(self):
        """Same location gives zeros for all three metrics"""
        infos = [_info("A", 4, 10.0, 43.1, -77.6), _info("B", 4, 10.0, 43.1, -77.6)]
        for kind in (MetricKind.SEQ_NUMBER, MetricKind.GEOGRAPHIC, MetricKind.TRAVEL_DISTANCE):
            assert not location_distance_matrix(infos, kind).values.any()

    def test_haversine(self):
        """One degree of latitude is about 111.2 km"""
        matrix = location_distance_matrix([_info("A"), _info("B", lat=1.0)], MetricKind.GEOGRAPHIC,
                                          geographic_mode="haversine")
        assert matrix.values[0, 1] == pytest.approx(111195.08, rel=1e-5)

    def test_rejects_curve_metric(self):
        """Curve metrics need curves"""
        with pytest.raises(ValueError):
            location_distance_matrix([_info("A")], MetricKind.CURVE_BAND)


class TestReorderAndSelect:
    """reorder, select"""

    def _matrix(self):
        return DistanceMatrix.from_condensed("ABCD", [1, 2, 3, 4, 5, 6], MetricKind.SEQ_NUMBER)

    def test_identity(self):
        """Identity permutation leaves the matrix unchanged"""
        matrix = self._matrix()
        same = reorder(matrix, [0, 1, 2, 3])
        assert same.labels == matrix.labels
        assert np.array_equal(same.values, matrix.values)

    def test_swap(self):
        """Swapping two labels swaps rows and columns"""
        swapped = reorder(self._matrix(), [1, 0, 2, 3])
        assert swapped.labels == ("B", "A", "C", "D")
        assert swapped.values[0, 2] == 4
        assert np.array_equal(swapped.values, swapped.values.T)

    def test_off_diagonal_multiset(self, rng):
        """Any permutation keeps the same distances"""
        matrix = self._matrix()
        permuted = reorder(matrix, rng.permutation(4).tolist())
        assert sorted(permuted.values.ravel()) == sorted(matrix.values.ravel())

    @pytest.mark.parametrize("perm", [[0, 1, 2], [0, 0, 1, 2], [0, 1, 2, 4]])
    def test_not_a_permutation(self, perm):
        """Wrong length, repeats and out-of-range indices are rejected"""
        with pytest.raises(NotAPermutationError):
            reorder(self._matrix(), perm)

    def test_select(self):
        """Sub-matrix in the requested order"""
        sub = select(self._matrix(), ["D", "B"])
        assert sub.labels == ("D", "B")
        assert sub.values[0, 1] == 5

    def test_select_unknown(self):
        """Unknown stops are reported"""
        with pytest.raises(LabelMismatchError):
            select(self._matrix(), ["A", "Z"])


class TestVariationOrder:
    """variation_order"""

    def test_time_order(self, make_event):
        """Stops listed as the bus meets them"""
        events = [make_event(stop_id="C", event_time=time(7, 10)),
                  make_event(stop_id="A", event_time=time(7, 0)),
                  make_event(stop_id="B", event_time=time(7, 5))]
        assert variation_order(events, "10") == ["A", "B", "C"]

    def test_fuller_trip_wins(self, make_event):
        """The trip with more events defines the order"""
        short = [make_event(trip_id="T1", stop_id=s, event_time=time(7, i)) for i, s in enumerate("BA")]
        full = [make_event(trip_id="T2", stop_id=s, event_time=time(8, i)) for i, s in enumerate("ABC")]
        assert variation_order(short + full, "10") == ["A", "B", "C"]

    def test_unknown_variation(self, small_cohort):
        """No trip on the variation"""
        with pytest.raises(UnknownVariationError):
            variation_order(small_cohort, "99")
