"""
Distance Metrics

Five pairwise stop dissimilarities, each returned as a labeled DistanceMatrix:

- eucl:   Euclidean (L2) distance between 24-hour curves
- band:   band distance between curves, relative to the whole curve sample
- gseq:   difference in global sequence number along the route
- geo:    Euclidean distance between (lon, lat), or haversine meters
- trdist: difference in cumulative travel distance

Band distance of curves i and j counts, over every other curve h and every
time point t, how often c_h(t) lies inside [min(c_i(t), c_j(t)),
max(c_i(t), c_j(t))] (bounds inclusive), divided by (n - 2) * T. It uses only
the pointwise ordering of the curves, so any common strictly increasing
transform leaves it unchanged. A wide band holding much of the sample means
the pair is far apart relative to the data.
"""

from collections import Counter, OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform

from stopprofiler.core.apc import StopEvent, StopInfo
from stopprofiler.core.errors import (InvalidMatrixError, LabelMismatchError,
                                      LengthMismatchError, NotAPermutationError,
                                      TooFewCurvesError, UnknownVariationError)
from stopprofiler.utils.logger import get_logger
from stopprofiler.utils.parallel import ordered_map

logger = get_logger(__name__)

EARTH_RADIUS_M = 6371008.8


class MetricKind(Enum):
    CURVE_EUCLIDEAN = "eucl"
    CURVE_BAND = "band"
    SEQ_NUMBER = "gseq"
    GEOGRAPHIC = "geo"
    TRAVEL_DISTANCE = "trdist"

    @classmethod
    def parse(cls, value: str) -> "MetricKind":
        return cls(value.strip().lower())

    @property
    def is_curve_metric(self) -> bool:
        return self in (MetricKind.CURVE_EUCLIDEAN, MetricKind.CURVE_BAND)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric, zero-diagonal, nonnegative matrix of stop dissimilarities"""
    labels: tuple
    values: np.ndarray
    metric: MetricKind

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "labels", tuple(self.labels))
        n = len(self.labels)
        if values.shape != (n, n):
            raise InvalidMatrixError(f"{self.metric.value}: shape {values.shape} for {n} labels")
        if len(set(self.labels)) != n:
            raise InvalidMatrixError(f"{self.metric.value}: duplicate labels")
        if not np.array_equal(values, values.T):
            raise InvalidMatrixError(f"{self.metric.value}: not symmetric")
        if np.any(np.diag(values) != 0):
            raise InvalidMatrixError(f"{self.metric.value}: nonzero diagonal")
        if not np.all(values >= 0):
            raise InvalidMatrixError(f"{self.metric.value}: negative or NaN entry")
        if self.metric is MetricKind.CURVE_BAND and np.any(values > 1):
            raise InvalidMatrixError("band: entry above 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def from_condensed(cls, labels: Sequence[str], condensed: Sequence[float],
                       metric: MetricKind) -> "DistanceMatrix":
        """Build from the row-major upper triangle"""
        return cls(labels=tuple(labels), values=squareform(np.asarray(condensed, dtype=float)),
                   metric=metric)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.labels), columns=list(self.labels))


def _symmetric(upper: np.ndarray) -> np.ndarray:
    """Mirror the strict upper triangle; the diagonal becomes 0"""
    upper = np.triu(upper, k=1)
    return upper + upper.T


def curve_euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    """L2 distance between two equal-length curves"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatchError(f"curve lengths differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _as_curves(curves: Sequence[Sequence[float]]) -> np.ndarray:
    lengths = {len(c) for c in curves}
    if len(lengths) > 1:
        raise LengthMismatchError(f"curve lengths differ: {sorted(lengths)}")
    return np.asarray(curves, dtype=float).reshape(len(curves), -1)


def _default_labels(n: int, labels: Optional[Sequence[str]]) -> tuple:
    if labels is None:
        return tuple(str(i) for i in range(n))
    if len(labels) != n:
        raise LengthMismatchError(f"{len(labels)} labels for {n} curves")
    return tuple(labels)


def euclidean_distance_matrix(curves: Sequence[Sequence[float]],
                              labels: Optional[Sequence[str]] = None) -> DistanceMatrix:
    """Pairwise L2 distances between curves"""
    array = _as_curves(curves)
    labels = _default_labels(len(array), labels)
    if len(array) < 2:
        values = np.zeros((len(array), len(array)))
    else:
        values = _symmetric(squareform(pdist(array, metric="euclidean")))
    return DistanceMatrix(labels=labels, values=values, metric=MetricKind.CURVE_EUCLIDEAN)


# counts[i, j], number of curves n, curve length T -> normalized matrix
BandNormalizer = Callable[[np.ndarray, int, int], np.ndarray]


def normalized_band_count(counts: np.ndarray, n: int, length: int) -> np.ndarray:
    """Fraction of the (n - 2) * T reference cells inside each pair's band"""
    if n <= 2:
        return np.zeros_like(counts, dtype=float)
    return counts / ((n - 2) * length)


def band_pair_counts(curves: np.ndarray, threads: int = 0) -> np.ndarray:
    """
    Integer band-membership counts for every ordered pair.

    Rows are independent; with threads > 0 they are computed concurrently and
    the integer result is identical to the sequential one.
    """
    n, length = curves.shape

    def row(i: int) -> np.ndarray:
        lo = np.minimum(curves[i], curves)
        hi = np.maximum(curves[i], curves)
        inside = (curves[None, :, :] >= lo[:, None, :]) & (curves[None, :, :] <= hi[:, None, :])
        # curves i and j always sit on their own band
        return inside.sum(axis=(1, 2)) - 2 * length

    counts = np.vstack(ordered_map(row, range(n), threads)).astype(np.int64)
    np.fill_diagonal(counts, 0)
    return counts


def band_distance_matrix(curves: Sequence[Sequence[float]],
                         labels: Optional[Sequence[str]] = None,
                         normalizer: BandNormalizer = normalized_band_count,
                         threads: int = 0) -> DistanceMatrix:
    """
    Band distance between every pair of curves.

    Args:
        curves: n curves of equal length T >= 1
        labels: Stop ids, defaults to "0".."n-1"
        normalizer: Maps integer counts to distances
        threads: Row-parallel workers (0 = sequential)

    Raises:
        TooFewCurvesError: n < 2
        LengthMismatchError: curves of different lengths
    """
    if len(curves) < 2:
        raise TooFewCurvesError(f"band distance needs at least 2 curves, got {len(curves)}")
    array = _as_curves(curves)
    n, length = array.shape
    if length < 1:
        raise LengthMismatchError("curves must have at least one time point")
    labels = _default_labels(n, labels)

    values = normalizer(band_pair_counts(array, threads), n, length)
    np.fill_diagonal(values, 0.0)
    logger.debug(f"band distance over {n} curves x {length} points")
    return DistanceMatrix(labels=labels, values=values, metric=MetricKind.CURVE_BAND)


def _mode(values: Sequence):
    """Most frequent value; ties go to the smallest"""
    counter = Counter(values)
    top = max(counter.values())
    return min(v for v, c in counter.items() if c == top)


def canonical_location_values(events: Sequence[StopEvent]) -> "OrderedDict[str, StopInfo]":
    """
    One location value per stop: the mode of each field over its events.

    Route variations and loops make a stop's sequence number and travel
    distance differ between trips; the modal value is kept. Latitude and
    longitude are taken as one modal pair.
    """
    grouped: "OrderedDict[str, List[StopEvent]]" = OrderedDict()
    for event in events:
        grouped.setdefault(event.stop_id, []).append(event)

    infos: "OrderedDict[str, StopInfo]" = OrderedDict()
    for stop_id, stop_events in grouped.items():
        lat, lon = _mode([(e.lat, e.lon) for e in stop_events])
        infos[stop_id] = StopInfo(
            stop_id=stop_id,
            stop_name=_mode([e.stop_name for e in stop_events]),
            canonical_global_seq=_mode([e.global_seq for e in stop_events]),
            canonical_cum_distance=_mode([e.cum_distance for e in stop_events]),
            canonical_lat=lat,
            canonical_lon=lon,
            total_boardings=sum(e.boardings for e in stop_events),
            total_alightings=sum(e.alightings for e in stop_events)
        )
    return infos


def _haversine_matrix(lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    phi = np.radians(lat)
    lam = np.radians(lon)
    dphi = phi[:, None] - phi[None, :]
    dlam = lam[:, None] - lam[None, :]
    h = np.sin(dphi / 2) ** 2 + np.cos(phi[:, None]) * np.cos(phi[None, :]) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def location_distance_matrix(infos: Sequence[StopInfo], kind: MetricKind,
                             geographic_mode: str = "planar") -> DistanceMatrix:
    """
    Distances from canonical location values.

    Args:
        infos: Stops, in matrix order
        kind: SEQ_NUMBER, GEOGRAPHIC or TRAVEL_DISTANCE
        geographic_mode: "planar" (degrees) or "haversine" (meters)
    """
    labels = tuple(info.stop_id for info in infos)
    if kind is MetricKind.SEQ_NUMBER:
        seq = np.array([info.canonical_global_seq for info in infos], dtype=float)
        values = np.abs(seq[:, None] - seq[None, :])
    elif kind is MetricKind.TRAVEL_DISTANCE:
        cum = np.array([info.canonical_cum_distance for info in infos], dtype=float)
        values = np.abs(cum[:, None] - cum[None, :])
    elif kind is MetricKind.GEOGRAPHIC:
        lat = np.array([info.canonical_lat for info in infos], dtype=float)
        lon = np.array([info.canonical_lon for info in infos], dtype=float)
        if geographic_mode == "haversine":
            values = _haversine_matrix(lat, lon)
        elif geographic_mode == "planar":
            values = np.sqrt((lon[:, None] - lon[None, :]) ** 2 + (lat[:, None] - lat[None, :]) ** 2)
        else:
            raise ValueError(f"unknown geographic mode: {geographic_mode!r}")
    else:
        raise ValueError(f"{kind.value} is not a location metric")
    return DistanceMatrix(labels=labels, values=_symmetric(values), metric=kind)


def metric_distance_matrix(kind: MetricKind,
                           labels: Sequence[str],
                           curves: Optional[Mapping[str, Sequence[float]]] = None,
                           infos: Optional[Mapping[str, StopInfo]] = None,
                           geographic_mode: str = "planar",
                           threads: int = 0) -> DistanceMatrix:
    """Any of the five metrics over one label set"""
    if kind.is_curve_metric:
        if curves is None:
            raise ValueError(f"{kind.value} needs curves")
        rows = [curves[label] for label in labels]
        if kind is MetricKind.CURVE_EUCLIDEAN:
            return euclidean_distance_matrix(rows, labels)
        return band_distance_matrix(rows, labels, threads=threads)
    if infos is None:
        raise ValueError(f"{kind.value} needs stop locations")
    return location_distance_matrix([infos[label] for label in labels], kind, geographic_mode)


def _check_permutation(permutation: Sequence[int], n: int) -> List[int]:
    perm = list(permutation)
    if len(perm) != n:
        raise NotAPermutationError(f"permutation of length {len(perm)} for {n} labels")
    if any(not isinstance(p, (int, np.integer)) for p in perm) or sorted(perm) != list(range(n)):
        raise NotAPermutationError(f"not a permutation of 0..{n - 1}: {perm}")
    return [int(p) for p in perm]


def reorder(matrix: DistanceMatrix, permutation: Sequence[int]) -> DistanceMatrix:
    """Relabel: new position i holds old position permutation[i]"""
    perm = _check_permutation(permutation, matrix.size)
    return DistanceMatrix(
        labels=tuple(matrix.labels[p] for p in perm),
        values=matrix.values[np.ix_(perm, perm)],
        metric=matrix.metric
    )


def variation_order(events: Sequence[StopEvent], variation_id: str) -> List[str]:
    """
    Stops of one route variation in the order a bus meets them.

    The representative trip is the variation's trip with the most events
    (ties: smallest trip_id); its stops are listed by first appearance in
    (service_date, event_time) order.
    """
    trips: Dict[str, List[StopEvent]] = {}
    for event in events:
        if event.variation_id == variation_id:
            trips.setdefault(event.trip_id, []).append(event)
    if not trips:
        raise UnknownVariationError(f"no trips on variation {variation_id!r}")

    trip_id = min(trips, key=lambda t: (-len(trips[t]), t))
    ordered = sorted(trips[trip_id], key=lambda e: (e.service_date, e.event_time))
    return list(OrderedDict.fromkeys(e.stop_id for e in ordered))


def select(matrix: DistanceMatrix, labels: Sequence[str]) -> DistanceMatrix:
    """Sub-matrix over `labels`, in that order"""
    position = {label: i for i, label in enumerate(matrix.labels)}
    unknown = [label for label in labels if label not in position]
    if unknown:
        raise LabelMismatchError(f"{matrix.metric.value}: unknown stop(s) {unknown}")
    index = [position[label] for label in labels]
    return DistanceMatrix(labels=tuple(labels), values=matrix.values[np.ix_(index, index)],
                          metric=matrix.metric)
