# Metric Comparator Module
#
# Agreement between distance metrics: Spearman's rho on the vectorized upper
# triangles of two matrices over the same stops. Ranks ascend with distance;
# midranks resolve ties.

from dataclasses import dataclass
from itertools import combinations
from typing import List, Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from stopprofiler.analyzers.distance_metrics import DistanceMatrix
from stopprofiler.core.errors import (DegenerateError, EmptyInputError,
                                      LabelMismatchError,
                                      LengthMismatchError, TooFewStopsError)
from stopprofiler.utils.logger import get_logger
from stopprofiler.utils.parallel import ordered_map

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Pairwise Spearman's rho between metrics; symmetric with unit diagonal"""
    metric_labels: tuple  # MetricKind per row
    values: np.ndarray

    @property
    def names(self) -> List[str]:
        return [m.value for m in self.metric_labels]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.names, columns=self.names)


def upper_triangle(matrix: DistanceMatrix) -> np.ndarray:
    """Entries (i, j), i < j, in row-major order"""
    if matrix.size < 2:
        raise TooFewStopsError(f"{matrix.metric.value}: {matrix.size} stop(s), no pairs")
    return matrix.values[np.triu_indices(matrix.size, k=1)]


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, smallest first; ties share the mean of their ranks"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInputError("cannot rank an empty vector")
    return rankdata(values, method="average")


def spearman_rho(a: DistanceMatrix, b: DistanceMatrix) -> float:
    """
    Spearman's rho between two metrics over the same stops.

    Computed as the Pearson correlation of midranks, so it stays exact when
    distances tie (sequence-number matrices tie a lot).

    Raises:
        LabelMismatchError: labels differ in content or order
        DegenerateError: either matrix ranks every pair equally
    """
    if a.labels != b.labels:
        raise LabelMismatchError(f"{a.metric.value} and {b.metric.value} cover different stops")
    try:
        return rank_correlation(upper_triangle(a), upper_triangle(b))
    except DegenerateError as e:
        raise DegenerateError(f"{a.metric.value} vs {b.metric.value}: {e}") from e


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of the midranks of two equal-length vectors"""
    ra = average_ranks(x)
    rb = average_ranks(y)
    if len(ra) != len(rb):
        raise LengthMismatchError(f"vectors of length {len(ra)} and {len(rb)}")
    if np.all(ra == ra[0]) or np.all(rb == rb[0]):
        raise DegenerateError("constant ranks, rho undefined")

    da = ra - ra.mean()
    db = rb - rb.mean()
    rho = float(np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db)))
    return min(1.0, max(-1.0, rho))


def correlation_matrix(matrices: Sequence[DistanceMatrix], threads: int = 0) -> CorrelationMatrix:
    """All pairwise rhos; the diagonal is 1"""
    m = len(matrices)
    values = np.eye(m)
    pairs = list(combinations(range(m), 2))
    rhos = ordered_map(lambda p: spearman_rho(matrices[p[0]], matrices[p[1]]), pairs, threads)
    for (i, j), rho in zip(pairs, rhos):
        values[i, j] = values[j, i] = rho
    logger.info(f"compared {m} metrics over {matrices[0].size if m else 0} stops")
    return CorrelationMatrix(metric_labels=tuple(mx.metric for mx in matrices), values=values)
