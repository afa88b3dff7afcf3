"""
Clusterer

k-means (Lloyd iterations from seeded k-means++ starts) over proportion
curves, and k-medoids (PAM) over any precomputed DistanceMatrix. Both are
deterministic given their inputs and seed.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.signal import find_peaks
from sklearn.metrics import adjusted_rand_score

from stopprofiler.analyzers.distance_metrics import DistanceMatrix
from stopprofiler.core.errors import BadKError, LengthMismatchError, UsageError
from stopprofiler.utils.logger import get_logger

logger = get_logger(__name__)

SWAP_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """A partition of labeled stops"""
    algorithm: str
    labels: tuple
    assignment: np.ndarray
    objective: float
    iterations: int
    seed: int
    centers: Optional[np.ndarray] = None
    medoid_ids: Optional[tuple] = None
    history: tuple = field(default_factory=tuple)

    @property
    def k(self) -> int:
        if self.medoid_ids is not None:
            return len(self.medoid_ids)
        return len(self.centers)

    def members(self, cluster: int) -> List[str]:
        return [label for label, c in zip(self.labels, self.assignment) if c == cluster]

    def as_mapping(self) -> Dict[str, int]:
        return {label: int(c) for label, c in zip(self.labels, self.assignment)}

    def metadata(self) -> Dict:
        return {
            'algorithm': self.algorithm,
            'k': self.k,
            'seed': self.seed,
            'objective': float(self.objective),
            'iterations': self.iterations
        }


@dataclass(frozen=True, eq=False)
class ClusterSummary:
    """Size and shape of one cluster's mean curve"""
    cluster: int
    size: int
    stop_ids: tuple
    mean_curve: np.ndarray
    peak_hours: tuple

    def to_dict(self) -> Dict:
        return {
            'cluster': self.cluster,
            'size': self.size,
            'peak_hours': list(self.peak_hours),
            'stop_ids': list(self.stop_ids)
        }


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise BadKError(f"k must be in 1..{n}, got {k}")


def _sse(points: np.ndarray, assignment: np.ndarray, centers: np.ndarray) -> float:
    return float(np.sum((points - centers[assignment]) ** 2))


def _kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D²-weighted seeding; falls back to a uniform pick when every point is covered"""
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            free = [i for i in range(n) if i not in chosen]
            nxt = free[int(rng.integers(len(free)))]
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[chosen].copy()


def _repair_empty(assignment: np.ndarray, k: int, sq_dist: np.ndarray) -> np.ndarray:
    """
    Give every empty cluster a singleton: the point farthest from its own
    center, taken from a cluster that keeps at least one member.
    """
    assignment = assignment.copy()
    cost = sq_dist[np.arange(len(assignment)), assignment].copy()
    for cluster in range(k):
        if np.any(assignment == cluster):
            continue
        sizes = np.bincount(assignment, minlength=k)
        movable = np.where(sizes[assignment] > 1, cost, -np.inf)
        point = int(np.argmax(movable))
        logger.debug(f"cluster {cluster} empty, reseeded with point {point}")
        assignment[point] = cluster
        cost[point] = 0.0
    return assignment


def _lloyd(x: np.ndarray, centers: np.ndarray, k: int, max_iter: int):
    """Lloyd iterations from given centers; returns (assignment, centers, history)"""
    assignment = None
    history: List[float] = []
    for _ in range(max_iter):
        sq_dist = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        proposed = _repair_empty(np.argmin(sq_dist, axis=1), k, sq_dist)
        if assignment is not None and np.array_equal(proposed, assignment):
            break
        assignment = proposed
        centers = np.vstack([x[assignment == c].mean(axis=0) for c in range(k)])
        history.append(_sse(x, assignment, centers))
    return assignment, centers, history


def kmeans(points: Sequence[Sequence[float]], k: int, seed: int, max_iter: int = 100,
           labels: Optional[Sequence[str]] = None, n_init: int = 10) -> ClusterResult:
    """
    Lloyd's k-means, best of n_init k-means++ starts.

    Every start draws from the one Generator seeded with `seed`, in order;
    the run with the lowest objective is kept (the earlier run on ties).

    Args:
        points: n vectors of equal length
        k: Number of clusters, 1..n
        seed: Drives the k-means++ starts
        max_iter: Cap on Lloyd iterations per start, at least 1
        labels: Stop ids aligned with points (default "0".."n-1")
        n_init: Number of starts, at least 1

    Returns:
        ClusterResult with centers and the kept run's objective after every iteration
    """
    x = np.asarray(points, dtype=float)
    n = len(x)
    _check_k(k, n)
    if max_iter < 1:
        raise UsageError(f"max_iter must be at least 1, got {max_iter}")
    if n_init < 1:
        raise UsageError(f"n_init must be at least 1, got {n_init}")
    if labels is None:
        labels = [str(i) for i in range(n)]
    if len(labels) != n:
        raise LengthMismatchError(f"{len(labels)} labels for {n} points")

    rng = np.random.default_rng(seed)
    best = None
    for start in range(n_init):
        run = _lloyd(x, _kmeans_plus_plus(x, k, rng), k, max_iter)
        logger.debug(f"kmeans start {start}: objective {run[2][-1]:.6g}")
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    assignment, centers, history = best

    logger.info(f"kmeans k={k} seed={seed}: objective {history[-1]:.6g} after {len(history)} iterations "
                f"(best of {n_init} starts)")
    return ClusterResult(
        algorithm="kmeans",
        labels=tuple(labels),
        assignment=assignment,
        objective=history[-1],
        iterations=len(history),
        seed=seed,
        centers=centers,
        history=tuple(history)
    )


def _pam_cost(dist: np.ndarray, medoids: Sequence[int]) -> float:
    return float(dist[:, list(medoids)].min(axis=1).sum())


def _pam_build(dist: np.ndarray, k: int) -> List[int]:
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    nearest = dist[:, medoids[0]].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[:, None] - dist, 0.0).sum(axis=0)
        gains[medoids] = -np.inf
        best = int(np.argmax(gains))
        medoids.append(best)
        nearest = np.minimum(nearest, dist[:, best])
    return medoids


def kmedoids(matrix: DistanceMatrix, k: int, seed: int) -> ClusterResult:
    """
    Partitioning Around Medoids.

    BUILD adds medoids greedily; SWAP then applies the best strictly
    improving (medoid, non-medoid) exchange until none is left. The seed is
    recorded but PAM itself draws nothing.
    """
    dist = matrix.values
    n = matrix.size
    _check_k(k, n)

    medoids = _pam_build(dist, k)
    cost = _pam_cost(dist, medoids)
    history = [cost]
    swaps = 0
    while True:
        best_cost, best_swap = cost - SWAP_TOLERANCE * max(1.0, cost), None
        for slot in range(k):
            for candidate in range(n):
                if candidate in medoids:
                    continue
                trial = medoids[:slot] + [candidate] + medoids[slot + 1:]
                trial_cost = _pam_cost(dist, trial)
                if trial_cost < best_cost:
                    best_cost, best_swap = trial_cost, (slot, candidate)
        if best_swap is None:
            break
        slot, candidate = best_swap
        medoids[slot] = candidate
        cost = best_cost
        history.append(cost)
        swaps += 1

    assignment = np.argmin(dist[:, medoids], axis=1)
    # a medoid at distance 0 from an earlier one still heads its own cluster
    assignment[medoids] = np.arange(k)
    objective = float(dist[np.arange(n), np.asarray(medoids)[assignment]].sum())

    logger.info(f"kmedoids k={k}: objective {objective:.6g} after {swaps} swaps")
    return ClusterResult(
        algorithm="kmedoids",
        labels=matrix.labels,
        assignment=assignment,
        objective=objective,
        iterations=swaps,
        seed=seed,
        medoid_ids=tuple(matrix.labels[m] for m in medoids),
        history=tuple(history)
    )


def adjusted_rand_index(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement of two partitions given as label vectors"""
    if len(a) != len(b):
        raise LengthMismatchError(f"partitions of length {len(a)} and {len(b)}")
    return float(adjusted_rand_score(list(a), list(b)))


def peak_hours(curve: Sequence[float], min_prominence: float = 0.1) -> List[int]:
    """Local maxima standing out by at least min_prominence of the curve maximum"""
    values = np.asarray(curve, dtype=float)
    top = values.max() if len(values) else 0.0
    if top <= 0:
        return []
    padded = np.concatenate(([0.0], values, [0.0]))
    peaks, _ = find_peaks(padded, prominence=min_prominence * top)
    return [int(p) - 1 for p in peaks]


def describe_clusters(result: ClusterResult,
                      curves: Union[Mapping[str, Sequence[float]], Sequence[Sequence[float]]],
                      min_prominence: float = 0.1) -> List[ClusterSummary]:
    """
    Mean curve and peak hours of every cluster.

    Args:
        result: Clustering to describe
        curves: Curves by stop id, or aligned with result.labels
        min_prominence: Peak threshold as a fraction of the mean curve's maximum
    """
    if isinstance(curves, Mapping):
        rows = np.asarray([curves[label] for label in result.labels], dtype=float)
    else:
        rows = np.asarray(curves, dtype=float)
        if len(rows) != len(result.labels):
            raise LengthMismatchError(f"{len(rows)} curves for {len(result.labels)} labels")

    summaries = []
    for cluster in range(result.k):
        mask = result.assignment == cluster
        mean_curve = rows[mask].mean(axis=0)
        summaries.append(ClusterSummary(
            cluster=cluster,
            size=int(mask.sum()),
            stop_ids=tuple(result.members(cluster)),
            mean_curve=mean_curve,
            peak_hours=tuple(peak_hours(mean_curve, min_prominence))
        ))
    return summaries
