# CSV Exporter Module
# Files passed between pipeline stages: profiles, distance matrices,
# partitions and correlation tables. Output bytes depend only on the data.

from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml

from stopprofiler.analyzers.clusterer import ClusterResult
from stopprofiler.analyzers.distance_metrics import DistanceMatrix, MetricKind
from stopprofiler.analyzers.metric_comparator import CorrelationMatrix
from stopprofiler.analyzers.profile_builder import (HOUR_COLUMNS,
                                                    DiurnalProfile,
                                                    ProportionProfile)
from stopprofiler.core.apc import StopInfo
from stopprofiler.core.errors import DataError
from stopprofiler.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.12g"
LOCATION_COLUMNS = ("stop_id", "stop_name", "global_seq", "cum_distance", "lat", "lon")
PROFILE_COLUMNS = (*LOCATION_COLUMNS, "total", *HOUR_COLUMNS)


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _read_csv(path: PathLike, required: Sequence[str] = ()) -> pd.DataFrame:
    """Read a CSV as strings; missing files and columns are data errors"""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"{path}: {e}") from e
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")
    return frame


def _to_float(frame: pd.DataFrame, columns: Sequence[str], path: PathLike) -> np.ndarray:
    try:
        return frame[list(columns)].astype(float).to_numpy()
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e


def write_table(frame: pd.DataFrame, path: PathLike, index: bool = False) -> Path:
    path = _prepare(path)
    frame.to_csv(path, index=index, lineterminator="\n", float_format=FLOAT_FORMAT)
    return path


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """A profiles file: one 24-hour curve and location record per stop"""
    curves: "OrderedDict[str, np.ndarray]"
    infos: "OrderedDict[str, StopInfo]"
    totals: Dict[str, float]

    @property
    def stop_ids(self) -> List[str]:
        return list(self.curves.keys())


def write_profiles(profiles: Mapping[str, Union[DiurnalProfile, ProportionProfile]],
                   infos: Mapping[str, StopInfo], order: Sequence[str], path: PathLike) -> Path:
    """
    Write curves (counts or proportions) with each stop's location values.

    Args:
        profiles: Curves by stop id
        infos: Canonical location values by stop id
        order: Row order
        path: Output CSV
    """
    rows = []
    for stop_id in order:
        profile = profiles[stop_id]
        info = infos[stop_id]
        if isinstance(profile, ProportionProfile):
            curve, total = profile.proportions, profile.source_total
        else:
            curve, total = profile.counts, profile.total
        row = {
            "stop_id": stop_id,
            "stop_name": info.stop_name,
            "global_seq": info.canonical_global_seq,
            "cum_distance": info.canonical_cum_distance,
            "lat": info.canonical_lat,
            "lon": info.canonical_lon,
            "total": total,
        }
        row.update(zip(HOUR_COLUMNS, curve))
        rows.append(row)
    path = write_table(pd.DataFrame(rows, columns=list(PROFILE_COLUMNS)), path)
    logger.info(f"wrote {len(rows)} profiles to {path}")
    return path


def read_profiles(path: PathLike) -> ProfileTable:
    frame = _read_csv(path, PROFILE_COLUMNS)
    if frame["stop_id"].duplicated().any():
        raise DataError(f"{path}: duplicate stop_id")
    hours = _to_float(frame, HOUR_COLUMNS, path)
    numbers = _to_float(frame, ("global_seq", "cum_distance", "lat", "lon", "total"), path)

    curves: "OrderedDict[str, np.ndarray]" = OrderedDict()
    infos: "OrderedDict[str, StopInfo]" = OrderedDict()
    totals: Dict[str, float] = {}
    for i, stop_id in enumerate(frame["stop_id"]):
        curves[stop_id] = hours[i]
        infos[stop_id] = StopInfo(
            stop_id=stop_id,
            stop_name=frame["stop_name"].iloc[i],
            canonical_global_seq=int(numbers[i, 0]),
            canonical_cum_distance=float(numbers[i, 1]),
            canonical_lat=float(numbers[i, 2]),
            canonical_lon=float(numbers[i, 3])
        )
        totals[stop_id] = float(numbers[i, 4])
    return ProfileTable(curves=curves, infos=infos, totals=totals)


def write_matrix(matrix: DistanceMatrix, path: PathLike) -> Path:
    """Square CSV; the top-left cell names the metric"""
    frame = matrix.to_frame()
    frame.index.name = matrix.metric.value
    path = _prepare(path)
    frame.to_csv(path, lineterminator="\n", float_format=FLOAT_FORMAT)
    return path


def read_matrix(path: PathLike) -> DistanceMatrix:
    frame = _read_csv(path)
    if frame.shape[1] < 2:
        raise DataError(f"{path}: not a distance matrix")
    try:
        metric = MetricKind.parse(frame.columns[0])
    except ValueError as e:
        raise DataError(f"{path}: unknown metric {frame.columns[0]!r}") from e
    row_labels = list(frame.iloc[:, 0])
    column_labels = list(frame.columns[1:])
    if row_labels != column_labels:
        raise DataError(f"{path}: row and column labels differ")
    values = _to_float(frame, frame.columns[1:], path)
    return DistanceMatrix(labels=tuple(row_labels), values=values, metric=metric)


def meta_path_for(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.meta.yaml")


def write_clusters(result: ClusterResult, path: PathLike) -> Path:
    """stop_id,cluster rows plus a one-line metadata sidecar"""
    frame = pd.DataFrame({"stop_id": list(result.labels),
                          "cluster": [int(c) for c in result.assignment]})
    path = write_table(frame, path)
    meta = result.metadata()
    if result.medoid_ids is not None:
        meta["medoids"] = list(result.medoid_ids)
    meta_path_for(path).write_text(
        yaml.safe_dump(meta, default_flow_style=True, sort_keys=False, width=1 << 16),
        encoding="utf-8"
    )
    return path


def read_partition(path: PathLike) -> "OrderedDict[str, str]":
    """stop_id -> label from a two-column file (clusters or ground truth)"""
    frame = _read_csv(path, ("stop_id",))
    if frame.shape[1] < 2:
        raise DataError(f"{path}: expected stop_id and a label column")
    label_column = [c for c in frame.columns if c != "stop_id"][0]
    return OrderedDict(zip(frame["stop_id"], frame[label_column]))


def write_correlation(correlation: CorrelationMatrix, path: PathLike) -> Path:
    frame = correlation.to_frame()
    frame.index.name = "metric"
    return write_table(frame, path, index=True)


def write_yaml(data: Dict, path: PathLike) -> Path:
    path = _prepare(path)
    path.write_text(yaml.safe_dump(data, sort_keys=False, allow_unicode=True), encoding="utf-8")
    return path


def read_yaml(path: PathLike) -> Optional[Dict]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    try:
        return yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise DataError(f"{path}: {e}") from e
