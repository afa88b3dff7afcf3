"""
Profile Builder

Turns a filtered event cohort into route-level tables and per-stop diurnal
curves. Counts are summed over every date in the cohort (no per-day
averaging) and binned by the floor of the local event hour.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set

import numpy as np
import pandas as pd

from stopprofiler.collectors.event_reader import events_to_frame
from stopprofiler.core.apc import StopEvent, StopInfo
from stopprofiler.core.errors import ZeroTotalError
from stopprofiler.utils.logger import get_logger

logger = get_logger(__name__)

HOURS = 24
WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri")
HOUR_COLUMNS = tuple(f"h{h:02d}" for h in range(HOURS))
TOTAL_TOLERANCE = 1e-9


class Measure(Enum):
    BOARDINGS = "boardings"
    ALIGHTINGS = "alightings"

    @classmethod
    def parse(cls, value: str) -> "Measure":
        return cls(value.strip().lower())


class Grouping(Enum):
    BY_DAY_OF_WEEK = "day"
    BY_HOUR = "hour"
    BY_DAY_OF_WEEK_AND_HOUR = "day_hour"


@dataclass(frozen=True, eq=False)
class DiurnalProfile:
    """A stop's 24 hourly sums of one measure"""
    stop_id: str
    measure: Measure
    counts: np.ndarray
    total: float = field(default=None)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float)
        if counts.shape != (HOURS,):
            raise ValueError(f"profile {self.stop_id}: expected {HOURS} hourly values, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError(f"profile {self.stop_id}: negative hourly count")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

        total = float(counts.sum())
        if self.total is None:
            object.__setattr__(self, "total", total)
        elif not math.isclose(self.total, total, rel_tol=TOTAL_TOLERANCE, abs_tol=TOTAL_TOLERANCE):
            raise ValueError(f"profile {self.stop_id}: total {self.total} != sum of counts {total}")


@dataclass(frozen=True, eq=False)
class ProportionProfile:
    """Share of a stop's total falling in each hour"""
    stop_id: str
    proportions: np.ndarray
    source_total: float = 0.0

    def __post_init__(self):
        values = np.array(self.proportions, dtype=float)
        if values.shape != (HOURS,):
            raise ValueError(f"proportions {self.stop_id}: expected {HOURS} values, got {values.shape}")
        if abs(values.sum() - 1.0) > TOTAL_TOLERANCE:
            raise ValueError(f"proportions {self.stop_id}: sum {values.sum()} != 1")
        values.setflags(write=False)
        object.__setattr__(self, "proportions", values)


@dataclass(frozen=True)
class AggregateTable:
    """Route-level sums keyed by weekday name, hour, or (weekday name, hour)"""
    grouping: Grouping
    measure: Measure
    cells: Dict

    @property
    def total(self) -> float:
        return float(sum(self.cells.values()))

    def to_frame(self) -> pd.DataFrame:
        if self.grouping is Grouping.BY_DAY_OF_WEEK_AND_HOUR:
            frame = pd.DataFrame(0.0, index=list(WEEKDAY_NAMES), columns=list(range(HOURS)))
            for (day, hour), value in self.cells.items():
                frame.loc[day, hour] = value
            frame.index.name = "day"
            return frame
        key = "day" if self.grouping is Grouping.BY_DAY_OF_WEEK else "hour"
        return pd.DataFrame({key: list(self.cells.keys()),
                             self.measure.value: list(self.cells.values())})


@dataclass(frozen=True)
class VolumeSummary:
    """Skew diagnostics of per-stop totals"""
    n_stops: int
    median_total: float
    max_stop: Optional[str]
    max_total: float
    n_low: int
    n_eligible: int

    def to_dict(self) -> Dict:
        return {
            'n_stops': self.n_stops,
            'median_total': self.median_total,
            'max_stop': self.max_stop,
            'max_total': self.max_total,
            'n_low': self.n_low,
            'n_eligible': self.n_eligible
        }


def _weekday_frame(events: Sequence[StopEvent]) -> pd.DataFrame:
    frame = events_to_frame(events)
    weekend = frame["weekday"] >= 5
    if weekend.any():
        logger.warning(f"skipping {int(weekend.sum())} weekend events in day-of-week table")
        frame = frame[~weekend]
    return frame


def aggregate_counts(events: Sequence[StopEvent], grouping: Grouping, measure: Measure) -> AggregateTable:
    """
    Sum a measure over the cohort by weekday, hour, or both.

    Args:
        events: Filtered cohort
        grouping: Table layout
        measure: Boardings or alightings

    Returns:
        AggregateTable with every key present (zero when empty)
    """
    column = measure.value
    if grouping is Grouping.BY_HOUR:
        frame = events_to_frame(events)
        sums = frame.groupby("hour")[column].sum()
        cells = {h: float(sums.get(h, 0)) for h in range(HOURS)}
    elif grouping is Grouping.BY_DAY_OF_WEEK:
        frame = _weekday_frame(events)
        sums = frame.groupby("weekday")[column].sum()
        cells = {name: float(sums.get(d, 0)) for d, name in enumerate(WEEKDAY_NAMES)}
    else:
        frame = _weekday_frame(events)
        sums = frame.groupby(["weekday", "hour"])[column].sum()
        cells = {
            (name, h): float(sums.get((d, h), 0))
            for d, name in enumerate(WEEKDAY_NAMES)
            for h in range(HOURS)
        }
    return AggregateTable(grouping=grouping, measure=measure, cells=cells)


def weekly_day_totals(events: Sequence[StopEvent], measure: Measure) -> pd.DataFrame:
    """
    Totals per (week, weekday): the spread of each weekday across the weeks
    of the period. Rows are indexed by the Monday of each week.
    """
    frame = _weekday_frame(events)
    if frame.empty:
        return pd.DataFrame(columns=list(WEEKDAY_NAMES), dtype=float)
    dates = pd.to_datetime(frame["service_date"])
    frame = frame.assign(week_start=(dates - pd.to_timedelta(frame["weekday"], unit="D")).dt.date)
    table = frame.pivot_table(index="week_start", columns="weekday", values=measure.value,
                              aggfunc="sum", fill_value=0)
    table = table.reindex(columns=range(len(WEEKDAY_NAMES)), fill_value=0).astype(float)
    table.columns = list(WEEKDAY_NAMES)
    return table.sort_index()


def stop_diurnal_profiles(events: Sequence[StopEvent], measure: Measure) -> Dict[str, DiurnalProfile]:
    """
    One 24-hour curve per stop, summed across all cohort dates.

    Stops without events are absent. Keys follow first appearance.
    """
    frame = events_to_frame(events)
    if frame.empty:
        return {}
    sums = frame.groupby(["stop_id", "hour"], sort=False)[measure.value].sum()

    profiles: Dict[str, DiurnalProfile] = {}
    for stop_id in pd.unique(frame["stop_id"]):
        counts = np.zeros(HOURS)
        stop_sums = sums.loc[stop_id]
        counts[stop_sums.index.to_numpy()] = stop_sums.to_numpy()
        profiles[stop_id] = DiurnalProfile(stop_id=stop_id, measure=measure, counts=counts)
    logger.info(f"built {len(profiles)} {measure.value} profiles")
    return profiles


def to_proportions(profile: DiurnalProfile) -> ProportionProfile:
    """Divide each hour by the stop total"""
    if profile.total <= 0:
        raise ZeroTotalError([profile.stop_id])
    return ProportionProfile(
        stop_id=profile.stop_id,
        proportions=profile.counts / profile.total,
        source_total=profile.total
    )


def eligible_stops(profiles: Mapping[str, DiurnalProfile], min_total: float = 50) -> Set[str]:
    """Stops whose total reaches min_total (inclusive)"""
    return {stop_id for stop_id, p in profiles.items() if p.total >= min_total}


def log_volumes(profiles: Mapping[str, DiurnalProfile]) -> Dict[str, float]:
    """Natural log of each stop total"""
    zero = [stop_id for stop_id, p in profiles.items() if p.total <= 0]
    if zero:
        raise ZeroTotalError(zero)
    return {stop_id: math.log(p.total) for stop_id, p in profiles.items()}


def volume_summary(profiles: Mapping[str, DiurnalProfile],
                   low_threshold: float = 10,
                   min_total: float = 50) -> VolumeSummary:
    """Median, dominant stop and the very-low-volume group"""
    if not profiles:
        return VolumeSummary(0, 0.0, None, 0.0, 0, 0)
    totals = {stop_id: p.total for stop_id, p in profiles.items()}
    max_stop = min(totals, key=lambda s: (-totals[s], s))
    return VolumeSummary(
        n_stops=len(totals),
        median_total=float(np.median(list(totals.values()))),
        max_stop=max_stop,
        max_total=totals[max_stop],
        n_low=sum(1 for t in totals.values() if t < low_threshold),
        n_eligible=len(eligible_stops(profiles, min_total))
    )


def order_by_global_seq(stop_ids: Iterable[str], infos: Mapping[str, StopInfo]) -> List[str]:
    """Sort stops by canonical global sequence number, then stop_id"""
    return sorted(stop_ids, key=lambda s: (infos[s].canonical_global_seq, s))
