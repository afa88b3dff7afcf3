"""
APC domain types

One StopEvent is one doors-open record from the automated passenger counter.
An event is generated even when nobody boards or alights, so all-zero counts
are valid. The onboard load is carried as recorded but never trusted: sensor
miscounts can drive it negative.
"""

from collections import OrderedDict
from dataclasses import dataclass
from datetime import date, time
from enum import Enum
from typing import Any, Dict, Iterable, Sequence, Tuple

from stopprofiler.core.errors import ConfigError, MixedTripError, RangeError


class Direction(Enum):
    """Trip direction; files encode it as I/O"""
    INBOUND = "I"
    OUTBOUND = "O"

    @classmethod
    def parse(cls, value: str) -> "Direction":
        token = value.strip().upper()
        if token in ("I", "INBOUND"):
            return cls.INBOUND
        if token in ("O", "OUTBOUND"):
            return cls.OUTBOUND
        raise ValueError(f"unknown direction: {value!r}")


@dataclass(frozen=True)
class StopEvent:
    """One doors-open event"""
    route_id: str
    direction: Direction
    variation_id: str
    trip_id: str
    stop_id: str
    stop_name: str
    service_date: date
    event_time: time
    boardings: int
    alightings: int
    load: int
    cum_distance: float  # meters since trip start
    global_seq: int
    lat: float
    lon: float

    @property
    def identity(self) -> Tuple[str, date, time, str]:
        """Key under which duplicates are rejected"""
        return (self.trip_id, self.service_date, self.event_time, self.stop_id)

    @property
    def hour(self) -> int:
        return self.event_time.hour

    @property
    def weekday(self) -> int:
        """0 = Monday"""
        return self.service_date.weekday()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'route_id': self.route_id,
            'direction': self.direction.value,
            'variation_id': self.variation_id,
            'trip_id': self.trip_id,
            'stop_id': self.stop_id,
            'stop_name': self.stop_name,
            'service_date': self.service_date.isoformat(),
            'event_time': self.event_time.strftime("%H:%M:%S"),
            'boardings': self.boardings,
            'alightings': self.alightings,
            'load': self.load,
            'cum_distance': self.cum_distance,
            'global_seq': self.global_seq,
            'lat': self.lat,
            'lon': self.lon
        }


@dataclass(frozen=True)
class ServicePeriod:
    """A schedule period, e.g. one pick of weekday service"""
    label: str
    start_date: date
    end_date: date
    weekdays_only: bool = True

    def __post_init__(self):
        if self.start_date > self.end_date:
            raise ConfigError(
                f"service period {self.label!r}: start {self.start_date} after end {self.end_date}"
            )

    def contains(self, day: date) -> bool:
        if not (self.start_date <= day <= self.end_date):
            return False
        return not (self.weekdays_only and day.weekday() >= 5)


@dataclass(frozen=True)
class StopInfo:
    """Per-stop canonical location values and volume totals"""
    stop_id: str
    stop_name: str
    canonical_global_seq: int
    canonical_cum_distance: float
    canonical_lat: float
    canonical_lon: float
    total_boardings: int = 0
    total_alightings: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'stop_id': self.stop_id,
            'stop_name': self.stop_name,
            'global_seq': self.canonical_global_seq,
            'cum_distance': self.canonical_cum_distance,
            'lat': self.canonical_lat,
            'lon': self.canonical_lon,
            'total_boardings': self.total_boardings,
            'total_alightings': self.total_alightings
        }


def validate_event(raw: StopEvent) -> StopEvent:
    """
    Check the StopEvent field rules.

    Args:
        raw: Event to check

    Returns:
        The same event, unchanged

    Raises:
        RangeError: naming the first offending field
    """
    if raw.boardings < 0:
        raise RangeError("boardings", raw.boardings)
    if raw.alightings < 0:
        raise RangeError("alightings", raw.alightings)
    if not raw.cum_distance >= 0:
        raise RangeError("cum_distance", raw.cum_distance)
    if raw.global_seq < 1:
        raise RangeError("global_seq", raw.global_seq)
    if not -90.0 <= raw.lat <= 90.0:
        raise RangeError("lat", raw.lat)
    if not -180.0 <= raw.lon <= 180.0:
        raise RangeError("lon", raw.lon)
    return raw


def trip_flow_imbalance(events: Sequence[StopEvent]) -> int:
    """
    Net flow of one trip: total boardings minus total alightings.

    A negative value means more riders left the bus than ever boarded it,
    which is the counting artifact seen at crowded stops.
    """
    trip_ids = {e.trip_id for e in events}
    if len(trip_ids) > 1:
        raise MixedTripError(f"events span {len(trip_ids)} trips: {sorted(trip_ids)}")
    return sum(e.boardings for e in events) - sum(e.alightings for e in events)


def route_flow_imbalance(events: Iterable[StopEvent]) -> "OrderedDict[str, int]":
    """Per-trip net flow over a whole cohort, in first-appearance order"""
    by_trip: "OrderedDict[str, list]" = OrderedDict()
    for event in events:
        by_trip.setdefault(event.trip_id, []).append(event)
    return OrderedDict(
        (trip_id, trip_flow_imbalance(trip_events))
        for trip_id, trip_events in by_trip.items()
    )
