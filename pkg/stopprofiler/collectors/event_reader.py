"""
APC Event Reader

Reads doors-open events from the delimited event format and narrows them to
an analysis cohort (route, direction, service period, route variations).

File format: UTF-8 CSV with a header row and the columns of DEFAULT_SCHEMA.
Direction is "I"/"O", service_date is YYYY-MM-DD, event_time is HH:MM:SS in
local civil time. Files ending in ".gz" are read through gzip.
"""

import gzip
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import (Any, BinaryIO, Callable, Dict, FrozenSet, Iterable, List,
                    Optional, Sequence, Tuple, Union)

import pandas as pd

from stopprofiler.collectors.base_collector import BaseCollector
from stopprofiler.core.apc import (Direction, ServicePeriod, StopEvent,
                                   validate_event)
from stopprofiler.core.errors import (DuplicateEventError, ParseError,
                                      RangeError)
from stopprofiler.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class EventSchema:
    """Column layout of an event file"""
    columns: Tuple[str, ...]
    float_format: str = "%.12g"


DEFAULT_SCHEMA = EventSchema(columns=(
    "route_id", "direction", "variation_id", "trip_id", "stop_id", "stop_name",
    "service_date", "event_time", "boardings", "alightings", "load",
    "cum_distance", "global_seq", "lat", "lon",
))


@dataclass(frozen=True)
class FilterCriteria:
    """Cohort selection; unset fields do not filter"""
    route_id: Optional[str] = None
    direction: Optional[Direction] = None
    period: Optional[ServicePeriod] = None
    variation_ids: Optional[FrozenSet[str]] = None

    @property
    def is_identity(self) -> bool:
        return (self.route_id is None and self.direction is None
                and self.period is None and self.variation_ids is None)

    def matches(self, event: StopEvent) -> bool:
        if self.route_id is not None and event.route_id != self.route_id:
            return False
        if self.direction is not None and event.direction is not self.direction:
            return False
        if self.period is not None and not self.period.contains(event.service_date):
            return False
        if self.variation_ids is not None and event.variation_id not in self.variation_ids:
            return False
        return True


def _decode(line: int, column: str, raw: str, convert: Callable[[str], Any]) -> Any:
    try:
        return convert(raw)
    except (TypeError, ValueError) as e:
        raise ParseError(line, column, f"cannot decode {raw!r}") from e


def _text(value: str) -> str:
    if value == "":
        raise ValueError("empty")
    return value


def _decode_row(values: Dict[str, str], line: int) -> StopEvent:
    """Bind one row's raw strings to a StopEvent"""
    d = lambda column, convert: _decode(line, column, values[column], convert)
    return StopEvent(
        route_id=d("route_id", _text),
        direction=d("direction", Direction.parse),
        variation_id=values["variation_id"],
        trip_id=d("trip_id", _text),
        stop_id=d("stop_id", _text),
        stop_name=values["stop_name"],
        service_date=d("service_date", BaseCollector._parse_date),
        event_time=d("event_time", BaseCollector._parse_time),
        boardings=d("boardings", int),
        alightings=d("alightings", int),
        load=d("load", int),
        cum_distance=d("cum_distance", float),
        global_seq=d("global_seq", int),
        lat=d("lat", float),
        lon=d("lon", float),
    )


def parse_events(stream: BinaryIO, schema: EventSchema = DEFAULT_SCHEMA) -> List[StopEvent]:
    """
    Parse an event file.

    Args:
        stream: Binary stream of UTF-8 CSV text
        schema: Column layout

    Returns:
        Validated events in row order

    Raises:
        ParseError: malformed row (1-based line number, column name)
        RangeError: a decoded value violates the event field rules
        DuplicateEventError: a repeated (trip_id, service_date, event_time, stop_id)
    """
    # the header is read as a row so every line must match its field count
    try:
        frame = pd.read_csv(stream, header=None, index_col=False, dtype=str, keep_default_na=False,
                            skip_blank_lines=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise ParseError(1, "header", "missing header row") from e
    except UnicodeDecodeError as e:
        raise ParseError(1, "header", f"not UTF-8: {e}") from e
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        raise ParseError(int(found.group(1)) if found else 1, "row", str(e)) from e

    header, frame = frame.iloc[0], frame.iloc[1:]
    frame.columns = [str(c).strip() for c in header]
    missing = [c for c in schema.columns if c not in frame.columns]
    if missing:
        raise ParseError(1, missing[0], "missing column")

    events: List[StopEvent] = []
    seen: Dict[Tuple, int] = {}
    rows = frame[list(schema.columns)].itertuples(index=False, name=None)
    for offset, row in enumerate(rows):
        line = offset + 2  # header is line 1
        values = {c: (v.strip() if isinstance(v, str) else "") for c, v in zip(schema.columns, row)}
        if not any(values.values()):
            continue

        event = _decode_row(values, line)
        try:
            validate_event(event)
        except RangeError as e:
            raise e.at_line(line)

        if event.identity in seen:
            raise DuplicateEventError(line, event.identity)
        seen[event.identity] = line
        events.append(event)

    logger.debug(f"parsed {len(events)} events")
    return events


def read_events(path: Union[str, Path], schema: EventSchema = DEFAULT_SCHEMA) -> List[StopEvent]:
    """Parse an event file from disk; ".gz" files are decompressed"""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as stream:
        events = parse_events(stream, schema)
    logger.info(f"read {len(events)} events from {path}")
    return events


def filter_events(events: Iterable[StopEvent], criteria: FilterCriteria) -> List[StopEvent]:
    """Keep the events matching every set criterion, in input order"""
    events = list(events)
    if criteria.is_identity:
        return events
    return [e for e in events if criteria.matches(e)]


def events_to_frame(events: Sequence[StopEvent]) -> pd.DataFrame:
    """Events as a DataFrame with derived `hour` and `weekday` (0 = Monday) columns"""
    frame = pd.DataFrame(
        [e.to_dict() for e in events],
        columns=list(DEFAULT_SCHEMA.columns)
    )
    frame["hour"] = pd.Series([e.hour for e in events], dtype="int64")
    frame["weekday"] = pd.Series([e.weekday for e in events], dtype="int64")
    for column in ("boardings", "alightings", "load", "global_seq"):
        frame[column] = frame[column].astype("int64")
    return frame


def write_events(events: Sequence[StopEvent], target: Union[str, Path, io.IOBase],
                 schema: EventSchema = DEFAULT_SCHEMA) -> None:
    """Write events in the file format parse_events reads"""
    frame = pd.DataFrame([e.to_dict() for e in events], columns=list(schema.columns))
    compression: Any = "infer"
    if isinstance(target, (str, Path)) and str(target).endswith(".gz"):
        compression = {"method": "gzip", "mtime": 0}
    frame.to_csv(target, index=False, lineterminator="\n",
                 float_format=schema.float_format, compression=compression)


class EventFileCollector(BaseCollector):
    """Events from one file, narrowed to a cohort"""

    def __init__(self, path: Union[str, Path], criteria: Optional[FilterCriteria] = None,
                 config: Optional[Dict[str, Any]] = None):
        super().__init__(config)
        self.path = Path(path)
        self.criteria = criteria or FilterCriteria()

    def collect(self) -> List[StopEvent]:
        events = read_events(self.path)
        cohort = filter_events(events, self.criteria)
        logger.info(f"cohort keeps {len(cohort)} of {len(events)} events")
        self._log_collected(cohort)
        return cohort
