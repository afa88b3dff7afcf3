# Base Collector Module

from abc import ABC, abstractmethod
from datetime import date, datetime, time
from typing import Any, Dict, List, Optional

from stopprofiler.core.apc import StopEvent
from stopprofiler.utils.logger import get_logger

logger = get_logger(__name__)


class BaseCollector(ABC):
    """Source of StopEvents (event files, the synthetic generator)"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Args:
            config: Collector configuration
        """
        self.config = config or {}
        self.name = self.config.get("name", type(self).__name__)

    @abstractmethod
    def collect(self) -> List[StopEvent]:
        """
        Produce the events of this source.

        Returns:
            Events in source order
        """
        pass

    @staticmethod
    def _parse_date(date_str: str) -> date:
        """Strict YYYY-MM-DD"""
        return datetime.strptime(date_str.strip(), "%Y-%m-%d").date()

    @staticmethod
    def _parse_time(time_str: str) -> time:
        """Strict HH:MM:SS, 24h, below 24:00:00"""
        return datetime.strptime(time_str.strip(), "%H:%M:%S").time()

    def _log_collected(self, events: List[StopEvent]) -> None:
        stops = len({e.stop_id for e in events})
        trips = len({e.trip_id for e in events})
        logger.info(f"{self.name}: {len(events)} events, {stops} stops, {trips} trips")
