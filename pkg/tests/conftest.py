"""
Pytest configuration and shared fixtures
"""
import sys
from datetime import date, time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from stopprofiler.collectors.synthetic_collector import SynthConfig, generate
from stopprofiler.core.apc import Direction, StopEvent


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 100-seed acceptance sweeps (deselect with -m \"not slow\")")


# 2015-01-26 is a Monday
MONDAY = date(2015, 1, 26)


def build_event(**overrides) -> StopEvent:
    """A valid event; keyword arguments replace individual fields"""
    fields = dict(
        route_id="39",
        direction=Direction.INBOUND,
        variation_id="10",
        trip_id="T1",
        stop_id="A",
        stop_name="Stop A",
        service_date=MONDAY,
        event_time=time(7, 30, 0),
        boardings=1,
        alightings=0,
        load=1,
        cum_distance=100.0,
        global_seq=1,
        lat=43.1,
        lon=-77.6,
    )
    fields.update(overrides)
    return StopEvent(**fields)


@pytest.fixture
def make_event():
    """Event factory"""
    return build_event


@pytest.fixture
def small_cohort():
    """Two trips over three stops on one Monday and one Tuesday"""
    tuesday = date(2015, 1, 27)
    return [
        build_event(trip_id="T1", stop_id="A", global_seq=1, cum_distance=0.0,
                    event_time=time(7, 0, 0), boardings=5, alightings=0, lat=43.10, lon=-77.60),
        build_event(trip_id="T1", stop_id="B", global_seq=2, cum_distance=250.0,
                    event_time=time(7, 5, 0), boardings=3, alightings=2, lat=43.11, lon=-77.61),
        build_event(trip_id="T1", stop_id="C", global_seq=3, cum_distance=500.0,
                    event_time=time(7, 10, 0), boardings=0, alightings=6, lat=43.12, lon=-77.62),
        build_event(trip_id="T2", stop_id="A", global_seq=1, cum_distance=0.0, service_date=tuesday,
                    event_time=time(17, 0, 0), boardings=2, alightings=0, lat=43.10, lon=-77.60),
        build_event(trip_id="T2", stop_id="B", global_seq=2, cum_distance=250.0, service_date=tuesday,
                    event_time=time(17, 5, 0), boardings=4, alightings=1, lat=43.11, lon=-77.61),
        build_event(trip_id="T2", stop_id="C", global_seq=3, cum_distance=500.0, service_date=tuesday,
                    event_time=time(17, 10, 0), boardings=0, alightings=5, lat=43.12, lon=-77.62),
    ]


@pytest.fixture
def exact_synth():
    """Noise-free synthetic cohort whose proportions equal the archetypes"""
    config = SynthConfig(n_stops=12, n_weekdays=5, noise_scale=0.0, volume_log_sd=0.0,
                         seed=3, deterministic=True)
    return config, generate(config)


@pytest.fixture
def rng():
    """Seeded generator for property sweeps"""
    return np.random.default_rng(20150126)
