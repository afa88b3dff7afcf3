"""
Synthetic generator tests
"""
from datetime import date

import numpy as np
import pandas as pd
import pytest

from stopprofiler.analyzers.profile_builder import (Measure,
                                                    stop_diurnal_profiles,
                                                    to_proportions)
from stopprofiler.collectors.event_reader import read_events
from stopprofiler.collectors.synthetic_collector import (SynthConfig,
                                                         SyntheticCollector,
                                                         builtin_archetypes,
                                                         generate)
from stopprofiler.core.apc import validate_event
from stopprofiler.core.errors import ConfigError


class TestArchetypes:
    """builtin_archetypes"""

    def test_valid_proportions(self):
        """Four nonnegative 24-hour shapes summing to 1"""
        archetypes = builtin_archetypes()
        assert [name for name, _ in archetypes] == ["MorningPeak", "EveningPeak", "TwoPeak", "EarlyPlusLate"]
        for _, proportions in archetypes:
            assert proportions.shape == (24,)
            assert proportions.min() >= 0
            assert abs(proportions.sum() - 1) <= 1e-12

    def test_shapes(self):
        """Peaks sit where the names say"""
        shapes = dict(builtin_archetypes())
        assert 6 <= int(np.argmax(shapes["MorningPeak"])) <= 9
        assert 16 <= int(np.argmax(shapes["EveningPeak"])) <= 18
        two = shapes["TwoPeak"]
        morning = int(np.argmax(two[:12]))
        evening = 12 + int(np.argmax(two[12:]))
        assert evening - morning >= 6
        late = shapes["EarlyPlusLate"]
        assert int(np.argmax(late)) <= 7
        assert late[13:23].min() > 0

    def test_no_night_service(self):
        """Hours 0-4 are empty for every shape"""
        for _, proportions in builtin_archetypes():
            assert not proportions[:5].any()


class TestSynthConfig:
    """SynthConfig"""

    @pytest.mark.parametrize("overrides", [
        {"n_stops": 0},
        {"n_weekdays": 0},
        {"mixture_weights": (1.0, 1.0)},
        {"mixture_weights": (1.0, 0.0, 1.0, 1.0)},
        {"volume_log_sd": -0.1},
        {"noise_scale": -1.0},
        {"archetypes": (("Flat", np.full(24, 0.05)),), "mixture_weights": (1.0,)},
    ])
    def test_invalid(self, overrides):
        """Violations raise ConfigError"""
        with pytest.raises(ConfigError):
            SynthConfig(**overrides)

    def test_from_dict(self):
        """Archetypes are named; weights default to uniform"""
        config = SynthConfig.from_dict({"n_stops": "12", "archetypes": ["TwoPeak", "MorningPeak"],
                                        "start_date": "2015-03-02", "noise_scale": 0})
        assert config.n_stops == 12
        assert [name for name, _ in config.archetypes] == ["TwoPeak", "MorningPeak"]
        assert config.mixture_weights == (1.0, 1.0)
        assert config.start_date == date(2015, 3, 2)
        assert config.to_dict()["archetypes"] == ["TwoPeak", "MorningPeak"]

    def test_unknown_archetype(self):
        """Only builtin names resolve"""
        with pytest.raises(ConfigError):
            SynthConfig.from_dict({"archetypes": ["Midday"]})


class TestGenerate:
    """generate"""

    def test_deterministic_given_seed(self):
        """Same config, same events and ground truth"""
        config = SynthConfig(n_stops=8, n_weekdays=3, seed=42)
        first, second = generate(config), generate(config)
        assert first.events == second.events
        assert first.ground_truth == second.ground_truth

    def test_seed_changes_output(self):
        """Different seeds give different cohorts"""
        a = generate(SynthConfig(n_stops=8, n_weekdays=3, seed=1))
        b = generate(SynthConfig(n_stops=8, n_weekdays=3, seed=2))
        assert a.events != b.events

    def test_events_validate(self):
        """Every generated event passes validation"""
        output = generate(SynthConfig(n_stops=10, n_weekdays=5, seed=9))
        for event in output.events:
            assert validate_event(event) == event

    def test_weekdays_and_shape(self):
        """Service runs on consecutive weekdays, one trip per date and hour"""
        output = generate(SynthConfig(n_stops=6, n_weekdays=7, seed=0))
        dates = sorted({e.service_date for e in output.events})
        assert len(dates) == 7
        assert all(d.weekday() < 5 for d in dates)
        assert dates[0] == date(2015, 1, 26)
        assert len(output.ground_truth) == 6
        assert list(output.ground_truth) == [f"S{i:04d}" for i in range(1, 7)]
        trip = [e for e in output.events if e.trip_id == "39-20150126-07"]
        assert [e.global_seq for e in trip] == sorted(e.global_seq for e in trip)
        assert all(e.event_time.hour == 7 for e in trip)

    def test_unique_identity(self):
        """(trip, date, time, stop) never repeats"""
        output = generate(SynthConfig(n_stops=30, n_weekdays=2, seed=4))
        keys = {(e.trip_id, e.service_date, e.event_time, e.stop_id) for e in output.events}
        assert len(keys) == len(output.events)

    def test_exact_inversion(self, exact_synth):
        """Noise-free counts give back the planted proportions"""
        config, output = exact_synth
        shapes = dict(config.archetypes)
        profiles = stop_diurnal_profiles(output.events, Measure.BOARDINGS)
        assert set(profiles) == set(output.ground_truth)
        for stop_id, archetype in output.ground_truth.items():
            recovered = to_proportions(profiles[stop_id]).proportions
            np.testing.assert_allclose(recovered, shapes[archetype], rtol=0, atol=1e-9)

    def test_alightings_reverse(self, exact_synth):
        """Alighting curves are the archetype read backwards"""
        config, output = exact_synth
        shapes = dict(config.archetypes)
        profiles = stop_diurnal_profiles(output.events, Measure.ALIGHTINGS)
        stop_id, archetype = next(iter(output.ground_truth.items()))
        recovered = to_proportions(profiles[stop_id]).proportions
        np.testing.assert_allclose(recovered, shapes[archetype][::-1], rtol=0, atol=1e-9)

    def test_volume_spread(self):
        """Log volumes follow the configured mean"""
        output = generate(SynthConfig(n_stops=200, n_weekdays=2, noise_scale=0.0, seed=5))
        profiles = stop_diurnal_profiles(output.events, Measure.BOARDINGS)
        totals = np.array([p.total for p in profiles.values() if p.total > 0])
        assert abs(np.median(np.log(totals)) - 6.5) < 0.5

    def test_write(self, tmp_path):
        """events.csv parses back; ground_truth.csv has stop_id, archetype"""
        output = generate(SynthConfig(n_stops=5, n_weekdays=2, seed=8))
        paths = output.write(tmp_path / "synth")
        assert read_events(paths["events"]) == list(output.events)
        truth = pd.read_csv(paths["ground_truth"], dtype=str)
        assert list(truth.columns) == ["stop_id", "archetype"]
        assert dict(zip(truth["stop_id"], truth["archetype"])) == dict(output.ground_truth)


class TestSyntheticCollector:
    """SyntheticCollector"""

    def test_collect(self):
        """collect() returns the events and keeps the output"""
        collector = SyntheticCollector(SynthConfig(n_stops=4, n_weekdays=2, seed=1))
        events = collector.collect()
        assert events == list(collector.output.events)

    def test_from_config_section(self):
        """A plain config dict builds the generator"""
        collector = SyntheticCollector(config={"n_stops": 3, "n_weekdays": 1, "seed": 2})
        assert collector.synth_config.n_stops == 3
        assert len(collector.collect()) > 0
