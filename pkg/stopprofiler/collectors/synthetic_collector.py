"""
Synthetic Collector

Generates APC events with planted diurnal archetypes and log-normal stop
volumes, so clustering can be scored against known structure.

Randomness:
    One numpy Generator seeded with `seed` draws, in order, every stop's
    archetype and then every stop's log volume. Hourly noise and counts come
    from per-stop Generators spawned from SeedSequence(seed), stop i using
    child i. Changing n_weekdays therefore leaves archetypes and volumes
    untouched.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import date, time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from stopprofiler.collectors.base_collector import BaseCollector
from stopprofiler.collectors.event_reader import write_events
from stopprofiler.core.apc import Direction, StopEvent
from stopprofiler.core.errors import ConfigError
from stopprofiler.utils.logger import get_logger

logger = get_logger(__name__)

HOURS = 24
PROPORTION_TOLERANCE = 1e-9
STOP_SPACING_M = 250.0
ORIGIN_LAT, ORIGIN_LON = 43.10, -77.70
STEP_LAT, STEP_LON = 0.0015, 0.0020
JITTER_DEG = 1e-4

# per-mille weights; hours 0-4 carry no service
_ARCHETYPE_WEIGHTS = OrderedDict([
    ("MorningPeak", [0, 0, 0, 0, 0, 40, 110, 200, 150, 80, 50, 40,
                     40, 40, 40, 40, 35, 30, 25, 20, 20, 15, 15, 10]),
    ("EveningPeak", [0, 0, 0, 0, 0, 10, 15, 20, 25, 30, 35, 40,
                     45, 50, 60, 90, 150, 200, 110, 50, 30, 20, 15, 5]),
    ("TwoPeak", [0, 0, 0, 0, 0, 20, 70, 150, 100, 50, 35, 30,
                 30, 30, 35, 60, 110, 150, 70, 30, 15, 10, 5, 0]),
    ("EarlyPlusLate", [0, 0, 0, 0, 0, 60, 160, 90, 40, 25, 25, 30,
                       40, 50, 50, 50, 50, 50, 50, 50, 50, 50, 50, 30]),
])


def builtin_archetypes() -> List[Tuple[str, np.ndarray]]:
    """The four planted shapes as (name, 24 proportions)"""
    return [(name, np.asarray(weights, dtype=float) / 1000.0)
            for name, weights in _ARCHETYPE_WEIGHTS.items()]


@dataclass(frozen=True, eq=False)
class SynthConfig:
    """Generator parameters; archetypes are (name, 24 proportions) pairs"""
    n_stops: int = 40
    archetypes: Tuple = field(default_factory=lambda: tuple(builtin_archetypes()))
    mixture_weights: Tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    volume_log_mean: float = 6.5
    volume_log_sd: float = 1.0
    noise_scale: float = 0.1
    n_weekdays: int = 45
    seed: int = 0
    route_id: str = "39"
    variation_id: str = "10"
    direction: Direction = Direction.INBOUND
    start_date: date = date(2015, 1, 26)
    deterministic: bool = False

    def __post_init__(self):
        if self.n_stops < 1:
            raise ConfigError(f"n_stops must be positive, got {self.n_stops}")
        if self.n_weekdays < 1:
            raise ConfigError(f"n_weekdays must be positive, got {self.n_weekdays}")
        if not self.archetypes:
            raise ConfigError("at least one archetype is required")
        for name, proportions in self.archetypes:
            values = np.asarray(proportions, dtype=float)
            if values.shape != (HOURS,) or np.any(values < 0):
                raise ConfigError(f"archetype {name}: need {HOURS} nonnegative proportions")
            if abs(values.sum() - 1.0) > PROPORTION_TOLERANCE:
                raise ConfigError(f"archetype {name}: proportions sum to {values.sum()}")
        if len(self.mixture_weights) != len(self.archetypes):
            raise ConfigError(
                f"{len(self.mixture_weights)} mixture weights for {len(self.archetypes)} archetypes"
            )
        if any(not w > 0 for w in self.mixture_weights):
            raise ConfigError(f"mixture weights must be positive: {list(self.mixture_weights)}")
        if not self.volume_log_sd >= 0:
            raise ConfigError(f"volume_log_sd must be nonnegative, got {self.volume_log_sd}")
        if not self.noise_scale >= 0:
            raise ConfigError(f"noise_scale must be nonnegative, got {self.noise_scale}")

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "SynthConfig":
        """
        Build from a config section. `archetypes` there is a list of builtin
        names; unknown keys are ignored.
        """
        values = dict(values)
        kwargs: Dict[str, Any] = {}
        builtins = dict(builtin_archetypes())
        if "archetypes" in values:
            names = values.pop("archetypes")
            unknown = [n for n in names if n not in builtins]
            if unknown:
                raise ConfigError(f"unknown archetype(s): {unknown}; known: {list(builtins)}")
            kwargs["archetypes"] = tuple((n, builtins[n]) for n in names)
        if "mixture_weights" in values:
            kwargs["mixture_weights"] = tuple(float(w) for w in values.pop("mixture_weights"))
        elif "archetypes" in kwargs:
            kwargs["mixture_weights"] = tuple(1.0 for _ in kwargs["archetypes"])
        if "direction" in values:
            kwargs["direction"] = Direction.parse(str(values.pop("direction")))
        if "start_date" in values:
            start = values.pop("start_date")
            kwargs["start_date"] = start if isinstance(start, date) else BaseCollector._parse_date(str(start))

        casts = {"n_stops": int, "n_weekdays": int, "seed": int, "volume_log_mean": float,
                 "volume_log_sd": float, "noise_scale": float, "route_id": str,
                 "variation_id": str, "deterministic": bool}
        for key, cast in casts.items():
            if values.get(key) is not None:
                kwargs[key] = cast(values[key])
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_stops': self.n_stops,
            'archetypes': [name for name, _ in self.archetypes],
            'mixture_weights': list(self.mixture_weights),
            'volume_log_mean': self.volume_log_mean,
            'volume_log_sd': self.volume_log_sd,
            'noise_scale': self.noise_scale,
            'n_weekdays': self.n_weekdays,
            'seed': self.seed,
            'route_id': self.route_id,
            'variation_id': self.variation_id,
            'direction': self.direction.value,
            'start_date': self.start_date.isoformat(),
            'deterministic': self.deterministic
        }


@dataclass(frozen=True, eq=False)
class SynthOutput:
    events: Tuple[StopEvent, ...]
    ground_truth: "OrderedDict[str, str]"

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """Write events.csv and ground_truth.csv into out_dir"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"events": out_dir / "events.csv", "ground_truth": out_dir / "ground_truth.csv"}
        write_events(self.events, paths["events"])
        truth = pd.DataFrame({"stop_id": list(self.ground_truth.keys()),
                              "archetype": list(self.ground_truth.values())})
        truth.to_csv(paths["ground_truth"], index=False, lineterminator="\n")
        return paths


def _service_dates(start: date, n_weekdays: int) -> List[date]:
    return [d.date() for d in pd.bdate_range(start=start, periods=n_weekdays)]


def _stop_volume(log_volume: float, config: SynthConfig) -> float:
    volume = float(np.exp(log_volume))
    if not config.deterministic:
        return volume
    # whole per-mille counts every day, so recovered proportions are exact
    unit = config.n_weekdays * 1000.0
    return max(1.0, round(volume / unit)) * unit


def _hourly_counts(volume: float, proportions: np.ndarray, config: SynthConfig,
                   rng: np.random.Generator) -> np.ndarray:
    """n_weekdays x 24 counts for one stop and one measure"""
    base = volume * proportions / config.n_weekdays
    if config.deterministic:
        return np.rint(np.tile(base, (config.n_weekdays, 1))).astype(np.int64)
    eps = rng.standard_normal((config.n_weekdays, HOURS))
    mean = np.maximum(base * (1.0 + config.noise_scale * eps), 0.0)
    return rng.poisson(mean).astype(np.int64)


def generate(config: SynthConfig) -> SynthOutput:
    """
    Draw a synthetic cohort.

    Every stop gets an archetype (by mixture weight) and a volume
    V = exp(Normal(volume_log_mean, volume_log_sd)). Boardings for day d and
    hour h are Poisson with mean V * p_h * (1 + noise_scale * eps) / n_weekdays,
    clamped at 0; alightings use the archetype reversed in time. One event is
    emitted per (stop, day, hour) where the archetype or its reverse is
    positive at that hour, whatever the noisy mean and the drawn counts; such
    events may carry zero boardings and zero alightings.

    With deterministic=True counts are the rounded means (eps = 0) and V is
    snapped to a whole multiple of n_weekdays * 1000, so builtin archetypes
    are recovered exactly from the counts.
    """
    rng = np.random.default_rng(config.seed)
    weights = np.asarray(config.mixture_weights, dtype=float)
    choices = rng.choice(len(config.archetypes), size=config.n_stops, p=weights / weights.sum())
    log_volumes = rng.normal(config.volume_log_mean, config.volume_log_sd, size=config.n_stops)
    stop_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(config.n_stops)]

    dates = _service_dates(config.start_date, config.n_weekdays)
    step = min(20, 3599 // config.n_stops)
    boardings = np.zeros((config.n_stops, config.n_weekdays, HOURS), dtype=np.int64)
    alightings = np.zeros_like(boardings)
    active = np.zeros((config.n_stops, HOURS), dtype=bool)
    lat = np.zeros(config.n_stops)
    lon = np.zeros(config.n_stops)
    truth: "OrderedDict[str, str]" = OrderedDict()

    for i in range(config.n_stops):
        name, proportions = config.archetypes[choices[i]]
        proportions = np.asarray(proportions, dtype=float)
        volume = _stop_volume(log_volumes[i], config)
        srng = stop_rngs[i]
        boardings[i] = _hourly_counts(volume, proportions, config, srng)
        alightings[i] = _hourly_counts(volume, proportions[::-1], config, srng)
        active[i] = (proportions > 0) | (proportions[::-1] > 0)
        jitter = srng.uniform(-JITTER_DEG, JITTER_DEG, size=2)
        lat[i] = round(ORIGIN_LAT + (i + 1) * STEP_LAT + jitter[0], 6)
        lon[i] = round(ORIGIN_LON + (i + 1) * STEP_LON + jitter[1], 6)
        truth[f"S{i + 1:04d}"] = name

    events: List[StopEvent] = []
    for d, service_date in enumerate(dates):
        for hour in range(HOURS):
            trip_id = f"{config.route_id}-{service_date:%Y%m%d}-{hour:02d}"
            load = 0
            for i in range(config.n_stops):
                if not active[i, hour]:
                    continue
                seq = i + 1
                b = int(boardings[i, d, hour])
                a = int(alightings[i, d, hour])
                load += b - a
                minute, second = divmod((seq - 1) * step, 60)
                events.append(StopEvent(
                    route_id=config.route_id,
                    direction=config.direction,
                    variation_id=config.variation_id,
                    trip_id=trip_id,
                    stop_id=f"S{seq:04d}",
                    stop_name=f"Stop {seq}",
                    service_date=service_date,
                    event_time=time(hour, minute, second),
                    boardings=b,
                    alightings=a,
                    load=load,
                    cum_distance=seq * STOP_SPACING_M,
                    global_seq=seq,
                    lat=float(lat[i]),
                    lon=float(lon[i])
                ))

    logger.info(f"generated {len(events)} events for {config.n_stops} stops over {len(dates)} weekdays")
    return SynthOutput(events=tuple(events), ground_truth=truth)


class SyntheticCollector(BaseCollector):
    """Synthetic events in place of an event file"""

    def __init__(self, synth_config: Optional[SynthConfig] = None,
                 config: Optional[Dict[str, Any]] = None):
        super().__init__(config)
        self.synth_config = synth_config or SynthConfig.from_dict(self.config)
        self.output: Optional[SynthOutput] = None

    def collect(self) -> List[StopEvent]:
        self.output = generate(self.synth_config)
        events = list(self.output.events)
        self._log_collected(events)
        return events
