"""Seeded synthetic escalator days and multi-day series with known fixed loss.

Per operating minute ``t`` of a run starting at ``t0`` the energy is::

    F + A * exp(-(t - t0) / tau) +/- V(t) + noise

where ``V`` is the summed passenger load of all active waves (added for
upward escalators, subtracted for downward).  Every run restarts the warm-up
term.  Minutes in a saving interval read ``level + noise`` instead; minutes
outside the operating window or inside an off interval read exactly 0.

Intervals are inclusive minute ranges counted from the working-day boundary.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, replace
from datetime import date, timedelta
from typing import Any, NamedTuple

import numpy as np

from .data import DEFAULT_OFF_THRESHOLD_WH, MINUTES_PER_DAY, DailyProfile, Direction
from .errors import ConfigError

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
DEFAULT_START_DATE = date(2021, 1, 1)


@dataclass(frozen=True)
class Thermal:
    amplitude_wh: float = 0.0
    time_constant_min: float = 20.0


@dataclass(frozen=True)
class PassengerWave:
    start_min: int
    end_min: int
    mean_v_wh: float
    std_v_wh: float = 0.0
    occupancy: float = 1.0


@dataclass(frozen=True)
class SavingInterval:
    start_min: int
    end_min: int
    level_wh: float


@dataclass(frozen=True)
class OffInterval:
    start_min: int
    end_min: int


@dataclass(frozen=True)
class ScenarioConfig:
    direction: Direction
    f_true_wh: float
    operate_from: int = 90
    operate_to: int = 1260
    thermal: Thermal = field(default_factory=Thermal)
    passenger_waves: tuple[PassengerWave, ...] = ()
    saving_intervals: tuple[SavingInterval, ...] = ()
    off_intervals: tuple[OffInterval, ...] = ()
    noise_std_wh: float = 0.0
    seed: int = 0
    escalator_id: str = "SIM-1"
    day: date = DEFAULT_START_DATE

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "passenger_waves", tuple(self.passenger_waves))
        object.__setattr__(self, "saving_intervals", tuple(self.saving_intervals))
        object.__setattr__(self, "off_intervals", tuple(self.off_intervals))
        validate_scenario(self)


@dataclass(frozen=True)
class LevelShift:
    day: int
    new_f_true_wh: float


@dataclass(frozen=True)
class MaintenanceEvent:
    day: int
    post_level_wh: float


@dataclass(frozen=True)
class SeriesConfig:
    days: int
    base: ScenarioConfig
    shifts: tuple[LevelShift, ...] = ()
    maintenance_days: tuple[MaintenanceEvent, ...] = ()
    start_date: date = DEFAULT_START_DATE

    def __post_init__(self):
        object.__setattr__(self, "shifts", tuple(self.shifts))
        object.__setattr__(self, "maintenance_days", tuple(self.maintenance_days))
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        for ev in (*self.shifts, *self.maintenance_days):
            if not 0 <= ev.day < self.days:
                raise ConfigError(f"event day {ev.day} outside series of {self.days} days")


class SimulatedDay(NamedTuple):
    profile: DailyProfile
    f_true_wh: float
    n_clipped: int


class SimulatedSeries(NamedTuple):
    profiles: list[DailyProfile]
    truth: list[tuple[date, float]]
    maintenance: list[tuple[date, str]]
    n_clipped: int


def _check_interval(name: str, start: int, end: int, cfg: ScenarioConfig) -> None:
    if not start <= end:
        raise ConfigError(f"{name}: start {start} after end {end}")
    if start < cfg.operate_from or end > cfg.operate_to:
        raise ConfigError(f"{name} [{start}, {end}] outside operating window [{cfg.operate_from}, {cfg.operate_to}]")


def _check_disjoint(name: str, intervals) -> None:
    spans = sorted((iv.start_min, iv.end_min) for iv in intervals)
    for (_, e1), (s2, _) in zip(spans, spans[1:]):
        if s2 <= e1:
            raise ConfigError(f"overlapping {name}")


def validate_scenario(cfg: ScenarioConfig) -> None:
    if not cfg.f_true_wh > 0:
        raise ConfigError("f_true_wh must be positive")
    if not 0 <= cfg.operate_from <= cfg.operate_to < MINUTES_PER_DAY:
        raise ConfigError("operating window must satisfy 0 <= operate_from <= operate_to <= 1439")
    if cfg.operate_to - cfg.operate_from + 1 >= MINUTES_PER_DAY:
        raise ConfigError("operating window must leave at least one minute off")
    if cfg.thermal.amplitude_wh < 0 or not cfg.thermal.time_constant_min > 0:
        raise ConfigError("thermal amplitude must be >= 0 and time constant > 0")
    if cfg.noise_std_wh < 0:
        raise ConfigError("noise_std_wh must be non-negative")
    for w in cfg.passenger_waves:
        _check_interval("passenger wave", w.start_min, w.end_min, cfg)
        if w.mean_v_wh < 0 or w.std_v_wh < 0 or not 0 <= w.occupancy <= 1:
            raise ConfigError("passenger wave needs mean_v_wh >= 0, std_v_wh >= 0, occupancy in [0, 1]")
    for s in cfg.saving_intervals:
        _check_interval("saving interval", s.start_min, s.end_min, cfg)
        if not 0 < s.level_wh < cfg.f_true_wh:
            raise ConfigError(f"saving level {s.level_wh} must be in (0, f_true_wh={cfg.f_true_wh})")
    for o in cfg.off_intervals:
        _check_interval("off interval", o.start_min, o.end_min, cfg)
    _check_disjoint("saving intervals", cfg.saving_intervals)
    _check_disjoint("off intervals", cfg.off_intervals)


def derive_seed(base_seed: int, day_index: int) -> int:
    """64-bit FNV-1a over the two integers packed as little-endian uint64."""
    h = FNV_OFFSET
    for byte in struct.pack("<QQ", base_seed & _MASK64, day_index & _MASK64):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def _in(minutes: np.ndarray, start: int, end: int) -> np.ndarray:
    return (minutes >= start) & (minutes <= end)


def generate_day(config: ScenarioConfig, off_threshold_wh: float = DEFAULT_OFF_THRESHOLD_WH) -> SimulatedDay:
    rng = np.random.default_rng(config.seed)
    minutes = np.arange(MINUTES_PER_DAY)
    on = _in(minutes, config.operate_from, config.operate_to)
    for o in config.off_intervals:
        on &= ~_in(minutes, o.start_min, o.end_min)

    # minutes since the current run started
    run_start = np.where(on & ~np.concatenate(([False], on[:-1])), minutes, -1)
    run_start = np.maximum.accumulate(run_start)
    since_start = np.where(on, minutes - run_start, 0)

    th = config.thermal
    energy = config.f_true_wh + th.amplitude_wh * np.exp(-since_start / th.time_constant_min)
    load = np.zeros(MINUTES_PER_DAY)
    for w in config.passenger_waves:
        occupied = rng.random(MINUTES_PER_DAY) < w.occupancy
        v = np.maximum(rng.normal(w.mean_v_wh, w.std_v_wh, MINUTES_PER_DAY), 0.0)
        load += np.where(occupied & _in(minutes, w.start_min, w.end_min), v, 0.0)
    energy = energy + load if config.direction is Direction.UP else energy - load
    for s in config.saving_intervals:
        energy = np.where(_in(minutes, s.start_min, s.end_min), s.level_wh, energy)
    noise = rng.normal(0.0, config.noise_std_wh, MINUTES_PER_DAY) if config.noise_std_wh > 0 else 0.0
    energy = energy + noise
    n_clipped = int(np.count_nonzero(on & (energy < 0)))
    energy = np.where(on, np.maximum(energy, 0.0), 0.0)

    profile = DailyProfile.from_readings(
        config.escalator_id, config.day, config.direction, minutes, energy, off_threshold_wh
    )
    return SimulatedDay(profile, config.f_true_wh, n_clipped)


def _rescale_saving(base: ScenarioConfig, f_true: float) -> tuple[SavingInterval, ...]:
    ratio = f_true / base.f_true_wh
    return tuple(replace(s, level_wh=s.level_wh * ratio) for s in base.saving_intervals)


def generate_series(config: SeriesConfig, off_threshold_wh: float = DEFAULT_OFF_THRESHOLD_WH) -> SimulatedSeries:
    """Generate ``config.days`` consecutive days.

    The true fixed loss follows the base value, replaced from each shift or
    maintenance day onward.  Saving levels keep their ratio to the fixed
    loss.  Day ``i`` uses seed :func:`derive_seed` (base seed, i).
    """
    changes = sorted(
        [(s.day, s.new_f_true_wh, None) for s in config.shifts]
        + [(m.day, m.post_level_wh, f"maintenance: post level {m.post_level_wh:g} Wh") for m in config.maintenance_days],
        key=lambda c: c[0],
    )
    base = config.base
    profiles, truth, events = [], [], []
    f_true = base.f_true_wh
    n_clipped = 0
    ci = 0
    for i in range(config.days):
        while ci < len(changes) and changes[ci][0] == i:
            f_true = changes[ci][1]
            if changes[ci][2]:
                events.append((config.start_date + timedelta(days=i), changes[ci][2]))
            ci += 1
        day = config.start_date + timedelta(days=i)
        cfg = replace(
            base, f_true_wh=f_true, saving_intervals=_rescale_saving(base, f_true), seed=derive_seed(base.seed, i), day=day
        )
        sim = generate_day(cfg, off_threshold_wh)
        profiles.append(sim.profile)
        truth.append((day, f_true))
        n_clipped += sim.n_clipped
    return SimulatedSeries(profiles, truth, events, n_clipped)


def scenario_presets() -> dict[str, ScenarioConfig]:
    """Four named scenarios.

    Each runs 05:30 to 01:00 (minutes 90 to 1260) with noise 0.3 Wh.

    busy-last-hour
        Upward, F = 45 Wh.  Morning, noon and evening passenger waves plus
        scattered use, and a wave covering the whole final operating hour.
    energy-saving
        Downward, F = 48 Wh.  Slow-running intervals at 30 Wh in the evening lull
        and over the last 75 minutes of service.
    multi-startup
        Downward, F = 55 Wh.  Two one-hour stops split the day into three
        runs; each restart repeats a 10 Wh warm-up decaying with a 25 min
        time constant.  Passengers stay until closing.
    maintenance
        Upward, F = 60 Wh.  Between minutes 600 and 719 the escalator is
        toggled: 5 minutes off, 10 minutes on at a 52 Wh inspection level.
        Passengers stay until closing.
    """
    scattered_up = PassengerWave(90, 1260, mean_v_wh=6.0, std_v_wh=3.0, occupancy=0.15)
    rush = (
        PassengerWave(180, 330, mean_v_wh=12.0, std_v_wh=5.0, occupancy=0.9),
        PassengerWave(480, 600, mean_v_wh=8.0, std_v_wh=4.0, occupancy=0.5),
        PassengerWave(780, 960, mean_v_wh=12.0, std_v_wh=5.0, occupancy=0.9),
    )
    last_hour = PassengerWave(1201, 1260, mean_v_wh=8.0, std_v_wh=3.0, occupancy=0.95)
    thermal = Thermal(amplitude_wh=6.0, time_constant_min=15.0)

    toggles_off = tuple(OffInterval(s, s + 4) for s in range(600, 720, 15))
    toggles_on = tuple(SavingInterval(s + 5, s + 14, 52.0) for s in range(600, 720, 15))

    return {
        "busy-last-hour": ScenarioConfig(
            Direction.UP, 45.0, thermal=thermal, passenger_waves=(*rush, scattered_up, last_hour), noise_std_wh=0.3
        ),
        "energy-saving": ScenarioConfig(
            Direction.DOWN,
            48.0,
            thermal=thermal,
            passenger_waves=rush,
            saving_intervals=(SavingInterval(1000, 1040, 30.0), SavingInterval(1186, 1260, 30.0)),
            noise_std_wh=0.3,
        ),
        "multi-startup": ScenarioConfig(
            Direction.DOWN,
            55.0,
            thermal=Thermal(amplitude_wh=10.0, time_constant_min=25.0),
            passenger_waves=(*rush, last_hour),
            off_intervals=(OffInterval(540, 599), OffInterval(900, 959)),
            noise_std_wh=0.3,
        ),
        "maintenance": ScenarioConfig(
            Direction.UP,
            60.0,
            thermal=thermal,
            passenger_waves=(*rush, last_hour),
            saving_intervals=toggles_on,
            off_intervals=toggles_off,
            noise_std_wh=0.3,
        ),
    }


# JSON (de)serialisation -------------------------------------------------------


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    d = asdict(cfg)
    d["direction"] = cfg.direction.value
    d["day"] = cfg.day.isoformat()
    return d


def scenario_from_dict(d: dict[str, Any]) -> ScenarioConfig:
    try:
        d = dict(d)
        if "day" in d:
            d["day"] = date.fromisoformat(d["day"])
        d["direction"] = Direction.parse(d["direction"])
        d["thermal"] = Thermal(**d.get("thermal", {}))
        d["passenger_waves"] = tuple(PassengerWave(**w) for w in d.get("passenger_waves", ()))
        d["saving_intervals"] = tuple(SavingInterval(**s) for s in d.get("saving_intervals", ()))
        d["off_intervals"] = tuple(OffInterval(**o) for o in d.get("off_intervals", ()))
        return ScenarioConfig(**d)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None


def series_to_dict(cfg: SeriesConfig) -> dict[str, Any]:
    return {
        "days": cfg.days,
        "start_date": cfg.start_date.isoformat(),
        "scenario": scenario_to_dict(cfg.base),
        "shifts": [asdict(s) for s in cfg.shifts],
        "maintenance_days": [asdict(m) for m in cfg.maintenance_days],
    }


def series_from_dict(d: dict[str, Any], days: int | None = None) -> SeriesConfig:
    """Accepts either a series document or a bare scenario document."""
    try:
        if "scenario" in d:
            base = d["scenario"]
            base = scenario_presets()[base] if isinstance(base, str) else scenario_from_dict(base)
        else:
            base = scenario_from_dict(d)
        n = days if days is not None else int(d.get("days", 1))
        start = date.fromisoformat(d["start_date"]) if "start_date" in d else base.day
        return SeriesConfig(
            n,
            base,
            shifts=tuple(LevelShift(**s) for s in d.get("shifts", ())),
            maintenance_days=tuple(MaintenanceEvent(**m) for m in d.get("maintenance_days", ())),
            start_date=start,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid series config: {exc}") from None


def load_series_config(text: str, days: int | None = None) -> SeriesConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid scenario JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("scenario JSON must be an object")
    return series_from_dict(doc, days)
