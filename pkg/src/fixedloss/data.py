"""Minute-level energy readings grouped into working days.

A working day runs from the day boundary (04:00 by default) to the same
clock time on the following calendar day.  Minute indices count from the
boundary, so ``minute_index`` 0 is 04:00 and 1439 is 03:59 the next morning.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from enum import Enum
from typing import IO, Iterable, NamedTuple

import numpy as np

from .errors import ParseError, ValidationError

MINUTES_PER_DAY = 1440
DEFAULT_DAY_BOUNDARY = time(4, 0)
DEFAULT_OFF_THRESHOLD_WH = 1.0
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"
CSV_HEADER = ("escalator_id", "timestamp", "direction", "energy_wh")


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"

    @classmethod
    def parse(cls, value: str) -> "Direction":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"direction must be 'up' or 'down', got {value!r}") from None


class EnergySample(NamedTuple):
    minute_index: int
    energy_wh: float


@dataclass(frozen=True)
class OperatingRun:
    start_minute: int
    end_minute: int

    @property
    def length(self) -> int:
        return self.end_minute - self.start_minute + 1


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DailyProfile:
    """One working day of readings for one escalator.

    Arrays are stored read-only; use :meth:`with_mask` or
    :func:`detect_operating_mask` to derive a profile with a new mask.
    """

    escalator_id: str
    day: date
    direction: Direction
    minutes: np.ndarray
    energy_wh: np.ndarray
    operating_mask: np.ndarray

    def __post_init__(self):
        minutes = np.asarray(self.minutes, dtype=np.int64)
        energy = np.asarray(self.energy_wh, dtype=np.float64)
        mask = np.asarray(self.operating_mask, dtype=bool)
        if not (minutes.shape == energy.shape == mask.shape) or minutes.ndim != 1:
            raise ValidationError("minutes, energy_wh and operating_mask must be 1-D and equal length")
        if minutes.size:
            if minutes[0] < 0 or minutes[-1] >= MINUTES_PER_DAY:
                raise ValidationError("minute_index outside [0, 1439]")
            if np.any(np.diff(minutes) <= 0):
                raise ValidationError("samples must be strictly ascending by minute_index")
        if np.any(~np.isfinite(energy)):
            raise ValidationError("energy_wh must be finite")
        if np.any(energy < 0):
            raise ValidationError("energy_wh must be non-negative")
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "minutes", _frozen(minutes))
        object.__setattr__(self, "energy_wh", _frozen(energy))
        object.__setattr__(self, "operating_mask", _frozen(mask))

    @classmethod
    def from_readings(
        cls,
        escalator_id: str,
        day: date,
        direction: Direction | str,
        minutes: Iterable[int],
        energy_wh: Iterable[float],
        off_threshold_wh: float = DEFAULT_OFF_THRESHOLD_WH,
    ) -> "DailyProfile":
        minutes = np.asarray(list(minutes), dtype=np.int64)
        energy = np.asarray(list(energy_wh), dtype=np.float64)
        order = np.argsort(minutes, kind="stable")
        minutes, energy = minutes[order], energy[order]
        return cls(escalator_id, day, Direction(direction), minutes, energy, energy >= off_threshold_wh)

    @property
    def n_operating(self) -> int:
        return int(self.operating_mask.sum())

    @property
    def samples(self) -> list[EnergySample]:
        return [EnergySample(int(m), float(e)) for m, e in zip(self.minutes, self.energy_wh)]

    @property
    def operating_energy(self) -> np.ndarray:
        """Energies of operating minutes, in minute order."""
        return self.energy_wh[self.operating_mask]

    @property
    def operating_minutes(self) -> np.ndarray:
        return self.minutes[self.operating_mask]

    def with_mask(self, mask) -> "DailyProfile":
        return DailyProfile(self.escalator_id, self.day, self.direction, self.minutes, self.energy_wh, mask)

    def __eq__(self, other):
        if not isinstance(other, DailyProfile):
            return NotImplemented
        return (
            self.escalator_id == other.escalator_id
            and self.day == other.day
            and self.direction == other.direction
            and np.array_equal(self.minutes, other.minutes)
            and np.array_equal(self.energy_wh, other.energy_wh)
            and np.array_equal(self.operating_mask, other.operating_mask)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"DailyProfile({self.escalator_id!r}, {self.day.isoformat()}, {self.direction.value}, "
            f"samples={self.minutes.size}, n_operating={self.n_operating})"
        )


def detect_operating_mask(profile: DailyProfile, off_threshold_wh: float = DEFAULT_OFF_THRESHOLD_WH) -> DailyProfile:
    if off_threshold_wh <= 0:
        raise ValueError("off_threshold_wh must be positive")
    return profile.with_mask(profile.energy_wh >= off_threshold_wh)


def operating_runs(profile: DailyProfile) -> list[OperatingRun]:
    """Maximal runs of consecutive operating samples.

    Minutes missing from the record do not split a run; only a present
    non-operating sample does.
    """
    mask = profile.operating_mask
    if not mask.any():
        return []
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    minutes = profile.minutes
    return [OperatingRun(int(minutes[s]), int(minutes[e])) for s, e in zip(starts, ends)]


def parse_day_boundary(text: str) -> time:
    try:
        return datetime.strptime(text, "%H:%M").time()
    except ValueError:
        raise ValueError(f"day boundary must be HH:MM, got {text!r}") from None


def working_day(ts: datetime, boundary: time = DEFAULT_DAY_BOUNDARY) -> tuple[date, int]:
    """Map a timestamp to its (working day, minute index) pair."""
    start = datetime.combine(ts.date(), boundary)
    if ts < start:
        start -= timedelta(days=1)
    return start.date(), int((ts - start).total_seconds() // 60)


def _text_stream(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(bytes(stream).decode("utf-8-sig"))
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.StringIO(stream.read().decode("utf-8-sig"))


def ingest_csv(
    stream,
    day_boundary: time = DEFAULT_DAY_BOUNDARY,
    off_threshold_wh: float = DEFAULT_OFF_THRESHOLD_WH,
) -> list[DailyProfile]:
    """Read ``escalator_id,timestamp,direction,energy_wh`` rows into profiles.

    Accepts a binary stream, a text stream or raw bytes.  Profiles are
    returned sorted by (escalator_id, day); samples within a profile are
    sorted by minute regardless of input order.
    """
    reader = csv.reader(_text_stream(stream))
    try:
        header = next(reader)
    except StopIteration:
        return []
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", line=1)

    groups: dict[tuple[str, date], dict] = defaultdict(lambda: {"dirs": set(), "rows": {}})
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line=lineno)
        esc, ts_text, dir_text, energy_text = (cell.strip() for cell in row)
        if not esc:
            raise ParseError("empty escalator_id", line=lineno)
        try:
            ts = datetime.strptime(ts_text, TIMESTAMP_FORMAT)
            direction = Direction.parse(dir_text)
            energy = float(energy_text)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not np.isfinite(energy):
            raise ParseError(f"non-finite energy {energy_text!r}", line=lineno)
        if energy < 0:
            raise ValidationError(f"line {lineno}: negative energy {energy}")
        day, minute = working_day(ts, day_boundary)
        group = groups[(esc, day)]
        if minute in group["rows"]:
            raise ValidationError(f"line {lineno}: duplicate reading for {esc} at {ts_text}")
        group["rows"][minute] = energy
        group["dirs"].add(direction)

    profiles = []
    for (esc, day), group in sorted(groups.items()):
        if len(group["dirs"]) != 1:
            raise ValidationError(f"{esc} {day.isoformat()}: mixed directions within one working day")
        rows = group["rows"]
        profiles.append(
            DailyProfile.from_readings(esc, day, group["dirs"].pop(), rows.keys(), rows.values(), off_threshold_wh)
        )
    return profiles


def write_csv(profiles: Iterable[DailyProfile], stream: IO[str], day_boundary: time = DEFAULT_DAY_BOUNDARY) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in profiles:
        start = datetime.combine(p.day, day_boundary)
        for minute, energy in zip(p.minutes.tolist(), p.energy_wh.tolist()):
            ts = start + timedelta(minutes=minute)
            writer.writerow((p.escalator_id, ts.strftime(TIMESTAMP_FORMAT), p.direction.value, repr(energy)))


def profiles_to_csv(profiles: Iterable[DailyProfile], day_boundary: time = DEFAULT_DAY_BOUNDARY) -> str:
    buf = io.StringIO()
    write_csv(profiles, buf, day_boundary)
    return buf.getvalue()
