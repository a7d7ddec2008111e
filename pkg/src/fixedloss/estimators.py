"""Daily fixed-loss estimators: classical, engineering and optimization.

All three only look at operating minutes of a profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from fractions import Fraction

import numpy as np

from .data import DailyProfile, Direction, operating_runs
from .errors import ConfigError, InsufficientDataError

CLASSICAL_WINDOW_MIN = 30
WARMUP_MIN = 60
DEFAULT_DELTA_WH = 0.3
DEFAULT_GRID_RESOLUTION_WH = 0.01
DEFAULT_ENGINEERING_P = 5.0

# bound on grid x samples evaluated per chunk
_CHUNK_CELLS = 1 << 22


class Method(str, Enum):
    CLASSICAL = "classical"
    ENGINEERING = "engineering"
    OPTIMIZATION = "optimization"


@dataclass(frozen=True)
class FixedLossEstimate:
    value_wh: float
    method: Method
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    escalator_id: str = ""
    day: date | None = None

    def to_dict(self) -> dict:
        return {
            "escalator_id": self.escalator_id,
            "day": self.day.isoformat() if self.day else None,
            "method": self.method.value,
            "value_wh": self.value_wh,
            "params": dict(self.params),
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class OptimizationConfig:
    delta_wh: float = DEFAULT_DELTA_WH
    grid_resolution_wh: float = DEFAULT_GRID_RESOLUTION_WH

    def __post_init__(self):
        if not self.delta_wh > 0:
            raise ConfigError("delta_wh must be positive")
        if not 0 < self.grid_resolution_wh < self.delta_wh:
            raise ConfigError("grid_resolution_wh must be positive and smaller than delta_wh")


def classical_fixed_loss(profile: DailyProfile) -> FixedLossEstimate:
    """Mean energy of the last 30 operating minutes."""
    energy = profile.operating_energy
    if energy.size < CLASSICAL_WINDOW_MIN:
        raise InsufficientDataError(
            f"classical estimate needs {CLASSICAL_WINDOW_MIN} operating minutes, got {energy.size}"
        )
    tail = energy[-CLASSICAL_WINDOW_MIN:]
    minutes = profile.operating_minutes[-CLASSICAL_WINDOW_MIN:]
    return FixedLossEstimate(
        value_wh=float(np.mean(tail)),
        method=Method.CLASSICAL,
        params={"window_min": CLASSICAL_WINDOW_MIN},
        diagnostics={"first_minute": int(minutes[0]), "last_minute": int(minutes[-1]), "n_used": int(tail.size)},
        escalator_id=profile.escalator_id,
        day=profile.day,
    )


def _subset_size(p: float, count: int) -> int:
    # exact decimal arithmetic so that e.g. p=29, count=100 gives 29, not 28
    return max(1, math.floor(Fraction(repr(float(p))) * count / 100))


def engineering_fixed_loss(profile: DailyProfile, p: float = DEFAULT_ENGINEERING_P) -> FixedLossEstimate:
    """Median of the p% most extreme energies once the first operating hour is dropped.

    Lowest values are used for upward escalators, highest for downward.  Only
    the first run of the day loses its warm-up hour.
    """
    if not 0 < p <= 100:
        raise ConfigError(f"p must be in (0, 100], got {p}")
    if profile.n_operating <= WARMUP_MIN:
        raise InsufficientDataError(
            f"engineering estimate needs more than {WARMUP_MIN} operating minutes, got {profile.n_operating}"
        )
    first = operating_runs(profile)[0]
    minutes = profile.operating_minutes
    energy = profile.operating_energy
    keep = ~((minutes >= first.start_minute) & (minutes < first.start_minute + WARMUP_MIN))
    remaining = np.sort(energy[keep])
    k = _subset_size(p, remaining.size)
    subset = remaining[:k] if profile.direction is Direction.UP else remaining[-k:]
    return FixedLossEstimate(
        value_wh=float(np.median(subset)),
        method=Method.ENGINEERING,
        params={"p": float(p)},
        diagnostics={"n_remaining": int(remaining.size), "n_subset": int(k), "dropped_warmup": int((~keep).sum())},
        escalator_id=profile.escalator_id,
        day=profile.day,
    )


def _objective_many(energy: np.ndarray, candidates: np.ndarray, delta: float, direction: Direction) -> np.ndarray:
    """|S+| - |S-| at each candidate fixed loss."""
    out = np.empty(candidates.size, dtype=np.int64)
    step = max(1, _CHUNK_CELLS // max(1, energy.size))
    for lo in range(0, candidates.size, step):
        f = candidates[lo : lo + step, None]
        e_minus_f = energy[None, :] - f
        f_minus_e = f - energy[None, :]
        above = np.count_nonzero((e_minus_f > 0) & (e_minus_f < delta), axis=1)
        below = np.count_nonzero((f_minus_e > 0) & (f_minus_e < delta), axis=1)
        out[lo : lo + step] = above - below if direction is Direction.UP else below - above
    return out


def objective_value(profile: DailyProfile, f: float, delta: float, direction: Direction | None = None) -> int:
    """Count of near-vacant minutes minus near-loaded minutes around ``f``.

    For an upward escalator the vacant side is just above ``f``; for a
    downward one it is just below.  Both inequalities are strict.
    """
    if not delta > 0:
        raise ConfigError("delta must be positive")
    direction = profile.direction if direction is None else Direction(direction)
    return int(_objective_many(profile.operating_energy, np.array([float(f)]), float(delta), direction)[0])


def search_grid(energy: np.ndarray, config: OptimizationConfig) -> np.ndarray:
    """Cell-centred grid covering [max(res, min - delta), max + delta]."""
    res, delta = config.grid_resolution_wh, config.delta_wh
    lo = max(res, float(energy.min()) - delta)
    hi = float(energy.max()) + delta
    n = max(1, int(math.ceil((hi - lo) / res - 1e-9)))
    return lo + (np.arange(n) + 0.5) * res


def optimization_fixed_loss(profile: DailyProfile, config: OptimizationConfig | None = None) -> FixedLossEstimate:
    """Grid search for the fixed loss maximising |S+| - |S-|.

    Among contiguous runs of maximising grid points the one touching the data
    cloud wins (highest for upward, lowest for downward escalators); the
    estimate is that run's midpoint.
    """
    config = config or OptimizationConfig()
    energy = profile.operating_energy
    if energy.size == 0:
        raise InsufficientDataError("optimization estimate needs at least one operating minute")
    grid = search_grid(energy, config)
    objective = _objective_many(energy, grid, config.delta_wh, profile.direction)
    best = int(objective.max())
    idx = np.flatnonzero(objective == best)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    run = runs[-1] if profile.direction is Direction.UP else runs[0]
    low, high = float(grid[run[0]]), float(grid[run[-1]])
    return FixedLossEstimate(
        value_wh=(low + high) / 2,
        method=Method.OPTIMIZATION,
        params={"delta_wh": config.delta_wh, "grid_resolution_wh": config.grid_resolution_wh},
        diagnostics={
            "objective_max": best,
            "interval_low": low,
            "interval_high": high,
            "n_maximizing_intervals": len(runs),
            "n_grid": int(grid.size),
            "n_used": int(energy.size),
        },
        escalator_id=profile.escalator_id,
        day=profile.day,
    )


def estimate(
    profile: DailyProfile,
    method: Method | str,
    *,
    p: float = DEFAULT_ENGINEERING_P,
    config: OptimizationConfig | None = None,
) -> FixedLossEstimate:
    method = Method(method)
    if method is Method.CLASSICAL:
        return classical_fixed_loss(profile)
    if method is Method.ENGINEERING:
        return engineering_fixed_loss(profile, p)
    return optimization_fixed_loss(profile, config)
