"""Moving-window EWMA chart with robust (trimean / IQR) limits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ConfigError, InsufficientDataError, ValidationError

IQR_PER_SIGMA = 1.349
MAINTENANCE_PROXIMITY_DAYS = 3
CHART_HEADER = ("day", "f_t_wh", "z_t", "mu_w", "sigma_w", "ucl", "lcl", "signal", "burn_in", "maintenance_notes")


@dataclass(frozen=True)
class EwmaConfig:
    lam: float = 0.25
    k: float = 2.924
    window_days: int = 30
    d_w: float = 0.779
    sigma_floor_wh: float = 0.05
    # "variance": IQR / d_w is the variance; "deviation": IQR / 1.349 is the std
    sigma_convention: str = "variance"

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ConfigError("lambda must be in (0, 1)")
        if not self.k > 0:
            raise ConfigError("k must be positive")
        if self.window_days < 4:
            raise ConfigError("window_days must be at least 4")
        if not self.d_w > 0:
            raise ConfigError("d_w must be positive")
        if self.sigma_floor_wh < 0:
            raise ConfigError("sigma_floor_wh must be non-negative")
        if self.sigma_convention not in ("variance", "deviation"):
            raise ConfigError("sigma_convention must be 'variance' or 'deviation'")


@dataclass(frozen=True)
class ChartPoint:
    day: date
    f_t_wh: float
    z_t: float
    mu_w: float
    sigma_w: float
    ucl: float
    lcl: float
    signal: bool
    in_burn_in: bool


@dataclass(frozen=True)
class AnnotatedPoint:
    point: ChartPoint
    notes: tuple[str, ...] = field(default_factory=tuple)
    maintenance_coincident: bool = False


def ewma_update(z_prev: float, f_t: float, lam: float) -> float:
    return lam * f_t + (1.0 - lam) * z_prev


def _quartiles(window: Sequence[float]) -> tuple[float, float, float]:
    x = np.asarray(window, dtype=np.float64)
    if x.size == 0:
        raise InsufficientDataError("empty window")
    # numpy's default "linear" rule: position 1 + (n - 1) q between order statistics
    q1, q2, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    return float(q1), float(q2), float(q3)


def trimean(window: Sequence[float]) -> float:
    q1, q2, q3 = _quartiles(window)
    return (q1 + 2.0 * q2 + q3) / 4.0


def robust_sigma_sq(
    window: Sequence[float], d_w: float = 0.779, sigma_floor: float = 0.05, convention: str = "variance"
) -> float:
    if len(window) < 4:
        raise InsufficientDataError(f"robust sigma needs at least 4 values, got {len(window)}")
    if not d_w > 0:
        raise ConfigError("d_w must be positive")
    q1, _, q3 = _quartiles(window)
    iqr = q3 - q1
    if convention == "variance":
        var = iqr / d_w
    elif convention == "deviation":
        var = (iqr / IQR_PER_SIGMA) ** 2
    else:
        raise ConfigError(f"unknown sigma convention {convention!r}")
    return max(var, sigma_floor**2)


def robust_sigma(
    window: Sequence[float], d_w: float = 0.779, sigma_floor: float = 0.05, convention: str = "variance"
) -> float:
    """Robust spread of a window, floored at ``sigma_floor``.

    Under the default ``variance`` convention IQR / d_w is taken as the
    variance, so the returned deviation scales with the square root of the
    data scale.
    """
    return math.sqrt(robust_sigma_sq(window, d_w, sigma_floor, convention))


def control_limits(mu_w: float, sigma_sq_w: float, lam: float, k: float) -> tuple[float, float]:
    if sigma_sq_w < 0:
        raise ValueError("sigma_sq_w must be non-negative")
    h = k * math.sqrt(lam / (2.0 - lam)) * math.sqrt(sigma_sq_w)
    return mu_w + h, mu_w - h


def _window_stats(window, config: EwmaConfig) -> tuple[float, float, float, float]:
    mu = trimean(window)
    var = robust_sigma_sq(window, config.d_w, config.sigma_floor_wh, config.sigma_convention)
    ucl, lcl = control_limits(mu, var, config.lam, config.k)
    return mu, math.sqrt(var), ucl, lcl


def run_chart(series: Sequence[tuple[date, float]], config: EwmaConfig | None = None) -> list[ChartPoint]:
    """Evaluate the chart day by day.

    The first ``window_days`` days only seed the chart: Z starts at their
    trimean and no signals are raised.  Every later day gets limits from the
    preceding ``window_days`` values, excluding itself.
    """
    config = config or EwmaConfig()
    if not series:
        raise InsufficientDataError("empty fixed-loss series")
    days = [d for d, _ in series]
    for a, b in zip(days, days[1:]):
        if not b > a:
            raise ValidationError(f"days must be strictly increasing: {a} then {b}")
    f = np.array([v for _, v in series], dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise ValidationError("fixed-loss series contains non-finite values")
    w = config.window_days
    first = f[:w]
    mu0, sigma0, ucl0, lcl0 = _window_stats(first, config)
    z = mu0
    points = [ChartPoint(days[i], float(f[i]), z, mu0, sigma0, ucl0, lcl0, False, True) for i in range(first.size)]
    for i in range(w, f.size):
        mu, sigma, ucl, lcl = _window_stats(f[i - w : i], config)
        z = ewma_update(z, float(f[i]), config.lam)
        points.append(ChartPoint(days[i], float(f[i]), z, mu, sigma, ucl, lcl, bool(z > ucl or z < lcl), False))
    return points


def annotate_maintenance(
    chart: Sequence[ChartPoint],
    events: Iterable[tuple[date, str]],
    proximity_days: int = MAINTENANCE_PROXIMITY_DAYS,
) -> list[AnnotatedPoint]:
    events = list(events)
    by_day: dict[date, list[str]] = {}
    for d, note in events:
        by_day.setdefault(d, []).append(note)
    out = []
    for p in chart:
        near = p.signal and any(abs((p.day - d).days) <= proximity_days for d, _ in events)
        out.append(AnnotatedPoint(p, tuple(by_day.get(p.day, ())), near))
    return out


def write_chart_csv(rows: Iterable[AnnotatedPoint | ChartPoint], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CHART_HEADER)
    for row in rows:
        if isinstance(row, ChartPoint):
            row = AnnotatedPoint(row)
        p = row.point
        writer.writerow(
            (
                p.day.isoformat(),
                repr(p.f_t_wh),
                repr(p.z_t),
                repr(p.mu_w),
                repr(p.sigma_w),
                repr(p.ucl),
                repr(p.lcl),
                int(p.signal),
                int(p.in_burn_in),
                "; ".join(row.notes),
            )
        )


def fixed_limit_run_lengths(
    n_runs: int,
    lam: float = 0.25,
    k: float = 2.924,
    rng: np.random.Generator | None = None,
    shift: float = 0.0,
    max_length: int = 100_000,
) -> np.ndarray:
    """Monte-Carlo run lengths with known in-control mean 0 and sigma 1.

    Uses the asymptotic limits +/- k sqrt(lam / (2 - lam)) and Z_0 = 0;
    observations are N(shift, 1).  Runs that never signal get ``max_length``.
    """
    rng = rng or np.random.default_rng()
    h = k * math.sqrt(lam / (2.0 - lam))
    z = np.zeros(n_runs)
    lengths = np.full(n_runs, max_length, dtype=np.int64)
    alive = np.arange(n_runs)
    for t in range(1, max_length + 1):
        if alive.size == 0:
            break
        z[alive] = lam * (shift + rng.standard_normal(alive.size)) + (1.0 - lam) * z[alive]
        hit = np.abs(z[alive]) > h
        lengths[alive[hit]] = t
        alive = alive[~hit]
    return lengths


def windowed_run_lengths(
    n_runs: int,
    config: EwmaConfig | None = None,
    rng: np.random.Generator | None = None,
    max_length: int = 5000,
) -> np.ndarray:
    """In-control run lengths of the moving-window robust chart on N(0, 1) data.

    Counted in days after burn-in; runs that never signal get ``max_length``.
    """
    config = config or EwmaConfig()
    rng = rng or np.random.default_rng()
    w = config.window_days
    hist = rng.standard_normal((n_runs, w))
    q1, q2, q3 = np.quantile(hist, [0.25, 0.5, 0.75], axis=1)
    z = (q1 + 2 * q2 + q3) / 4
    lengths = np.full(n_runs, max_length, dtype=np.int64)
    alive = np.ones(n_runs, dtype=bool)
    c = config.k * math.sqrt(config.lam / (2.0 - config.lam))
    for t in range(1, max_length + 1):
        if not alive.any():
            break
        q1, q2, q3 = np.quantile(hist, [0.25, 0.5, 0.75], axis=1)
        mu = (q1 + 2 * q2 + q3) / 4
        iqr = q3 - q1
        if config.sigma_convention == "variance":
            var = iqr / config.d_w
        else:
            var = (iqr / IQR_PER_SIGMA) ** 2
        h = c * np.sqrt(np.maximum(var, config.sigma_floor_wh**2))
        x = rng.standard_normal(n_runs)
        z = config.lam * x + (1 - config.lam) * z
        hit = alive & ((z > mu + h) | (z < mu - h))
        lengths[hit] = t
        alive &= ~hit
        hist = np.concatenate([hist[:, 1:], x[:, None]], axis=1)
    return lengths
