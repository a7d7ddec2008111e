"""Experiment labels, estimation errors and parameter tuning curves."""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from datetime import date
from typing import IO, Iterable, Sequence

import numpy as np

from .data import DailyProfile, operating_runs
from .errors import ConfigError, ConvergenceError, FixedLossError, InsufficientDataError, JoinError
from .estimators import DEFAULT_GRID_RESOLUTION_WH, FixedLossEstimate, Method, OptimizationConfig, estimate

DEFAULT_MA_WINDOW = 5
DEFAULT_TOL_WH = 0.1
DEFAULT_HOLD = 10

DEFAULT_DELTA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))
DEFAULT_P_GRID = tuple(float(i) for i in range(1, 11))


@dataclass(frozen=True)
class ExperimentLabel:
    escalator_id: str
    day: date
    f_experiment_wh: float
    convergence_minute: int

    def to_dict(self) -> dict:
        return {
            "escalator_id": self.escalator_id,
            "day": self.day.isoformat(),
            "f_experiment_wh": self.f_experiment_wh,
            "convergence_minute": self.convergence_minute,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentLabel":
        try:
            return cls(
                str(d["escalator_id"]),
                date.fromisoformat(d["day"]),
                float(d["f_experiment_wh"]),
                int(d.get("convergence_minute", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad label record {d!r}: {exc}") from None


@dataclass(frozen=True)
class ErrorRecord:
    escalator_id: str
    day: date
    method: Method
    params: dict
    label_wh: float
    estimate_wh: float
    tau_wh: float
    tau_pct: float


@dataclass(frozen=True)
class TuningCurve:
    method: Method
    params: list[float]
    mean_error: list[float]
    # None where fewer than two experiments make the sample std undefined
    std_error: list[float | None]

    def write_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("param", "mean_error_wh", "std_error_wh"))
        for p, m, s in zip(self.params, self.mean_error, self.std_error):
            writer.writerow((repr(float(p)), repr(float(m)), "" if s is None else repr(float(s))))


def moving_average(series: Sequence[float], window: int = DEFAULT_MA_WINDOW) -> np.ndarray:
    """Trailing mean; element j averages inputs j .. j + window - 1."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    if x.size < window:
        raise InsufficientDataError(f"series of length {x.size} is shorter than window {window}")
    return np.lib.stride_tricks.sliding_window_view(x, window).mean(axis=1)


def extract_label(
    profile: DailyProfile,
    ma_window: int = DEFAULT_MA_WINDOW,
    tol_wh: float = DEFAULT_TOL_WH,
    hold: int = DEFAULT_HOLD,
    run_index: int = -1,
) -> ExperimentLabel:
    """Fixed-loss label from a vacant-run experiment.

    The moving average of the selected operating run is deemed converged at
    the first window whose next ``hold`` moving-average values all stay
    within ``tol_wh`` of it.  The label is the mean of the raw readings from
    the start of that window to the end of the run.  ``run_index`` picks the
    run (default: last run of the day, where night-time experiments sit).
    """
    if hold < 1 or tol_wh <= 0:
        raise ConfigError("hold must be >= 1 and tol_wh positive")
    runs = operating_runs(profile)
    if not runs:
        raise InsufficientDataError(f"{profile.escalator_id} {profile.day}: no operating minutes")
    run = runs[run_index]
    in_run = profile.operating_mask & (profile.minutes >= run.start_minute) & (profile.minutes <= run.end_minute)
    x = profile.energy_wh[in_run]
    minutes = profile.minutes[in_run]
    ma = moving_average(x, ma_window)
    for s in range(ma.size - hold):
        if np.all(np.abs(ma[s + 1 : s + hold + 1] - ma[s]) < tol_wh):
            return ExperimentLabel(profile.escalator_id, profile.day, float(np.mean(x[s:])), int(minutes[s]))
    raise ConvergenceError(
        f"{profile.escalator_id} {profile.day}: moving average never settled within {tol_wh} Wh for {hold} steps"
    )


def _tau(estimate_wh: float, label_wh: float) -> tuple[float, float]:
    tau = estimate_wh - label_wh
    return tau, 100.0 * tau / label_wh


def estimation_errors(labels: Iterable[ExperimentLabel], estimates: Iterable[FixedLossEstimate]) -> list[ErrorRecord]:
    by_key = {}
    for label in labels:
        by_key[(label.escalator_id, label.day)] = label
    estimates = list(estimates)
    used = set()
    orphans = []
    records = []
    for est in estimates:
        key = (est.escalator_id, est.day)
        label = by_key.get(key)
        if label is None:
            orphans.append(f"estimate {est.escalator_id}@{est.day}")
            continue
        used.add(key)
        tau, pct = _tau(est.value_wh, label.f_experiment_wh)
        records.append(
            ErrorRecord(est.escalator_id, est.day, est.method, dict(est.params), label.f_experiment_wh, est.value_wh, tau, pct)
        )
    orphans += [f"label {k[0]}@{k[1]}" for k in by_key if k not in used]
    if orphans:
        raise JoinError("unmatched labels/estimates", orphans)
    return records


def summarize_errors(errors: Iterable[ErrorRecord | float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1) of the errors."""
    taus = [e.tau_wh if isinstance(e, ErrorRecord) else float(e) for e in errors]
    if len(taus) < 2:
        raise InsufficientDataError("need at least two errors for a sample standard deviation")
    return statistics.fmean(taus), statistics.stdev(taus)


def grid_tune(
    experiments: Sequence[tuple[DailyProfile, ExperimentLabel]],
    method: Method | str,
    grid: Sequence[float],
    grid_resolution_wh: float = DEFAULT_GRID_RESOLUTION_WH,
) -> TuningCurve:
    """Mean and spread of estimation errors for each candidate parameter.

    The grid holds delta values for the optimization method and p values
    for the engineering method.  No optimum is picked.
    """
    method = Method(method)
    if method is Method.CLASSICAL:
        raise ConfigError("classical method has no tunable parameter")
    if not experiments:
        raise ConfigError("no experiments to tune on")
    if not grid:
        raise ConfigError("empty tuning grid")
    means, stds = [], []
    for value in grid:
        taus = []
        for profile, label in experiments:
            try:
                if method is Method.OPTIMIZATION:
                    est = estimate(profile, method, config=OptimizationConfig(float(value), grid_resolution_wh))
                else:
                    est = estimate(profile, method, p=float(value))
            except FixedLossError as exc:
                raise type(exc)(f"{profile.escalator_id} {profile.day} at {method.value} param {value}: {exc}") from exc
            taus.append(_tau(est.value_wh, label.f_experiment_wh)[0])
        means.append(statistics.fmean(taus))
        stds.append(statistics.stdev(taus) if len(taus) >= 2 else None)
    return TuningCurve(method, [float(v) for v in grid], means, stds)


def load_labels(stream: IO[str]) -> list[ExperimentLabel]:
    """Labels from a JSON object or a JSON array of objects."""
    try:
        doc = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid label JSON: {exc}") from None
    records = doc if isinstance(doc, list) else [doc]
    return [ExperimentLabel.from_dict(r) for r in records]


def dump_labels(labels: Iterable[ExperimentLabel], stream: IO[str]) -> None:
    json.dump([label.to_dict() for label in labels], stream, indent=2, sort_keys=True)
    stream.write("\n")

