"""Escalator fixed-loss energy estimation and EWMA monitoring."""

from .data import DailyProfile, Direction, EnergySample, OperatingRun, detect_operating_mask, ingest_csv, operating_runs, write_csv
from .errors import (
    ConfigError,
    ConvergenceError,
    FixedLossError,
    InsufficientDataError,
    JoinError,
    ParseError,
    ValidationError,
)
from .estimators import (
    FixedLossEstimate,
    Method,
    OptimizationConfig,
    classical_fixed_loss,
    engineering_fixed_loss,
    estimate,
    objective_value,
    optimization_fixed_loss,
)
from .labeling import ErrorRecord, ExperimentLabel, TuningCurve, estimation_errors, extract_label, grid_tune, moving_average, summarize_errors
from .monitoring import (
    ChartPoint,
    EwmaConfig,
    annotate_maintenance,
    control_limits,
    ewma_update,
    robust_sigma,
    run_chart,
    trimean,
)
from .simulator import ScenarioConfig, SeriesConfig, generate_day, generate_series, scenario_presets

__version__ = "0.1.0"
