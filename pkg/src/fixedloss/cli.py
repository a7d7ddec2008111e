"""Command-line entry point: simulate, estimate, tune, monitor.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

from . import __version__
from .data import (
    CSV_HEADER,
    DEFAULT_DAY_BOUNDARY,
    DEFAULT_OFF_THRESHOLD_WH,
    ingest_csv,
    parse_day_boundary,
    write_csv,
)
from .errors import ConfigError, FixedLossError, InsufficientDataError, JoinError, ParseError, ValidationError
from .estimators import (
    DEFAULT_DELTA_WH,
    DEFAULT_ENGINEERING_P,
    DEFAULT_GRID_RESOLUTION_WH,
    Method,
    OptimizationConfig,
    estimate,
)
from .labeling import (
    DEFAULT_DELTA_GRID,
    DEFAULT_HOLD,
    DEFAULT_MA_WINDOW,
    DEFAULT_P_GRID,
    DEFAULT_TOL_WH,
    dump_labels,
    extract_label,
    grid_tune,
    load_labels,
)
from .monitoring import EwmaConfig, annotate_maintenance, run_chart, write_chart_csv
from .simulator import generate_series, load_series_config, scenario_presets, series_from_dict

log = logging.getLogger("fixedloss")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
ESTIMATE_HEADER = ("escalator_id", "day", "method", "value_wh", "error", "params", "diagnostics")


class UsageError(Exception):
    """Bad flags, paths or inputs detected by the CLI itself."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_text(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    return path


def _prepare_dir(path: Path | None, command: str) -> Path:
    if path is None:
        raise UsageError(f"{command} needs --out DIR")
    if path.exists() and not path.is_dir():
        raise UsageError(f"--out {path} exists and is not a directory")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _prepare_file(path: Path | None) -> Path | None:
    if path is not None and not path.parent.is_dir():
        raise UsageError(f"output directory {path.parent} does not exist")
    return path


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text)


def _load_profiles(path: Path, args):
    with open(path, "rb") as fh:
        return ingest_csv(fh, args.day_boundary, args.off_threshold)


# simulate ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    out = _prepare_dir(args.out, "simulate")
    presets = scenario_presets()
    if args.scenario in presets:
        series = series_from_dict({"scenario": args.scenario}, days=args.days)
    else:
        text = _require_file(Path(args.scenario)).read_text(encoding="utf-8")
        series = load_series_config(text, days=args.days)
    if args.seed is not None:
        series = replace(series, base=replace(series.base, seed=args.seed))
    sim = generate_series(series, args.off_threshold)
    if sim.n_clipped:
        log.warning("%d generated readings were clipped at 0 Wh; check the scenario", sim.n_clipped)

    with open(out / "profiles.csv", "w", encoding="utf-8", newline="") as fh:
        write_csv(sim.profiles, fh, args.day_boundary)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("escalator_id", "day", "f_true_wh"))
    for day, f in sim.truth:
        w.writerow((series.base.escalator_id, day.isoformat(), repr(float(f))))
    (out / "ground_truth.csv").write_text(buf.getvalue(), encoding="utf-8")
    if sim.maintenance:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("escalator_id", "day", "note"))
        for day, note in sim.maintenance:
            w.writerow((series.base.escalator_id, day.isoformat(), note))
        (out / "maintenance.csv").write_text(buf.getvalue(), encoding="utf-8")
    log.info("wrote %d simulated days to %s", len(sim.profiles), out)
    return EXIT_OK


# estimate ---------------------------------------------------------------------


def _methods(name: str) -> list[Method]:
    return list(Method) if name == "all" else [Method(name)]


def _estimate_rows(profiles, methods, args) -> list[dict]:
    config = OptimizationConfig(args.delta, args.grid_resolution)
    rows = []
    for profile in profiles:
        for method in methods:
            try:
                est = estimate(profile, method, p=args.p, config=config)
                row = est.to_dict()
                row["error"] = None
            except InsufficientDataError as exc:
                if args.strict:
                    raise
                log.warning("%s %s %s: %s", profile.escalator_id, profile.day, method.value, exc)
                row = {
                    "escalator_id": profile.escalator_id,
                    "day": profile.day.isoformat(),
                    "method": method.value,
                    "value_wh": None,
                    "params": {},
                    "diagnostics": {},
                    "error": f"insufficient_data: {exc}",
                }
            rows.append(row)
    return rows


def _render_estimates(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ESTIMATE_HEADER)
    for r in rows:
        w.writerow(
            (
                r["escalator_id"],
                r["day"],
                r["method"],
                "" if r["value_wh"] is None else repr(float(r["value_wh"])),
                r["error"] or "",
                _dumps(r["params"]),
                _dumps(r["diagnostics"]),
            )
        )
    return buf.getvalue()


def cmd_estimate(args) -> int:
    path = _require_file(args.input)
    out = _prepare_file(args.out)
    profiles = _load_profiles(path, args)
    if not profiles:
        raise UsageError(f"{path}: no readings")
    rows = _estimate_rows(profiles, _methods(args.method), args)
    _write_text(out, _render_estimates(rows, args.format))
    return EXIT_OK


# tune -------------------------------------------------------------------------


def _parse_grid(text: str | None, method: Method) -> list[float]:
    if text is None:
        return list(DEFAULT_DELTA_GRID if method is Method.OPTIMIZATION else DEFAULT_P_GRID)
    try:
        grid = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"bad --grid {text!r}; expected comma-separated numbers") from None
    if not grid:
        raise UsageError("--grid is empty")
    return grid


def _collect_experiments(directory: Path, args):
    """Pair NAME.csv with NAME.json labels or a NAME.vacant.csv experiment run."""
    if not directory.is_dir():
        raise UsageError(f"no such directory: {directory}")
    profiles_csv = {p.name[: -len(".csv")]: p for p in directory.glob("*.csv") if not p.name.endswith(".vacant.csv")}
    vacant = {p.name[: -len(".vacant.csv")]: p for p in directory.glob("*.vacant.csv")}
    labels_json = {p.stem: p for p in directory.glob("*.json")}
    orphans = sorted(
        [p.name for s, p in profiles_csv.items() if s not in labels_json and s not in vacant]
        + [p.name for s, p in labels_json.items() if s not in profiles_csv]
        + [p.name for s, p in vacant.items() if s not in profiles_csv]
    )
    if orphans:
        raise UsageError("unpaired experiment files: " + ", ".join(orphans))
    if not profiles_csv:
        raise UsageError(f"{directory}: no experiment profiles")

    experiments = []
    for stem in sorted(profiles_csv):
        profiles = _load_profiles(profiles_csv[stem], args)
        if stem in labels_json:
            with open(labels_json[stem], encoding="utf-8") as fh:
                labels = load_labels(fh)
        else:
            labels = [
                extract_label(p, args.ma_window, args.tol, args.hold) for p in _load_profiles(vacant[stem], args)
            ]
        by_key = {(l.escalator_id, l.day): l for l in labels}
        keys = {(p.escalator_id, p.day) for p in profiles}
        missing = [f"{stem}: {k[0]}@{k[1]}" for k in sorted(keys ^ set(by_key))]
        if missing:
            raise UsageError("unpaired experiment days: " + ", ".join(missing))
        experiments += [(p, by_key[(p.escalator_id, p.day)]) for p in profiles]
    return experiments


def cmd_tune(args) -> int:
    method = Method(args.method)
    grid = _parse_grid(args.grid, method)
    out = _prepare_file(args.out)
    labels_out = _prepare_file(args.labels_out)
    experiments = _collect_experiments(args.experiments, args)
    curve = grid_tune(experiments, method, grid, args.grid_resolution)
    if labels_out is not None:
        with open(labels_out, "w", encoding="utf-8") as fh:
            dump_labels([label for _, label in experiments], fh)
    if args.format == "json":
        doc = {
            "method": method.value,
            "param": curve.params,
            "mean_error_wh": curve.mean_error,
            "std_error_wh": curve.std_error,
        }
        _write_text(out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        buf = io.StringIO()
        curve.write_csv(buf)
        _write_text(out, buf.getvalue())
    return EXIT_OK


# monitor ----------------------------------------------------------------------


def _read_header(path: Path) -> tuple[str, ...]:
    with open(path, encoding="utf-8-sig", newline="") as fh:
        return tuple(h.strip() for h in next(csv.reader(fh), []))


def _series_from_estimates(path: Path, method: str) -> dict[str, list[tuple[date, float]]]:
    series: dict[str, list[tuple[date, float]]] = {}
    with open(path, encoding="utf-8-sig", newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            if row.get("method", method) != method:
                continue
            if not row.get("value_wh"):
                log.warning("%s line %d: no fixed-loss value (%s); day skipped", path, lineno, row.get("error", ""))
                continue
            try:
                series.setdefault(row["escalator_id"], []).append((date.fromisoformat(row["day"]), float(row["value_wh"])))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad fixed-loss row: {exc}", line=lineno) from None
    return {k: sorted(v) for k, v in series.items()}


def _series_from_raw(path: Path, args) -> dict[str, list[tuple[date, float]]]:
    config = OptimizationConfig(args.delta, args.grid_resolution)
    series: dict[str, list[tuple[date, float]]] = {}
    for profile in _load_profiles(path, args):
        try:
            est = estimate(profile, Method.OPTIMIZATION, config=config)
        except InsufficientDataError as exc:
            if args.strict:
                raise
            log.warning("%s %s: %s; day skipped", profile.escalator_id, profile.day, exc)
            continue
        series.setdefault(profile.escalator_id, []).append((profile.day, est.value_wh))
    return series


def _read_maintenance(path: Path) -> list[tuple[str | None, date, str]]:
    events = []
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "day" not in reader.fieldnames:
            raise UsageError(f"{path}: maintenance CSV needs a 'day' column")
        for lineno, row in enumerate(reader, start=2):
            try:
                events.append((row.get("escalator_id") or None, date.fromisoformat(row["day"]), row.get("note") or ""))
            except ValueError as exc:
                raise ParseError(f"bad maintenance row: {exc}", line=lineno) from None
    return events


def cmd_monitor(args) -> int:
    path = _require_file(args.input)
    out = _prepare_dir(args.out, "monitor")
    events = _read_maintenance(_require_file(args.maintenance)) if args.maintenance else []
    config = EwmaConfig(args.lam, args.k, args.window, args.d_w, args.sigma_floor, args.sigma_convention)

    header = _read_header(path)
    if header == CSV_HEADER:
        series = _series_from_raw(path, args)
    elif {"escalator_id", "day", "value_wh"} <= set(header):
        series = _series_from_estimates(path, args.method)
    else:
        raise UsageError(f"{path}: header {','.join(header)} is neither raw readings nor fixed-loss estimates")
    if not series:
        raise UsageError(f"{path}: no fixed-loss values")
    for esc, s in series.items():
        if len(s) < config.window_days + 1:
            raise UsageError(f"{esc}: {len(s)} days is shorter than window + 1 ({config.window_days + 1})")

    summary = []
    for esc in sorted(series):
        chart = run_chart(series[esc], config)
        mine = [(d, note) for e, d, note in events if e is None or e == esc]
        rows = annotate_maintenance(chart, mine)
        with open(out / f"chart_{_safe_name(esc)}.csv", "w", encoding="utf-8", newline="") as fh:
            write_chart_csv(rows, fh)
        for r in rows:
            if r.point.signal:
                summary.append(
                    {
                        "escalator_id": esc,
                        "day": r.point.day.isoformat(),
                        "side": "high" if r.point.z_t > r.point.ucl else "low",
                        "z_t": r.point.z_t,
                        "ucl": r.point.ucl,
                        "lcl": r.point.lcl,
                        "maintenance_coincident": r.maintenance_coincident,
                    }
                )
        n_sig = sum(r.point.signal for r in rows)
        log.info("%s: %d days charted, %d signal days", esc, len(rows), n_sig)

    if args.format == "json":
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("escalator_id", "day", "side", "z_t", "ucl", "lcl", "maintenance_coincident"))
        for s in summary:
            w.writerow(
                (s["escalator_id"], s["day"], s["side"], repr(s["z_t"]), repr(s["ucl"]), repr(s["lcl"]), int(s["maintenance_coincident"]))
            )
        (out / "summary.csv").write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


# parser -----------------------------------------------------------------------


def _boundary(text: str):
    try:
        return parse_day_boundary(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="tabular output format")
    parser.add_argument("--seed", type=int, default=d(None), help="override the scenario seed")
    parser.add_argument("--out", type=Path, default=d(None), help="output file or directory")
    parser.add_argument("--strict", action="store_true", default=d(False), help="fail on the first bad day")
    parser.add_argument("--day-boundary", type=_boundary, default=d(DEFAULT_DAY_BOUNDARY), metavar="HH:MM")
    parser.add_argument("--off-threshold", type=_positive, default=d(DEFAULT_OFF_THRESHOLD_WH), metavar="WH")
    parser.add_argument("--log-level", default=d("WARNING"), choices=("DEBUG", "INFO", "WARNING", "ERROR"))


def _estimator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--delta", type=_positive, default=DEFAULT_DELTA_WH, help="optimization proximity threshold (Wh)")
    parser.add_argument("--grid-resolution", type=_positive, default=DEFAULT_GRID_RESOLUTION_WH, metavar="WH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fixedloss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic minute-level profiles")
    p.add_argument("scenario", help=f"scenario JSON file or preset name ({', '.join(scenario_presets())})")
    p.add_argument("--days", type=int, default=None, help="number of days (default: from the scenario, else 1)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="estimate daily fixed loss")
    p.add_argument("input", type=Path, help="minute-level readings CSV")
    p.add_argument("--method", choices=[m.value for m in Method] + ["all"], default="all")
    p.add_argument("--p", type=float, default=DEFAULT_ENGINEERING_P, help="engineering percentage")
    _estimator_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("tune", parents=[common], help="error curves over a parameter grid")
    p.add_argument("experiments", type=Path, help="directory of NAME.csv + NAME.json or NAME.vacant.csv")
    p.add_argument("--method", choices=(Method.OPTIMIZATION.value, Method.ENGINEERING.value), default="optimization")
    p.add_argument("--grid", default=None, help="comma-separated delta (Wh) or p (%%) values")
    p.add_argument("--grid-resolution", type=_positive, default=DEFAULT_GRID_RESOLUTION_WH, metavar="WH")
    p.add_argument("--ma-window", type=int, default=DEFAULT_MA_WINDOW)
    p.add_argument("--tol", type=_positive, default=DEFAULT_TOL_WH, help="label convergence tolerance (Wh)")
    p.add_argument("--hold", type=int, default=DEFAULT_HOLD, help="label convergence hold (minutes)")
    p.add_argument("--labels-out", type=Path, default=None, help="write the labels used as JSON")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("monitor", parents=[common], help="EWMA chart of daily fixed loss")
    p.add_argument("input", type=Path, help="fixed-loss estimates CSV or minute-level readings CSV")
    p.add_argument("--maintenance", type=Path, default=None, help="CSV with day[,escalator_id][,note]")
    p.add_argument("--method", choices=[m.value for m in Method], default="optimization")
    p.add_argument("--lambda", dest="lam", type=float, default=0.25)
    p.add_argument("--k", type=_positive, default=2.924)
    p.add_argument("--window", type=int, default=30, help="moving window (days)")
    p.add_argument("--d-w", dest="d_w", type=_positive, default=0.779)
    p.add_argument("--sigma-floor", type=float, default=0.05)
    p.add_argument("--sigma-convention", choices=("variance", "deviation"), default="variance")
    _estimator_flags(p)
    p.set_defaults(func=cmd_monitor)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ParseError, ValidationError, JoinError) as exc:
        print(f"fixedloss {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FixedLossError as exc:
        print(f"fixedloss {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"fixedloss {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
