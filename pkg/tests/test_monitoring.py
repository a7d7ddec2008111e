from __future__ import annotations

import io
import math
from dataclasses import replace
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixedloss.errors import ConfigError, InsufficientDataError, ValidationError
from fixedloss.estimators import optimization_fixed_loss
from fixedloss.monitoring import (
    CHART_HEADER,
    EwmaConfig,
    annotate_maintenance,
    control_limits,
    ewma_update,
    fixed_limit_run_lengths,
    robust_sigma,
    robust_sigma_sq,
    run_chart,
    trimean,
    windowed_run_lengths,
)
from fixedloss.simulator import MaintenanceEvent, SeriesConfig, generate_series, scenario_presets

START = date(2022, 1, 1)


def _series(values):
    return [(START + timedelta(days=i), float(v)) for i, v in enumerate(values)]


def test_ewma_update():
    assert ewma_update(3.5, 3.5, 0.25) == 3.5
    assert ewma_update(0.0, 1.0, 0.25) == 0.25
    z = 0.0
    for t in range(1, 60):
        z = ewma_update(z, 1.0, 0.25)
        assert z == pytest.approx(1 - 0.75**t, abs=1e-12)


def test_trimean_examples():
    assert trimean([4.2] * 7) == pytest.approx(4.2)
    assert trimean([1, 2, 3, 4, 5]) == 3.0
    # Q1 = 1.75, Q2 = 2.5, Q3 = 3.25 under linear interpolation
    assert trimean([1, 2, 3, 4]) == pytest.approx((1.75 + 5 + 3.25) / 4)
    with pytest.raises(InsufficientDataError):
        trimean([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=40), st.randoms(use_true_random=False))
def test_trimean_and_sigma_properties(xs, rnd):
    t = trimean(xs)
    assert min(xs) - 1e-9 <= t <= max(xs) + 1e-9
    ys = list(xs)
    rnd.shuffle(ys)
    assert trimean(ys) == t
    assert robust_sigma(ys) == robust_sigma(xs)


def test_robust_sigma_examples():
    assert robust_sigma([50.0] * 30, 0.779, 0.05) == pytest.approx(0.05)
    assert robust_sigma_sq([1, 2, 3, 4, 5], 0.779, 0.0) == pytest.approx(2 / 0.779)
    assert robust_sigma([1, 2, 3, 4, 5], 0.779, 0.0) == pytest.approx(1.60231, abs=1e-5)
    assert robust_sigma([1, 2, 3, 4, 5], convention="deviation", sigma_floor=0) == pytest.approx(2 / 1.349)
    with pytest.raises(InsufficientDataError):
        robust_sigma([1, 2, 3])
    with pytest.raises(ConfigError):
        robust_sigma([1, 2, 3, 4], convention="other")


@pytest.mark.parametrize("c", [0.5, 2.0, 9.0])
def test_robust_sigma_scales_with_sqrt(c, rng):
    x = rng.normal(0, 1, 30)
    assert robust_sigma(c * x, sigma_floor=0) == pytest.approx(math.sqrt(c) * robust_sigma(x, sigma_floor=0))


def test_control_limits():
    assert control_limits(45.0, 0.0, 0.25, 2.924) == (45.0, 45.0)
    assert math.sqrt(0.25 / 1.75) == pytest.approx(0.377964, abs=1e-6)
    ucl, lcl = control_limits(45.0, 1.0, 0.25, 2.924)
    assert ucl - 45 == pytest.approx(1.1052, abs=1e-3)
    assert (ucl, lcl) == pytest.approx((46.105, 43.895), abs=1e-3)
    with pytest.raises(ValueError):
        control_limits(0, -1, 0.25, 3)


def test_config_validation():
    for bad in (dict(lam=0), dict(lam=1), dict(k=0), dict(window_days=3), dict(d_w=0), dict(sigma_floor_wh=-1), dict(sigma_convention="x")):
        with pytest.raises(ConfigError):
            EwmaConfig(**bad)


def test_constant_series_never_signals():
    cfg = EwmaConfig()
    chart = run_chart(_series([47.5] * 400), cfg)
    h = cfg.k * math.sqrt(cfg.lam / (2 - cfg.lam)) * cfg.sigma_floor_wh
    assert not any(p.signal for p in chart)
    for p in chart:
        assert p.z_t == pytest.approx(47.5)
        assert p.ucl == pytest.approx(47.5 + h) and p.lcl == pytest.approx(47.5 - h)


def test_burn_in_and_point_invariants(rng):
    values = np.concatenate([rng.normal(45, 1, 60), rng.normal(50, 1, 60)])
    chart = run_chart(_series(values))
    assert [p.in_burn_in for p in chart[:30]] == [True] * 30
    assert not any(p.in_burn_in for p in chart[30:])
    for p in chart:
        assert p.lcl <= p.mu_w <= p.ucl
        assert p.signal == (not p.in_burn_in and (p.z_t > p.ucl or p.z_t < p.lcl))
        assert not (p.signal and p.in_burn_in)
    assert any(p.signal for p in chart[60:70])


def test_window_excludes_current_day():
    values = [45.0] * 30 + [45.0, 60.0]
    chart = run_chart(_series(values))
    # day 31 limits come from days 1..30 only; the spike on day 32 is not in its own window
    assert chart[31].mu_w == pytest.approx(45.0)
    assert chart[31].signal


def test_monitoring_continues_after_signal():
    values = [45.0] * 30 + [60.0] * 60
    chart = run_chart(_series(values))
    assert chart[30].signal
    # window fills with the new level and the chart settles again
    assert not chart[-1].signal
    assert chart[-1].mu_w == pytest.approx(60.0)


def test_z_is_convex_combination(rng):
    values = rng.normal(45, 2, 200)
    chart = run_chart(_series(values))
    z0 = chart[0].z_t
    for i, p in enumerate(chart):
        seen = np.concatenate([[z0], values[: i + 1]])
        assert seen.min() - 1e-9 <= p.z_t <= seen.max() + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(4000, 5000), min_size=35, max_size=120), st.integers(-3000, 3000))
def test_shift_equivariance(ints, c_int):
    values = [i / 100 for i in ints]
    c = c_int / 4
    a = run_chart(_series(values))
    b = run_chart(_series([v + c for v in values]))
    assert [p.signal for p in a] == [p.signal for p in b]
    for p, q in zip(a, b):
        assert q.z_t == pytest.approx(p.z_t + c, abs=1e-9)
        assert q.mu_w == pytest.approx(p.mu_w + c, abs=1e-9)
        assert q.ucl == pytest.approx(p.ucl + c, abs=1e-9)
        assert q.lcl == pytest.approx(p.lcl + c, abs=1e-9)


def test_run_chart_errors():
    with pytest.raises(InsufficientDataError):
        run_chart([])
    with pytest.raises(ValidationError):
        run_chart([(START, 1.0), (START, 2.0)])
    with pytest.raises(ValidationError):
        run_chart([(START + timedelta(1), 1.0), (START, 2.0)])
    with pytest.raises(InsufficientDataError):
        run_chart(_series([1, 2, 3]))
    assert len(run_chart(_series([1, 2, 3, 4, 5]))) == 5


def test_step_to_49_detected_within_five_days():
    rng = np.random.default_rng(99)
    hits = 0
    runs = 1000
    for _ in range(runs):
        values = np.concatenate([rng.normal(45, 1, 40), rng.normal(49, 1, 10)])
        chart = run_chart(_series(values))
        after = [i for i in range(40, 50) if chart[i].signal]
        hits += bool(after) and after[0] - 40 < 5
    assert hits / runs >= 0.9


def test_annotate_maintenance():
    values = [45.0] * 30 + [40.0] * 5
    chart = run_chart(_series(values))
    plain = annotate_maintenance(chart, [])
    assert [r.point for r in plain] == chart
    assert all(r.notes == () and not r.maintenance_coincident for r in plain)

    signal_day = chart[30].day
    rows = annotate_maintenance(chart, [(signal_day, "belt replaced"), (START, "inspection")])
    assert rows[30].notes == ("belt replaced",) and rows[30].maintenance_coincident
    assert rows[0].notes == ("inspection",) and not rows[0].maintenance_coincident
    far = annotate_maintenance(chart, [(signal_day + timedelta(days=4), "x")])
    assert not far[30].maintenance_coincident
    near = annotate_maintenance(chart, [(signal_day + timedelta(days=3), "x")])
    assert near[30].maintenance_coincident


def test_post_maintenance_drop_is_flagged():
    base = replace(scenario_presets()["busy-last-hour"], seed=5)
    sim = generate_series(SeriesConfig(60, base, maintenance_days=(MaintenanceEvent(45, 40.0),)))
    series = [(p.day, optimization_fixed_loss(p).value_wh) for p in sim.profiles]
    rows = annotate_maintenance(run_chart(series), sim.maintenance)
    drop_day = START.replace(year=2021) + timedelta(days=45)
    assert sim.maintenance[0][0] == drop_day
    flagged = [r for r in rows if r.maintenance_coincident]
    assert flagged and all(abs((r.point.day - drop_day).days) <= 3 for r in flagged)
    assert rows[45].point.signal and rows[45].notes


def test_chart_csv_schema():
    from fixedloss.monitoring import write_chart_csv

    chart = run_chart(_series([45.0] * 31))
    buf = io.StringIO()
    write_chart_csv(annotate_maintenance(chart, [(chart[3].day, "a"), (chart[3].day, "b")]), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CHART_HEADER)
    assert len(lines) == 32
    assert lines[4].endswith(",0,1,a; b")


def test_fixed_limit_arl_short_run():
    rl = fixed_limit_run_lengths(2000, rng=np.random.default_rng(1))
    assert 300 < rl.mean() < 520
    shifted = fixed_limit_run_lengths(500, shift=3.0, rng=np.random.default_rng(2))
    assert np.median(shifted) <= 3


def test_windowed_run_lengths_smoke():
    rl = windowed_run_lengths(200, rng=np.random.default_rng(3), max_length=300)
    assert rl.shape == (200,) and rl.min() >= 1 and rl.max() <= 300
