from __future__ import annotations

import io
import math
from dataclasses import replace
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixedloss.data import DailyProfile, Direction
from fixedloss.errors import ConfigError, ConvergenceError, InsufficientDataError, JoinError
from fixedloss.estimators import FixedLossEstimate, Method
from fixedloss.labeling import (
    ExperimentLabel,
    dump_labels,
    estimation_errors,
    extract_label,
    grid_tune,
    load_labels,
    moving_average,
    summarize_errors,
)
from fixedloss.simulator import PassengerWave, ScenarioConfig, Thermal, derive_seed, generate_day

from .conftest import DAY, make_profile


def test_moving_average_examples(rng):
    assert np.allclose(moving_average([7.0] * 12, 5), 7.0)
    assert list(moving_average([1, 2, 3, 4, 5], 5)) == [3.0]
    x = rng.normal(50, 3, 40)
    ma = moving_average(x, 5)
    assert ma.size == 36
    for j in range(ma.size):
        assert ma[j] == pytest.approx(sum(x[j : j + 5]) / 5)
    with pytest.raises(InsufficientDataError):
        moving_average([1, 2], 5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=5, max_size=50), st.floats(-50, 50), st.integers(1, 5))
def test_moving_average_commutes_with_shift(xs, c, w):
    a = moving_average(np.array(xs) + c, w)
    b = moving_average(xs, w) + c
    assert np.allclose(a, b, atol=1e-9)


def _experiment(energies, start=1290):
    return DailyProfile.from_readings("E3", DAY, "up", start + np.arange(len(energies)), energies)


def test_label_constant_run():
    label = extract_label(_experiment([50.0] * 60))
    assert label.f_experiment_wh == 50.0
    assert label.convergence_minute == 1290


def test_label_warmup_curve():
    # 90-minute vacant run with warm-up A exp(-t / tau), A = 8, tau = 12
    cfg = ScenarioConfig(Direction.UP, 40.0, operate_from=1290, operate_to=1379, thermal=Thermal(8.0, 12.0))
    label = extract_label(generate_day(cfg).profile)
    assert label.f_experiment_wh == pytest.approx(40.0, abs=0.1)
    assert 1290 < label.convergence_minute <= 1379


def test_label_never_converges():
    osc = [40.0 + (1 if i % 2 else -1) for i in range(90)]
    with pytest.raises(ConvergenceError):
        extract_label(_experiment(osc))


def test_label_noise_free_tail_equals_tail_value():
    energies = [60.0, 55.0, 52.0, 51.0] + [50.25] * 40
    assert extract_label(_experiment(energies)).f_experiment_wh == 50.25


def test_label_uses_last_run_by_default():
    energies = np.zeros(1440)
    energies[100:200] = 70.0
    energies[1300:1380] = 45.0
    p = DailyProfile.from_readings("E", DAY, "up", range(1440), energies)
    assert extract_label(p).f_experiment_wh == 45.0
    assert extract_label(p, run_index=0).f_experiment_wh == 70.0


def _est(value, esc="E", day=DAY, method=Method.OPTIMIZATION):
    return FixedLossEstimate(value, method, {}, {}, esc, day)


@pytest.mark.parametrize(
    "label, estimate, tau, pct",
    [(51.54, 51.1, -0.44, -0.9), (39.74, 40.76, 1.02, 2.6), (45.0, 45.0, 0.0, 0.0)],
)
def test_estimation_errors_rows(label, estimate, tau, pct):
    (rec,) = estimation_errors([ExperimentLabel("E", DAY, label, 0)], [_est(estimate)])
    assert rec.tau_wh == pytest.approx(tau, abs=1e-9)
    assert rec.tau_pct == pytest.approx(pct, abs=0.05)
    assert rec.tau_pct == pytest.approx(100 * rec.tau_wh / label)


def test_estimation_errors_join():
    labels = [ExperimentLabel("A", DAY, 40.0, 0), ExperimentLabel("B", DAY, 41.0, 0)]
    estimates = [_est(40.5, "A"), _est(40.0, "C")]
    with pytest.raises(JoinError) as info:
        estimation_errors(labels, estimates)
    assert any("C" in o for o in info.value.orphans) and any("B" in o for o in info.value.orphans)


def test_summarize_errors():
    mean, std = summarize_errors([-1.0, 1.0])
    assert mean == 0 and std == pytest.approx(math.sqrt(2))
    with pytest.raises(InsufficientDataError):
        summarize_errors([1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30), st.floats(-10, 10))
def test_summarize_shift(taus, c):
    m0, s0 = summarize_errors(taus)
    m1, s1 = summarize_errors([t + c for t in taus])
    assert m1 == pytest.approx(m0 + c, abs=1e-9)
    assert s1 == pytest.approx(s0, abs=1e-7)


def test_labels_json_round_trip():
    labels = [ExperimentLabel("E", DAY, 40.25, 12), ExperimentLabel("F", DAY + timedelta(1), 39.0, 3)]
    buf = io.StringIO()
    dump_labels(labels, buf)
    buf.seek(0)
    assert load_labels(buf) == labels
    assert load_labels(io.StringIO('{"escalator_id": "E", "day": "2021-03-01", "f_experiment_wh": 1.5}'))[0].f_experiment_wh == 1.5
    with pytest.raises(ConfigError):
        load_labels(io.StringIO('{"day": "x"}'))


# tuning


def _sim_experiments(n=11, noise=0.3, seed=11):
    """Normal-service days with known fixed loss, labelled with the truth."""
    rnd = np.random.default_rng(seed)
    out = []
    for i in range(n):
        direction = Direction.UP if i % 2 else Direction.DOWN
        f = float(rnd.uniform(35, 100))
        cfg = ScenarioConfig(
            direction,
            f,
            thermal=Thermal(6.0, 15.0),
            passenger_waves=(
                PassengerWave(180, 330, 12.0, 5.0, 0.9),
                PassengerWave(780, 960, 12.0, 5.0, 0.9),
                PassengerWave(90, 1260, 6.0, 3.0, 0.2),
            ),
            noise_std_wh=noise,
            seed=derive_seed(seed, i),
            escalator_id=f"X{i}",
            day=DAY + timedelta(days=i),
        )
        sim = generate_day(cfg)
        out.append((sim.profile, ExperimentLabel(cfg.escalator_id, cfg.day, f, 0)))
    return out


def test_grid_tune_single_experiment_has_no_std():
    p = make_profile([50.0] * 200, "up")
    label = ExperimentLabel("E1", DAY, 50.0, 0)
    curve = grid_tune([(p, label)], Method.ENGINEERING, [1, 5, 10])
    assert curve.mean_error == [0.0, 0.0, 0.0]
    assert curve.std_error == [None, None, None]
    buf = io.StringIO()
    curve.write_csv(buf)
    assert buf.getvalue().splitlines() == [
        "param,mean_error_wh,std_error_wh",
        "1.0,0.0,",
        "5.0,0.0,",
        "10.0,0.0,",
    ]


def test_grid_tune_single_value_equals_direct_run():
    exps = _sim_experiments(5)
    curve = grid_tune(exps, Method.OPTIMIZATION, [0.3])
    from fixedloss.estimators import optimization_fixed_loss

    taus = [optimization_fixed_loss(p).value_wh - l.f_experiment_wh for p, l in exps]
    assert (curve.mean_error[0], curve.std_error[0]) == pytest.approx(summarize_errors(taus))


def test_grid_tune_optimization_error_grows_with_large_delta():
    exps = _sim_experiments(12)
    grid = [round(0.1 * i, 1) for i in range(1, 11)]
    # upward estimates sit below the truth and downward above, so check each side
    for direction in Direction:
        curve = grid_tune([e for e in exps if e[0].direction is direction], Method.OPTIMIZATION, grid)
        abs_mean = [abs(m) for m in curve.mean_error]
        assert np.mean(abs_mean[5:]) > np.mean(abs_mean[:5])
        assert abs_mean[-1] > max(abs_mean[:5])
    pooled = grid_tune(exps, Method.OPTIMIZATION, grid)
    assert len(pooled.params) == 10 and all(s >= 0 for s in pooled.std_error)
    assert pooled.std_error[-1] > max(pooled.std_error[:5])


def test_grid_tune_engineering_small_negative_bias_for_up():
    exps = [e for e in _sim_experiments(12) if e[0].direction is Direction.UP]
    curve = grid_tune(exps, Method.ENGINEERING, list(range(1, 11)))
    assert all(-1.5 < m < 0 for m in curve.mean_error)
    assert max(curve.mean_error) - min(curve.mean_error) < 0.6


def test_grid_tune_errors():
    exps = _sim_experiments(2)
    with pytest.raises(ConfigError):
        grid_tune(exps, Method.OPTIMIZATION, [])
    with pytest.raises(ConfigError):
        grid_tune([], Method.OPTIMIZATION, [0.3])
    with pytest.raises(ConfigError):
        grid_tune(exps, Method.CLASSICAL, [0.3])
    short = make_profile([40.0] * 30)
    with pytest.raises(InsufficientDataError, match="E1"):
        grid_tune([(short, ExperimentLabel("E1", DAY, 40.0, 0))], Method.ENGINEERING, [5])
