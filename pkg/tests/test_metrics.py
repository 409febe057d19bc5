import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqkd.metrics import IntervalStat, interval_series, stability_report
from sqkd.protocol import Physics, RoundConfig, RoundStream, simulate_block
from sqkd.session import run_session


def stat(i, q, n=100):
    return IntervalStat(i, 0, 1000, q, q, 1 - 2 * q, 1 - 2 * q, 2 * n, n, int(q * n), n, int(q * n), 2 * n)


@pytest.fixture(scope="module")
def bench_run():
    # bench defaults, 10^7 rounds in 30 intervals
    return run_session(10_000_000, RoundConfig(), Physics(), seed=31, workers=4, interval_rounds=333_334)


def test_interval_count():
    t = simulate_block(0, 1_000_000, RoundConfig(), Physics(), RoundStream(1))
    assert len(interval_series(t, 100_000)) == 10
    assert len(interval_series(t, 300_000)) == 4
    with pytest.raises(ValueError):
        interval_series(t, 0)


def test_ideal_intervals_have_zero_qber():
    t = simulate_block(0, 500_000, RoundConfig(), Physics.ideal(), RoundStream(2))
    for s in interval_series(t, 50_000):
        assert s.qber_sift_z == 0 and s.qber_ctrl_x == 0


def test_interval_counts_add_up(bench_run):
    s = bench_run.time_series
    assert sum(x.conclusive for x in s) == bench_run.conclusive
    assert sum(x.sift_z_conclusive for x in s) == bench_run.sift_z_conclusive
    assert sum(x.ctrl_x_errors for x in s) == bench_run.ctrl_x_errors
    assert sum(x.n_rounds for x in s) == bench_run.n_rounds


def test_bench_interval_spread(bench_run):
    s = bench_run.time_series
    assert len(s) == 30
    rep = stability_report(s)
    assert rep.qber_sift_z.std < 0.005
    assert rep.qber_ctrl_x.std < 0.005


def test_bench_mean_ctrl_x(bench_run):
    assert abs(stability_report(bench_run.time_series).qber_ctrl_x.mean - 0.0115) <= 0.005


def test_weighted_mean_equals_session_value(bench_run):
    rep = stability_report(bench_run.time_series)
    assert rep.qber_sift_z.mean == pytest.approx(bench_run.qber_sift_z, rel=1e-12)
    assert rep.qber_ctrl_x.mean == pytest.approx(bench_run.qber_ctrl_x, rel=1e-12)
    assert rep.contrast_sift_z.mean == pytest.approx(bench_run.contrast["SIFT_Z"], rel=1e-12)


def test_constant_series_has_zero_spread():
    rep = stability_report([stat(i, 0.01) for i in range(5)])
    assert rep.qber_sift_z.std == 0.0
    assert rep.qber_sift_z.mean == pytest.approx(0.01)


def test_two_value_mean():
    assert stability_report([stat(0, 0.01), stat(1, 0.02)]).qber_sift_z.mean == pytest.approx(0.015, abs=1e-15)


def test_empty_series_rejected():
    with pytest.raises(ValueError):
        stability_report([])


def test_intervals_without_counts_are_skipped():
    empty = IntervalStat(0, 0, 10, math.nan, math.nan, math.nan, math.nan, 0, 0, 0, 0, 0, 0)
    rep = stability_report([empty, stat(1, 0.02)])
    assert rep.qber_sift_z.intervals == 1 and rep.qber_sift_z.mean == pytest.approx(0.02)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 0.5), st.integers(1, 10_000)), min_size=1, max_size=40))
def test_min_le_mean_le_max(rows):
    series = [stat(i, q, n) for i, (q, n) in enumerate(rows)]
    for m in stability_report(series).as_dict().values():
        assert m["min"] <= m["mean"] <= m["max"]
        assert m["std"] >= 0


def test_interval_rates_bounded(bench_run):
    for s in bench_run.time_series:
        for q in (s.qber_sift_z, s.qber_ctrl_x):
            assert 0.0 <= q <= 1.0
        assert np.all(np.array([s.conclusive, s.sift_z_conclusive, s.ctrl_x_conclusive]) >= 0)
