import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from airhaptics.errors import RateCapError, ValidationError
from airhaptics.modulation import (AmScheme, Path, Schedule, StmScheme, am_envelope, circle_path, line_path,
                                   point_path, polyline_path, sample_count, sample_spacing_us, snap_to_grid,
                                   stm_schedule)


def test_am_example_200hz():
    s = am_envelope(AmScheme(200, 0.5), 10_000, 40_000)
    assert len(s) == 400
    assert int(np.count_nonzero(s.envelope)) == 200
    # two on/off cycles of 100 samples each
    edges = np.flatnonzero(np.diff(s.envelope != 0)) + 1
    assert edges.tolist() == [100, 200, 300]
    assert np.all(s.positions == 0)


def test_am_band():
    with pytest.raises(ValidationError):
        AmScheme(5)
    AmScheme(10)
    AmScheme(400)
    with pytest.raises(ValidationError):
        AmScheme(200, duty=0)
    with pytest.raises(ValidationError):
        AmScheme(200, strength=1.2)


def test_am_strength_scales_envelope():
    s = am_envelope(AmScheme(100, 0.25, 0.6), 20_000, 40_000, (0.01, 0.02, 0.2), t0_us=1000)
    assert set(np.unique(s.envelope).tolist()) == {0.0, 0.6}
    assert s.t_us[0] == 1000
    assert tuple(s.positions[0]) == (0.01, 0.02, 0.2)


@settings(max_examples=60, deadline=None)
@given(st.integers(10, 400), st.floats(0.01, 1.0), st.integers(1, 8), st.sampled_from([40_000, 20_000, 10_000, 8_000]))
def test_am_duty_accounting(freq, duty, periods, rate):
    duration = round(periods * 1e6 / freq)
    s = am_envelope(AmScheme(freq, duty), duration, rate)
    n = len(s)
    on = int(np.count_nonzero(s.envelope))
    # within one sample per period boundary
    assert abs(on - duty * n) <= periods + 1


def test_stm_circle_example():
    s = stm_schedule(StmScheme(circle_path((0, 0, 0.2), 0.02), 100), 10_000, 40_000)
    assert len(s) == 400
    rel = s.positions - (0, 0, 0.2)
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    assert np.allclose(np.diff(ang), 2 * math.pi / 400, atol=1e-12)
    assert np.allclose(np.linalg.norm(rel, axis=1), 0.02, atol=1e-15)


def test_stm_point_path_is_constant():
    s = stm_schedule(StmScheme(point_path((0.01, 0.02, 0.3)), 50), 5_000, 40_000)
    assert np.all(s.positions == (0.01, 0.02, 0.3))


def test_stm_rate_cap_and_band():
    scheme = StmScheme(circle_path((0, 0, 0.2), 0.01), 100)
    with pytest.raises(RateCapError):
        stm_schedule(scheme, 1_000, 50_000)
    with pytest.raises(ValidationError):
        StmScheme(circle_path((0, 0, 0.2), 0.01), 500)
    fast = StmScheme(circle_path((0, 0, 0.2), 0.01), 500, allow_any_frequency=True)
    assert len(stm_schedule(fast, 1_000, 40_000)) == 40


def test_line_path_pingpongs_at_constant_speed():
    path = line_path((0, 0, 0.2), (0.04, 0, 0.2))
    assert path.length == pytest.approx(0.04)
    assert path.period_length == pytest.approx(0.08)
    s = stm_schedule(StmScheme(path, 100), 10_000, 40_000)
    x = s.positions[:, 0]
    assert x.max() == pytest.approx(0.04)
    assert np.allclose(np.abs(np.diff(x)), 0.08 * 100 / 40_000, atol=1e-12)


def test_polyline_constant_speed_and_corners():
    path = polyline_path([(0, 0, 0.2), (0.03, 0, 0.2), (0.03, 0.04, 0.2)])
    assert path.length == pytest.approx(0.07)
    pos = path.positions_at([0.0, 0.5, 3 / 14])
    assert np.allclose(pos[0], (0, 0, 0.2))
    assert np.allclose(pos[1], (0.03, 0.04, 0.2))
    assert np.allclose(pos[2], (0.03, 0, 0.2))


def test_path_validation():
    with pytest.raises(ValidationError):
        line_path((0, 0, 0), (0, 0, 0))
    with pytest.raises(ValidationError):
        circle_path((0, 0, 0), 0)
    with pytest.raises(ValidationError):
        polyline_path([(0, 0, 0)])
    with pytest.raises(ValidationError):
        circle_path((0, 0, 0), 0.01, (0, 0, 1), (0, 0, 1))
    with pytest.raises(ValidationError):
        Path("spiral", ((0, 0, 0),))


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 400), st.floats(0.002, 0.05), st.integers(1, 5))
def test_circle_closes_after_whole_periods(freq, radius, periods):
    if 1_000_000 % freq:
        return
    duration = periods * 1_000_000 // freq
    scheme = StmScheme(circle_path((0.1, 0.0, 0.25), radius, (0, 1, 0), (1, 0, 0)), freq)
    s = stm_schedule(scheme, duration + 25, 40_000)
    assert np.linalg.norm(s.positions[-1] - s.positions[0]) <= 1e-9


def test_circle_speed_matches_path_length():
    path = circle_path((0, 0, 0.2), 0.015)
    s = stm_schedule(StmScheme(path, 80), 50_000, 40_000)
    chords = np.linalg.norm(np.diff(s.positions, axis=0), axis=1)
    arcs = 2 * 0.015 * np.arcsin(chords / 0.03)
    assert np.max(np.abs(arcs - path.length * 80 / 40_000)) <= 1e-9


def test_timing_helpers():
    assert sample_spacing_us(40_000) == 25
    assert sample_spacing_us(30_000) == 33
    assert sample_count(10_000, 40_000) == 400
    assert sample_count(10_001, 40_000) == 400
    with pytest.raises(RateCapError):
        sample_spacing_us(40_001)
    with pytest.raises(ValidationError):
        sample_spacing_us(0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 40_000.0), st.integers(1, 50_000))
def test_every_schedule_respects_minimum_spacing(rate, duration):
    s = am_envelope(AmScheme(200), duration, rate)
    if len(s) > 1:
        assert np.all(np.diff(s.t_us) >= 25)
        assert np.all(np.diff(s.t_us) == sample_spacing_us(rate))


def test_schedule_invariants():
    with pytest.raises(ValidationError):
        Schedule([0, 10], [(0, 0, 0)] * 2, [1, 1], 40_000)
    with pytest.raises(ValidationError):
        Schedule([0, 25], [(0, 0, 0)] * 2, [1, 1.5], 40_000)
    with pytest.raises(RateCapError):
        Schedule([0, 20], [(0, 0, 0)] * 2, [1, 1], 50_000)
    s = Schedule([0, 25], [(0, 0, 0)] * 2, [1, 0], 40_000)
    with pytest.raises(AttributeError):
        s.update_rate = 10
    with pytest.raises(ValueError):
        s.envelope[0] = 0.5
    assert [x.t for x in s.samples] == [0, 25]


def test_schedule_jsonl_roundtrip():
    s = stm_schedule(StmScheme(circle_path((0, 0, 0.2), 0.01), 100), 2_000, 40_000)
    text = s.to_jsonl()
    assert text.count("\n") == len(s)
    back = Schedule.from_jsonl(text.splitlines(), 40_000)
    assert np.array_equal(back.t_us, s.t_us)
    assert np.allclose(back.positions, s.positions, atol=1e-9)
    assert back.to_jsonl() == text
    with pytest.raises(ValidationError):
        Schedule.from_jsonl(['{"t_us": 0}'], 40_000)


def test_snap_examples():
    assert snap_to_grid((0, 0, 0)) == (0.0, 0.0, 0.0)
    x, y, z = snap_to_grid((0.0059, 0, 0.1999))
    assert (x, y, z) == pytest.approx((0.004, 0.0, 0.2))
    x, y, z = snap_to_grid((0.002, -0.002, 0.1))
    assert (x, y, z) == pytest.approx((0.004, -0.004, 0.1))
    assert math.copysign(1.0, snap_to_grid((-0.001, 0, 0))[0]) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-2, 2, allow_nan=False)] * 3))
def test_snap_idempotent_and_odd(p):
    s = snap_to_grid(p)
    assert snap_to_grid(s) == s
    neg = snap_to_grid(tuple(-c for c in p))
    assert neg == tuple(-c + 0.0 for c in s)
