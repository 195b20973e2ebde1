import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlmemory.controls import ControlSchedule, ScheduleBuilder, ScheduleError, Segment, constant


def test_cosine_ramp_values_and_slopes():
    s = ControlSchedule([Segment(0.0, 2.0, (4.0, 0.0), (0.0, 2.0))])
    assert s(0.0) == (4.0, 0.0)
    assert s(1.0) == pytest.approx((2.0, 1.0))
    assert s(2.0) == pytest.approx((0.0, 2.0))
    # zero slope at the ends
    assert abs(s(1e-4)[0] - 4.0) < 1e-6
    assert abs(s(2.0 - 1e-4)[0]) < 1e-6


def test_vectorized_call_matches_scalar():
    s = ScheduleBuilder(3.0, 0.0).ramp(1.0, 1.0, 0.5).hold(0.5).ramp(2.0, 0.0, 0.0).build()
    ts = np.linspace(-0.1, 3.6, 41)
    o1, o2 = s(ts)
    for t, a, b in zip(ts, o1, o2):
        assert s(float(t)) == pytest.approx((a, b))
    assert s.t_start == 0.0 and s.t_end == 3.5
    assert s.off_intervals() == []


def test_overlap_reports_interval():
    with pytest.raises(ScheduleError) as err:
        ControlSchedule([Segment(0, 2, (1, 1), (0, 0), "constant"), Segment(1.5, 3, (1, 0), (0, 0))])
    assert "overlap on [1.5, 2" in str(err.value)


def test_all_problems_collected():
    with pytest.raises(ScheduleError) as err:
        ControlSchedule([
            Segment(0, 1, (1, 1), (0, 0), "constant"),
            Segment(1.5, 2, (2, 0), (0, 0)),
            Segment(2, 1.8, (0, -1), (0, 0), "zigzag"),
        ])
    problems = err.value.problems
    assert any("gap" in p for p in problems)
    assert any("unknown shape" in p for p in problems)
    assert any("non-negative" in p for p in problems)
    assert any("must exceed" in p for p in problems)
    assert len(problems) >= 4


def test_jump_rejected():
    with pytest.raises(ScheduleError, match="jumps"):
        ControlSchedule([Segment(0, 1, (1, 1), (0, 0), "constant"), Segment(1, 2, (2, 0), (0, 0))])


def test_constant_and_shift():
    s = constant(2.0, 1.0, 5.0)
    assert s(3.0) == (2.0, 1.0)
    sh = s.shifted(1.0)
    assert sh.t_start == 1.0 and sh.t_end == 6.0 and sh != s
    assert ControlSchedule(s.segments) == s
    assert s.covers(0, 5) and not s.covers(0, 6)


def test_off_intervals():
    s = ScheduleBuilder(1.0, 0.0).ramp(1.0, 0.0, 0.0).hold(2.0).ramp(1.0, 0.5, 0.5).build()
    assert s.off_intervals() == [(1.0, 3.0)]
    d = s.to_dicts()
    assert d[1]["shape"] == "constant" and d[1]["omega1"] == [0.0, 0.0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 5), st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=5))
def test_builder_schedules_are_continuous_and_nonnegative(pieces):
    b = ScheduleBuilder(1.0, 1.0)
    for dur, a, c in pieces:
        b.ramp(dur, a, c)
    s = b.build()
    ts = np.linspace(s.t_start, s.t_end, 2001)
    o1, o2 = s(ts)
    assert o1.min() >= 0 and o2.min() >= 0
    for seg in s.segments[1:]:
        eps = 1e-9 * max(1.0, seg.t_start)
        left, right = s(seg.t_start - eps), s(seg.t_start + eps)
        assert left == pytest.approx(right, abs=1e-6)
        # C1: slopes vanish on both sides of every joint
        h = 1e-5
        d_left = (np.array(s(seg.t_start)) - np.array(s(seg.t_start - h))) / h
        d_right = (np.array(s(seg.t_start + h)) - np.array(s(seg.t_start))) / h
        assert np.abs(d_left).max() < 1e-2 * (1 + 10 / seg.t_start if seg.t_start else 1)
        assert np.abs(d_right).max() < 1e-2 * (1 + 10 / (seg.t_end - seg.t_start))
