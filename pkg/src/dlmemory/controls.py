"""Piecewise control-field schedules Omega1(t), Omega2(t)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHAPES = ("constant", "cosine")
_TIME_TOL = 1e-12


class ScheduleError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Segment:
    """One schedule piece. ``omega1``/``omega2`` hold (start, end) values in rad/s.

    ``cosine`` ramps as ``a + (b - a) (1 - cos(pi s)) / 2`` with ``s`` the
    fractional time, which has zero slope at both ends.
    """

    t_start: float
    t_end: float
    omega1: tuple[float, float]
    omega2: tuple[float, float]
    shape: str = "cosine"

    def profile(self, s):
        if self.shape == "constant":
            w = np.zeros_like(s)
        else:
            w = (1 - np.cos(np.pi * s)) / 2
        o1 = self.omega1[0] + (self.omega1[1] - self.omega1[0]) * w
        o2 = self.omega2[0] + (self.omega2[1] - self.omega2[0]) * w
        return o1, o2


def segment_problems(segments) -> list[str]:
    problems = []
    for n, seg in enumerate(segments):
        if seg.shape not in SHAPES:
            problems.append(f"segment {n}: unknown shape {seg.shape!r}")
        if not seg.t_end > seg.t_start:
            problems.append(f"segment {n}: t_end {seg.t_end} must exceed t_start {seg.t_start}")
        for name in ("omega1", "omega2"):
            a, b = getattr(seg, name)
            if a < 0 or b < 0:
                problems.append(f"segment {n}: {name} must be non-negative")
            if seg.shape == "constant" and a != b:
                problems.append(f"segment {n}: constant segment has different {name} endpoints")
    for n in range(1, len(segments)):
        prev, cur = segments[n - 1], segments[n]
        scale = max(1.0, abs(prev.t_end), abs(cur.t_start)) * _TIME_TOL
        if cur.t_start < prev.t_end - scale:
            problems.append(
                f"segments {n - 1} and {n} overlap on [{cur.t_start}, {min(prev.t_end, cur.t_end)}]"
            )
        elif cur.t_start > prev.t_end + scale:
            problems.append(f"gap between segments {n - 1} and {n} on [{prev.t_end}, {cur.t_start}]")
        else:
            for name in ("omega1", "omega2"):
                if not np.isclose(getattr(prev, name)[1], getattr(cur, name)[0], rtol=1e-9, atol=1e-12):
                    problems.append(f"{name} jumps between segments {n - 1} and {n}")
    return problems


class ControlSchedule:
    """Contiguous sequence of segments; calling it returns ``(Omega1, Omega2)``."""

    def __init__(self, segments):
        segments = tuple(segments)
        if not segments:
            raise ScheduleError(["schedule needs at least one segment"])
        problems = segment_problems(segments)
        if problems:
            raise ScheduleError(problems)
        self.segments = segments
        self._edges = np.array([s.t_start for s in segments] + [segments[-1].t_end])

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def covers(self, t0: float, t1: float) -> bool:
        tol = max(1.0, abs(self.t_end)) * _TIME_TOL
        return t0 >= self.t_start - tol and t1 <= self.t_end + tol

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        which = np.clip(np.searchsorted(self._edges, t, side="right") - 1, 0, len(self.segments) - 1)
        o1 = np.empty_like(t)
        o2 = np.empty_like(t)
        for n, seg in enumerate(self.segments):
            m = which == n
            if m.any():
                s = np.clip((t[m] - seg.t_start) / (seg.t_end - seg.t_start), 0.0, 1.0)
                o1[m], o2[m] = seg.profile(s)
        if scalar:
            return float(o1[0]), float(o2[0])
        return o1, o2

    def omega1(self, t):
        return self(t)[0]

    def omega2(self, t):
        return self(t)[1]

    def shifted(self, dt: float) -> "ControlSchedule":
        return ControlSchedule([
            Segment(s.t_start + dt, s.t_end + dt, s.omega1, s.omega2, s.shape) for s in self.segments
        ])

    def off_intervals(self) -> list[tuple[float, float]]:
        """Intervals on which both controls are identically zero."""
        return [(s.t_start, s.t_end) for s in self.segments
                if max(s.omega1) == 0 and max(s.omega2) == 0]

    def to_dicts(self) -> list[dict]:
        return [
            {"t_start": s.t_start, "t_end": s.t_end, "omega1": list(s.omega1),
             "omega2": list(s.omega2), "shape": s.shape}
            for s in self.segments
        ]

    def __eq__(self, other):
        return isinstance(other, ControlSchedule) and self.segments == other.segments

    def __repr__(self):
        return f"ControlSchedule({len(self.segments)} segments, [{self.t_start:g}, {self.t_end:g}])"


def constant(omega1: float, omega2: float, t_end: float, t_start: float = 0.0) -> ControlSchedule:
    return ControlSchedule([Segment(t_start, t_end, (omega1, omega1), (omega2, omega2), "constant")])


class ScheduleBuilder:
    """Append segments end to end, each starting where the previous one stopped."""

    def __init__(self, omega1: float, omega2: float, t0: float = 0.0):
        self.t = t0
        self.o1, self.o2 = omega1, omega2
        self.segments: list[Segment] = []

    def ramp(self, duration: float, omega1: float, omega2: float) -> "ScheduleBuilder":
        self.segments.append(Segment(self.t, self.t + duration, (self.o1, omega1), (self.o2, omega2), "cosine"))
        self.t += duration
        self.o1, self.o2 = omega1, omega2
        return self

    def hold(self, duration: float) -> "ScheduleBuilder":
        self.segments.append(Segment(self.t, self.t + duration, (self.o1, self.o1), (self.o2, self.o2), "constant"))
        self.t += duration
        return self

    def build(self) -> ControlSchedule:
        return ControlSchedule(self.segments)
