"""Carbon intensity data and time-aligned emissions.

A CI series is a step function: each interval holds its value from its own
start (inclusive) up to the next interval's start (exclusive), and the last
one extends indefinitely. Task energy is assumed to be drawn uniformly over
the task's start..complete window, so a task's emissions are its energy times
the time-weighted mean CI over that window.
"""
from __future__ import annotations

import bisect
import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .energy import TaskEnergy
from .errors import CoverageError, WattprintError
from .trace import from_epoch_ms, to_epoch_ms

CONSTANT = "constant"
SERIES = "series"
SIGNALS = ("average", "marginal", "unspecified")


class CiParseError(WattprintError):
    pass


@dataclass(frozen=True)
class CiSeries:
    kind: str
    constant_value: float | None = None
    intervals: tuple[tuple[datetime, float], ...] = ()
    signal: str = "unspecified"
    _starts_ms: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.signal not in SIGNALS:
            raise CiParseError(f"unknown CI signal {self.signal!r}; expected one of {SIGNALS}")
        if self.kind == CONSTANT:
            if self.constant_value is None or self.intervals:
                raise CiParseError("constant CI needs exactly a constant value")
            if not (self.constant_value >= 0 and math.isfinite(self.constant_value)):
                raise CiParseError(f"CI must be a non-negative number, got {self.constant_value}")
            starts = ()
        elif self.kind == SERIES:
            if self.constant_value is not None:
                raise CiParseError("a CI series cannot also carry a constant value")
            if not self.intervals:
                raise CiParseError("CI series is empty")
            starts = tuple(to_epoch_ms(t) for t, _ in self.intervals)
            for a, b in zip(starts, starts[1:]):
                if b == a:
                    raise CiParseError(f"duplicate CI interval start {from_epoch_ms(a).isoformat()}")
                if b < a:
                    raise CiParseError(f"CI interval starts are not sorted at {from_epoch_ms(b).isoformat()}")
            for t, v in self.intervals:
                if not (v >= 0 and math.isfinite(v)):
                    raise CiParseError(f"CI value at {t.isoformat()} must be non-negative, got {v}")
        else:
            raise CiParseError(f"unknown CI kind {self.kind!r}")
        object.__setattr__(self, "_starts_ms", starts)

    @classmethod
    def constant(cls, value: float, signal: str = "unspecified") -> "CiSeries":
        return cls(CONSTANT, constant_value=float(value), signal=signal)

    @classmethod
    def from_intervals(cls, intervals, signal: str = "unspecified") -> "CiSeries":
        return cls(SERIES, intervals=tuple((t, float(v)) for t, v in intervals), signal=signal)

    @property
    def values(self) -> list[float]:
        if self.kind == CONSTANT:
            return [self.constant_value]
        return [v for _, v in self.intervals]

    def describe(self) -> str:
        if self.kind == CONSTANT:
            return f"constant {self.constant_value:g} gCO2e/kWh ({self.signal})"
        widths = [b - a for a, b in zip(self._starts_ms, self._starts_ms[1:])]
        if widths:
            grain = f"median interval {statistics.median(widths) / 60_000:g} min"
        else:
            grain = "single open-ended interval"
        return (
            f"time series of {len(self.intervals)} intervals from "
            f"{self.intervals[0][0].isoformat()}, {grain} ({self.signal})"
        )


@dataclass(frozen=True)
class TaskFootprint:
    task_id: int
    energy: TaskEnergy
    co2e_g: float
    avg_ci: float


@dataclass(frozen=True)
class WorkflowFootprint:
    task_count: int
    cpu_kwh: float
    mem_kwh: float
    total_kwh: float
    co2e_g: float


def _parse_instant(text: str) -> datetime:
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def parse_ci_value(value, signal: str = "unspecified") -> CiSeries:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise CiParseError(f"CI constant must be a number, got {value!r}") from None
    return CiSeries.constant(v, signal=signal)


def parse_ci(raw_text: str, signal: str | None = None) -> CiSeries:
    """Parse a ``start,ci_g_per_kwh`` CSV, or a bare scalar, into a :class:`CiSeries`.

    An optional ``# signal=average|marginal`` comment labels the series;
    an explicit ``signal`` argument overrides it.
    """
    text = raw_text.strip()
    if not text:
        raise CiParseError("CI input is empty")
    try:
        scalar = float(text)
    except ValueError:
        scalar = None
    if scalar is not None:
        return parse_ci_value(scalar, signal or "unspecified")

    label = "unspecified"
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            key, sep, value = stripped.lstrip("#").partition("=")
            if sep and key.strip().lower() == "signal":
                label = value.strip().lower()
        elif stripped:
            body.append(stripped)
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    if reader.fieldnames is None or not {"start", "ci_g_per_kwh"} <= set(reader.fieldnames):
        raise CiParseError("CI file needs a 'start,ci_g_per_kwh' header")
    intervals = []
    for line_no, row in enumerate(reader, start=2):
        try:
            intervals.append((_parse_instant(row["start"]), float(row["ci_g_per_kwh"])))
        except (TypeError, ValueError):
            raise CiParseError(f"bad CI row {line_no}: {row}") from None
    if not intervals:
        raise CiParseError("CI series is empty")
    return CiSeries.from_intervals(intervals, signal=signal or label)


def read_ci(path, signal: str | None = None) -> CiSeries:
    with open(path, encoding="utf-8") as fh:
        return parse_ci(fh.read(), signal=signal)


def _as_ms(t) -> int:
    return t if isinstance(t, int) else to_epoch_ms(t)


def ci_at(series: CiSeries, t, clamp: bool = False) -> float:
    """CI of the interval containing ``t`` (interval starts belong to the later interval)."""
    if series.kind == CONSTANT:
        return series.constant_value
    t_ms = _as_ms(t)
    idx = bisect.bisect_right(series._starts_ms, t_ms) - 1
    if idx < 0:
        if not clamp:
            raise CoverageError(
                f"{from_epoch_ms(t_ms).isoformat()} is {series._starts_ms[0] - t_ms} ms before CI "
                f"coverage begins at {series.intervals[0][0].isoformat()}"
            )
        idx = 0
    return series.intervals[idx][1]


def window_mean_ci(series: CiSeries, start, complete, clamp: bool = False) -> float:
    """Time-weighted mean CI over ``[start, complete)``; the point CI for empty windows."""
    if series.kind == CONSTANT:
        return series.constant_value
    s, e = _as_ms(start), _as_ms(complete)
    if e < s:
        raise ValueError("window ends before it starts")
    if s == e:
        return ci_at(series, s, clamp=clamp)
    starts = series._starts_ms
    if s < starts[0] and not clamp:
        raise CoverageError(
            f"task window starting {from_epoch_ms(s).isoformat()} begins {starts[0] - s} ms before "
            f"CI coverage at {series.intervals[0][0].isoformat()}"
        )
    idx = max(0, bisect.bisect_right(starts, s) - 1)
    weighted = []
    for j in range(idx, len(starts)):
        lo = s if j == 0 and clamp else max(s, starts[j])
        hi = e if j + 1 == len(starts) else min(e, starts[j + 1])
        if lo >= e:
            break
        if hi > lo:
            weighted.append((hi - lo) * series.intervals[j][1])
    return math.fsum(weighted) / (e - s)


def task_emissions(energy: TaskEnergy, start, complete, series: CiSeries, clamp: bool = False) -> TaskFootprint:
    mean_ci = window_mean_ci(series, start, complete, clamp=clamp)
    total = energy.total_kwh
    co2e = total * mean_ci
    avg_ci = co2e / total if total > 0 else mean_ci
    return TaskFootprint(energy.task_id, energy, co2e, avg_ci)


def workflow_emissions(footprints: list[TaskFootprint]) -> WorkflowFootprint:
    cpu = mem = total = co2e = 0.0
    for f in footprints:
        cpu += f.energy.cpu_kwh
        mem += f.energy.mem_kwh
        total += f.energy.total_kwh
        co2e += f.co2e_g
    return WorkflowFootprint(len(footprints), cpu, mem, total, co2e)
