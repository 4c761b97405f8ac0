"""Nextflow trace ingestion.

Reads the tab-separated trace Nextflow writes with ``trace.enabled = true`` and
normalises every cell to base units: milliseconds, bytes, percent and UTC
datetimes. Both the raw (``trace.raw = true``) and the human-readable cell
formats are accepted, and may be mixed within one file.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .errors import ConfigError, TraceParseError

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

# canonical field -> default header name
DEFAULT_COLUMNS = {
    "task_id": "task_id",
    "name": "name",
    "status": "status",
    "realtime": "realtime",
    "cpu_pct": "%cpu",
    "cpus": "cpus",
    "memory": "memory",
    "start": "start",
    "complete": "complete",
}
REQUIRED_FIELDS = ("task_id", "name", "realtime", "cpu_pct", "cpus", "start", "complete")
MEMORY_FALLBACKS = ("peak_rss", "rss")
HOST_COLUMN = "hostname"

DEFAULT_STATUSES = frozenset({"COMPLETED"})

# Nextflow's placeholder for an unavailable metric
MISSING = {"-", ""}

_DURATION_UNITS_MS = {"ms": 1, "s": 1_000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}
_DURATION_TOKEN = re.compile(r"(\d+(?:\.\d+)?)\s*(ms|s|m|h|d)(?![a-z])")
_MEMORY_UNITS = {"B": 1, "KB": 2**10, "MB": 2**20, "GB": 2**30, "TB": 2**40}
_MEMORY = re.compile(r"^(\d+(?:\.\d+)?)\s*([A-Za-z]+)$")

# allowed overshoot of realtime beyond the start..complete window (clock granularity)
REALTIME_SLACK_MS = 1_000


@dataclass(frozen=True)
class TraceTask:
    task_id: int
    name: str
    status: str
    realtime_ms: int
    cpu_pct: float
    cpus: int
    memory_bytes: int
    start: datetime
    complete: datetime
    hostname: str | None = None

    def __post_init__(self):
        if self.realtime_ms < 0:
            raise ValueError(f"realtime must be non-negative, got {self.realtime_ms}")
        if self.cpu_pct < 0:
            raise ValueError(f"%cpu must be non-negative, got {self.cpu_pct}")
        if self.cpus < 1:
            raise ValueError(f"cpus must be >= 1, got {self.cpus}")
        if self.memory_bytes < 0:
            raise ValueError(f"memory must be non-negative, got {self.memory_bytes}")
        if self.complete < self.start:
            raise ValueError("complete is earlier than start")
        if self.realtime_ms > self.window_ms + REALTIME_SLACK_MS:
            raise ValueError(
                f"realtime {self.realtime_ms} ms exceeds the start..complete window "
                f"of {self.window_ms} ms"
            )

    @property
    def window_ms(self) -> int:
        return to_epoch_ms(self.complete) - to_epoch_ms(self.start)


def to_epoch_ms(t: datetime) -> int:
    delta = t - EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1_000 + delta.microseconds // 1_000


def from_epoch_ms(ms: int) -> datetime:
    return EPOCH + timedelta(milliseconds=ms)


def parse_duration(text: str) -> int:
    """Parse ``"2576181"``, ``"0ms"`` or ``"1h 2m 3s"`` into milliseconds."""
    s = text.strip()
    if not s:
        raise ValueError("empty duration")
    if s.isdigit():
        return int(s)
    pos = 0
    total = 0.0
    for match in _DURATION_TOKEN.finditer(s):
        if s[pos:match.start()].strip():
            break
        value, unit = match.groups()
        total += float(value) * _DURATION_UNITS_MS[unit]
        pos = match.end()
    if pos == 0 or s[pos:].strip():
        raise ValueError(f"unparsable duration {text!r}")
    return int(round(total))


def format_duration(ms: int) -> str:
    """Canonical ``"Xh Ym Zs Wms"`` form; inverse of :func:`parse_duration`."""
    if ms < 0:
        raise ValueError("negative duration")
    if ms == 0:
        return "0ms"
    parts = []
    for unit in ("h", "m", "s", "ms"):
        size = _DURATION_UNITS_MS[unit]
        count, ms = divmod(ms, size)
        if count:
            parts.append(f"{count}{unit}")
    return " ".join(parts)


def parse_memory(text: str) -> int:
    """Bytes from ``"68719476736"`` or ``"64 GB"``; units are binary (1 GB = 2**30)."""
    s = text.strip()
    if s.isdigit():
        return int(s)
    match = _MEMORY.match(s)
    if not match:
        raise ValueError(f"unparsable memory {text!r}")
    value, unit = match.groups()
    try:
        factor = _MEMORY_UNITS[unit.upper()]
    except KeyError:
        raise ValueError(f"unknown memory unit {unit!r}") from None
    return int(round(float(value) * factor))


def format_memory(n_bytes: int) -> str:
    for unit in ("TB", "GB", "MB", "KB"):
        size = _MEMORY_UNITS[unit]
        if n_bytes >= size and n_bytes % size == 0:
            return f"{n_bytes // size} {unit}"
    return f"{n_bytes} B"


def parse_cpu_pct(text: str) -> float:
    s = text.strip().removesuffix("%").strip()
    value = float(s)
    if value < 0 or value != value:
        raise ValueError(f"invalid %cpu {text!r}")
    return value


def resolve_zone(name: str | None):
    if name is None or name.upper() == "UTC":
        return timezone.utc
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError):
        raise ConfigError(f"unknown timezone {name!r}") from None


def parse_timestamp(text: str, tz=timezone.utc) -> datetime:
    """Epoch milliseconds or ``yyyy-MM-dd HH:mm:ss.SSS`` (wall time in ``tz``) to UTC."""
    s = text.strip()
    if s.isdigit():
        return from_epoch_ms(int(s))
    for fmt in ("%Y-%m-%d %H:%M:%S.%f", "%Y-%m-%d %H:%M:%S"):
        try:
            naive = datetime.strptime(s, fmt)
        except ValueError:
            continue
        local = naive.replace(tzinfo=tz)
        utc = local.astimezone(timezone.utc)
        # truncate to millisecond resolution
        return utc.replace(microsecond=utc.microsecond // 1000 * 1000)
    raise ValueError(f"unparsable timestamp {text!r}")


def parse_trace(raw_text: str, columns: dict[str, str] | None = None, tz=timezone.utc) -> list[TraceTask]:
    """Parse every data row of a trace into a :class:`TraceTask`, in file order.

    ``columns`` maps canonical field names (see ``DEFAULT_COLUMNS``) to the
    header names used by this particular trace. Rows are not filtered here;
    use :func:`select_tasks` for the status filter.
    """
    mapping = dict(DEFAULT_COLUMNS)
    if columns:
        unknown = set(columns) - set(mapping) - set(MEMORY_FALLBACKS)
        if unknown:
            raise ConfigError(f"unknown trace field(s) in column mapping: {sorted(unknown)}")
        mapping.update(columns)

    if not raw_text.strip():
        raise TraceParseError("trace file is empty")
    reader = csv.reader(io.StringIO(raw_text), delimiter="\t")
    header = [h.strip() for h in next(reader)]
    index = {h: i for i, h in enumerate(header)}

    for field in REQUIRED_FIELDS:
        if mapping[field] not in index:
            raise ConfigError(f"trace is missing required column {mapping[field]!r} ({field})")
    mem_cols = [c for c in (mapping["memory"], *[mapping.get(f, f) for f in MEMORY_FALLBACKS]) if c in index]
    status_col = index.get(mapping["status"])
    host_col = index.get(HOST_COLUMN)

    tasks = []
    for row_no, row in enumerate(reader, start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise TraceParseError(f"expected {len(header)} cells, found {len(row)}", row=row_no)

        def cell(field):
            return row[index[mapping[field]]].strip()

        def parse(field, fn, missing=None):
            token = cell(field)
            if token in MISSING and missing is not None:
                return missing
            try:
                return fn(token)
            except ValueError as exc:
                raise TraceParseError(f"bad {mapping[field]!r} value {token!r}: {exc}", row=row_no, token=token) from None

        memory = 0
        for col in mem_cols:
            token = row[index[col]].strip()
            if token in MISSING:
                continue
            try:
                memory = parse_memory(token)
            except ValueError as exc:
                raise TraceParseError(f"bad {col!r} value {token!r}: {exc}", row=row_no, token=token) from None
            break

        try:
            task = TraceTask(
                task_id=parse("task_id", int),
                name=cell("name"),
                status=row[status_col].strip() if status_col is not None else "COMPLETED",
                realtime_ms=parse("realtime", parse_duration, missing=0),
                cpu_pct=parse("cpu_pct", parse_cpu_pct, missing=0.0),
                cpus=parse("cpus", int),
                memory_bytes=memory,
                start=parse("start", lambda t: parse_timestamp(t, tz)),
                complete=parse("complete", lambda t: parse_timestamp(t, tz)),
                hostname=row[host_col].strip() if host_col is not None else None,
            )
        except TraceParseError:
            raise
        except ValueError as exc:
            raise TraceParseError(str(exc), row=row_no) from None
        tasks.append(task)
    return tasks


def select_tasks(tasks: list[TraceTask], all_statuses: bool = False) -> list[TraceTask]:
    """Default filter keeps COMPLETED tasks only (CACHED tasks did not run)."""
    if all_statuses:
        return list(tasks)
    return [t for t in tasks if t.status in DEFAULT_STATUSES]


def read_trace(path, columns=None, tz=timezone.utc) -> list[TraceTask]:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read(), columns=columns, tz=tz)
