"""The three output files: text summary, per-task trace CSV and top-10 rankings."""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from datetime import date, datetime

from .carbon import TaskFootprint
from .trace import TraceTask, format_duration, to_epoch_ms

TASK_COLUMNS = ("name", "id", "co2e", "energy", "avg_ci", "realtime", "cores", "usage")
TOP_COLUMNS = ("ranking", "rank") + TASK_COLUMNS
TOP_N = 10
PLACES = 3  # kWh and gCO2e, as in the per-task rows


@dataclass(frozen=True)
class WorkflowSummary:
    trace_path: str
    model: str
    model_metadata: str
    ci: str
    node: str
    mem_coeff_w_per_gib: float
    total_kwh: float
    cpu_kwh: float
    mem_kwh: float
    total_gco2e: float
    task_count: int
    wall_span: tuple[datetime, datetime] | None
    generated_on: date | None = None
    notes: tuple[str, ...] = field(default=())


def wall_span(tasks: list[TraceTask]) -> tuple[datetime, datetime] | None:
    if not tasks:
        return None
    return min(t.start for t in tasks), max(t.complete for t in tasks)


def _num(value: float, places: int, full_precision: bool) -> str:
    return repr(float(value)) if full_precision else f"{value:.{places}f}"


def render_summary(summary: WorkflowSummary, full_precision: bool = False) -> str:
    def pct(part):
        return 100.0 * part / summary.total_kwh if summary.total_kwh > 0 else 0.0

    def kwh(x):
        return f"{_num(x, PLACES, full_precision)} kWh"

    if summary.wall_span is None:
        span = "n/a"
    else:
        a, b = summary.wall_span
        span = f"{a.isoformat()} -> {b.isoformat()} ({format_duration(to_epoch_ms(b) - to_epoch_ms(a))})"
    noun = "task" if summary.task_count == 1 else "tasks"

    lines = ["Workflow carbon footprint summary"]
    if summary.generated_on is not None:
        lines.append(f"generated: {summary.generated_on.isoformat()}")
    lines += [
        "",
        "Inputs",
        f"  trace:             {summary.trace_path}",
        f"  tasks:             {summary.task_count} {noun}",
        f"  wall span:         {span}",
        f"  power model:       {summary.model}",
        f"  model metadata:    {summary.model_metadata}",
        f"  node:              {summary.node}",
        f"  memory coeff:      {summary.mem_coeff_w_per_gib:g} W/GiB",
        f"  carbon intensity:  {summary.ci}",
        "",
        "Totals",
        f"  energy:            {kwh(summary.total_kwh)}",
        f"  cpu energy:        {kwh(summary.cpu_kwh)} ({pct(summary.cpu_kwh):.1f}%)",
        f"  memory energy:     {kwh(summary.mem_kwh)} ({pct(summary.mem_kwh):.1f}%)",
        f"  emissions:         {_num(summary.total_gco2e, PLACES, full_precision)} gCO2e",
    ]
    if summary.notes:
        lines += ["", "Notes"] + [f"  - {n}" for n in summary.notes]
    return "\n".join(lines) + "\n"


def _task_row(fp: TaskFootprint, task: TraceTask, full_precision: bool) -> list[str]:
    return [
        task.name,
        str(task.task_id),
        _num(fp.co2e_g, PLACES, full_precision),
        _num(fp.energy.total_kwh, PLACES, full_precision),
        _num(fp.avg_ci, 1, full_precision),
        str(task.realtime_ms),
        str(task.cpus),
        _num(task.cpu_pct, 1, full_precision),
    ]


def _pairs(footprints, tasks):
    if len(footprints) != len(tasks):
        raise ValueError(f"{len(footprints)} footprints for {len(tasks)} tasks")
    for fp, task in zip(footprints, tasks):
        if fp.task_id != task.task_id:
            raise ValueError(f"footprint {fp.task_id} paired with task {task.task_id}")
    return list(zip(footprints, tasks))


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def render_task_trace(footprints: list[TaskFootprint], tasks: list[TraceTask], full_precision: bool = False) -> str:
    rows = [TASK_COLUMNS]
    rows += [_task_row(fp, t, full_precision) for fp, t in _pairs(footprints, tasks)]
    return _csv(rows)


def rank_by_co2e(pairs, n=TOP_N):
    return sorted(pairs, key=lambda p: (-p[0].co2e_g, -p[0].energy.total_kwh, p[1].task_id))[:n]


def rank_by_realtime(pairs, n=TOP_N):
    return sorted(pairs, key=lambda p: (-p[1].realtime_ms, p[1].task_id))[:n]


def render_top10(footprints: list[TaskFootprint], tasks: list[TraceTask], full_precision: bool = False) -> str:
    pairs = _pairs(footprints, tasks)
    rows = [TOP_COLUMNS]
    for label, ranked in (("co2e", rank_by_co2e(pairs)), ("realtime", rank_by_realtime(pairs))):
        for i, (fp, t) in enumerate(ranked, start=1):
            rows.append([label, str(i)] + _task_row(fp, t, full_precision))
    return _csv(rows)


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_summary(summary: WorkflowSummary, path, full_precision: bool = False) -> None:
    _write(path, render_summary(summary, full_precision))


def write_task_trace(footprints, tasks, path, full_precision: bool = False) -> None:
    _write(path, render_task_trace(footprints, tasks, full_precision))


def write_top10(footprints, tasks, path, full_precision: bool = False) -> None:
    _write(path, render_top10(footprints, tasks, full_precision))


def output_paths(out_dir, trace_path) -> dict[str, str]:
    stem = os.path.splitext(os.path.basename(str(trace_path)))[0]
    return {
        "summary": os.path.join(out_dir, f"summary_{stem}.txt"),
        "trace": os.path.join(out_dir, f"trace_{stem}.csv"),
        "top": os.path.join(out_dir, f"top_{stem}.csv"),
    }


def write_reports(out_dir, summary: WorkflowSummary, footprints, tasks, full_precision: bool = False) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = output_paths(out_dir, summary.trace_path)
    write_summary(summary, paths["summary"], full_precision)
    write_task_trace(footprints, tasks, paths["trace"], full_precision)
    write_top10(footprints, tasks, paths["top"], full_precision)
    return paths
