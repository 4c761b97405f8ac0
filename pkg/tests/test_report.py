import csv
import io
from datetime import date, datetime, timedelta, timezone

import pytest

from wattprint.carbon import TaskFootprint
from wattprint.energy import TaskEnergy
from wattprint.report import (
    TASK_COLUMNS,
    WorkflowSummary,
    output_paths,
    render_summary,
    render_task_trace,
    render_top10,
    write_reports,
)
from wattprint.trace import TraceTask

T0 = datetime(2024, 9, 26, 16, tzinfo=timezone.utc)


def task(task_id, realtime_ms=60_000, name="T", cpus=2, cpu_pct=150.0):
    return TraceTask(task_id, name, "COMPLETED", realtime_ms, cpu_pct, cpus, 0, T0, T0 + timedelta(milliseconds=realtime_ms))


def footprint(task_id, co2e, kwh=0.01, avg_ci=55.0):
    return TaskFootprint(task_id, TaskEnergy(task_id, kwh, 0.0), co2e, avg_ci)


def summary(**overrides):
    fields = dict(
        trace_path="rangeland.tsv", model="naive-linear [80, 55]", model_metadata="node=- governor=- date=-",
        ci="constant 394 gCO2e/kWh (average)", node="64 cores, 256 GiB installed, PUE 1", mem_coeff_w_per_gib=0.3725,
        total_kwh=30.51, cpu_kwh=30.2049, mem_kwh=0.3051, total_gco2e=30.51 * 394, task_count=3,
        wall_span=(T0, T0 + timedelta(hours=5)), generated_on=date(2025, 3, 1),
    )
    fields.update(overrides)
    return WorkflowSummary(**fields)


def test_summary_renders_totals():
    text = render_summary(summary())
    assert "30.510 kWh" in text
    assert "12020.940 gCO2e" in text
    assert "(99.0%)" in text and "(1.0%)" in text
    assert "generated: 2025-03-01" in text
    assert "(5h)" in text


def test_summary_zero_tasks():
    text = render_summary(summary(total_kwh=0.0, cpu_kwh=0.0, mem_kwh=0.0, total_gco2e=0.0, task_count=0, wall_span=None))
    assert "0 tasks" in text
    assert "0.000 kWh" in text
    assert "wall span:         n/a" in text


def test_summary_full_precision():
    assert repr(30.51 * 394) in render_summary(summary(), full_precision=True)


def test_summary_is_deterministic():
    assert render_summary(summary()) == render_summary(summary())


def test_task_trace_layout():
    t = task(58, 2576181, "DADA2_ERR", 6, 306.0)
    text = render_task_trace([footprint(58, 2.7421, 0.04412, 62.14)], [t])
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == TASK_COLUMNS == ("name", "id", "co2e", "energy", "avg_ci", "realtime", "cores", "usage")
    assert rows[1] == ["DADA2_ERR", "58", "2.742", "0.044", "62.1", "2576181", "6", "306.0"]
    assert text.endswith("\n") and "\r" not in text


def test_task_trace_empty_and_counts():
    assert render_task_trace([], []) == ",".join(TASK_COLUMNS) + "\n"
    tasks = [task(i) for i in range(7)]
    text = render_task_trace([footprint(i, 1.0) for i in range(7)], tasks)
    assert len(text.splitlines()) == 8


def test_mismatched_inputs_rejected():
    with pytest.raises(ValueError):
        render_task_trace([footprint(1, 1.0)], [task(2)])


def _section(text, label):
    rows = list(csv.DictReader(io.StringIO(text)))
    return [r for r in rows if r["ranking"] == label]


def test_top10_by_co2e_sort_oracle():
    co2 = [3.1, 0.2, 9.9, 4.4, 7.0, 0.5, 2.2, 8.8, 1.1, 6.6, 5.5, 0.9]
    tasks = [task(i, realtime_ms=1000 * (i + 1)) for i in range(12)]
    fps = [footprint(i, c) for i, c in enumerate(co2)]
    section = _section(render_top10(fps, tasks), "co2e")
    expected = sorted(range(12), key=lambda i: -co2[i])[:10]
    assert [int(r["id"]) for r in section] == expected
    assert [r["rank"] for r in section] == [str(k) for k in range(1, 11)]
    by_time = _section(render_top10(fps, tasks), "realtime")
    assert [int(r["id"]) for r in by_time] == list(range(11, 1, -1))


def test_top10_small_input():
    tasks = [task(i) for i in range(3)]
    text = render_top10([footprint(i, float(i)) for i in range(3)], tasks)
    assert len(_section(text, "co2e")) == 3
    assert len(_section(text, "realtime")) == 3


def test_top10_ties():
    tasks = [task(1), task(2), task(3)]
    fps = [footprint(1, 5.0, kwh=0.01), footprint(2, 5.0, kwh=0.02), footprint(3, 5.0, kwh=0.02)]
    section = _section(render_top10(fps, tasks), "co2e")
    assert [int(r["id"]) for r in section] == [2, 3, 1]


def test_write_reports(tmp_path):
    tasks = [task(1), task(2)]
    fps = [footprint(1, 1.0), footprint(2, 2.0)]
    paths = write_reports(tmp_path / "out", summary(trace_path="runs/ampliseq.txt", task_count=2), fps, tasks)
    assert paths == output_paths(tmp_path / "out", "ampliseq.txt")
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["summary_ampliseq.txt", "top_ampliseq.csv", "trace_ampliseq.csv"]
