"""Per-task CPU and memory energy from trace usage and a power model."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .power import (
    DEFAULT_MEM_W_PER_GIB,
    FITTED_CUBIC,
    PER_CORE_LINEAR,
    TDP_PER_CORE,
    PowerModel,
    predict_power,
)
from .trace import TraceTask

log = logging.getLogger(__name__)

# watt-milliseconds per kWh
MS_PER_KWH = 3.6e9
GIB = 2**30


@dataclass(frozen=True)
class NodeSpec:
    total_cores: int
    installed_memory_gib: float | None = None
    pue: float = 1.0

    def __post_init__(self):
        if self.total_cores < 1:
            raise ValueError("total_cores must be >= 1")
        if self.pue < 1.0:
            raise ValueError(f"pue must be >= 1.0, got {self.pue}")
        if self.installed_memory_gib is not None and self.installed_memory_gib <= 0:
            raise ValueError("installed memory must be positive")


@dataclass(frozen=True)
class TaskEnergy:
    task_id: int
    cpu_kwh: float
    mem_kwh: float

    @property
    def total_kwh(self) -> float:
        return self.cpu_kwh + self.mem_kwh


@dataclass(frozen=True)
class WorkflowEnergy:
    tasks: list[TaskEnergy]
    cpu_kwh: float
    mem_kwh: float
    total_kwh: float

    @property
    def cpu_share_pct(self) -> float:
        return 100.0 * self.cpu_kwh / self.total_kwh if self.total_kwh > 0 else 0.0

    @property
    def mem_share_pct(self) -> float:
        return 100.0 * self.mem_kwh / self.total_kwh if self.total_kwh > 0 else 0.0


def task_load(task: TraceTask, node: NodeSpec) -> float:
    """Share of the node's CPU capacity the task kept busy, in [0, 1]."""
    return min(1.0, task.cpu_pct / (100.0 * node.total_cores))


def core_utilisation(task: TraceTask) -> float:
    """Mean utilisation of each requested core, in [0, 1]."""
    return min(1.0, max(0.0, task.cpu_pct / (100.0 * task.cpus)))


def cpu_watts(task: TraceTask, model: PowerModel, node: NodeSpec) -> float:
    if model.variant == PER_CORE_LINEAR:
        lo, hi = model.coefficients
        return task.cpus * (lo + core_utilisation(task) * (hi - lo))
    if model.variant == TDP_PER_CORE:
        tdp, cores = model.coefficients
        return task.cpus * (tdp / cores) * core_utilisation(task)

    cpus = task.cpus
    if cpus > node.total_cores:
        log.warning("task %s requests %d cpus on a %d-core node; clamping", task.task_id, cpus, node.total_cores)
        cpus = node.total_cores
    idle_share = cpus / node.total_cores
    load = task_load(task, node)
    p0 = model.coefficients[0]
    if model.variant == FITTED_CUBIC:
        # dynamic part as if the task ran alone on the node
        dynamic = predict_power(model, load) - predict_power(model, 0.0)
    else:
        dynamic = model.coefficients[1] * load
    return max(0.0, p0 * idle_share + dynamic)


def estimate_task_energy(task: TraceTask, model: PowerModel, node: NodeSpec,
                         mem_coeff_w_per_gib: float = DEFAULT_MEM_W_PER_GIB) -> TaskEnergy:
    if task.realtime_ms < 0 or task.cpu_pct < 0 or task.memory_bytes < 0:
        raise ValueError(f"task {task.task_id} has negative usage values")
    if mem_coeff_w_per_gib < 0:
        raise ValueError("memory coefficient must be non-negative")
    cpu_kwh = cpu_watts(task, model, node) * task.realtime_ms / MS_PER_KWH * node.pue
    mem_watts = task.memory_bytes / GIB * mem_coeff_w_per_gib
    mem_kwh = mem_watts * task.realtime_ms / MS_PER_KWH * node.pue
    return TaskEnergy(task.task_id, cpu_kwh, mem_kwh)


def sum_energy(tasks: list[TaskEnergy]) -> WorkflowEnergy:
    cpu = mem = total = 0.0
    # plain left-to-right sums so totals are reproducible in input order
    for t in tasks:
        cpu += t.cpu_kwh
        mem += t.mem_kwh
        total += t.total_kwh
    return WorkflowEnergy(list(tasks), cpu, mem, total)


def estimate_workflow_energy(tasks: list[TraceTask], model: PowerModel, node: NodeSpec,
                             mem_coeff_w_per_gib: float = DEFAULT_MEM_W_PER_GIB) -> WorkflowEnergy:
    return sum_energy([estimate_task_energy(t, model, node, mem_coeff_w_per_gib) for t in tasks])
