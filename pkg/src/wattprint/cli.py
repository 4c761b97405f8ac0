"""Command-line front end: ``fit``, ``estimate`` and ``evaluate``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from datetime import date, datetime, timezone

from . import power
from .carbon import parse_ci_value, read_ci, task_emissions, workflow_emissions
from .energy import NodeSpec, estimate_workflow_energy
from .errors import ConfigError, WattprintError
from .evaluate import EvaluationRow, compare_models, render_evaluation
from .report import WorkflowSummary, wall_span, write_reports
from .trace import read_trace, resolve_zone, select_tasks

log = logging.getLogger("wattprint")

MODEL_CHOICES = ("linear", "cubic", "naive", "per-core", "tdp", "auto")
OUT_DIR_ENV = "WATTPRINT_OUT_DIR"


def _add_model_args(p, multi=False):
    g = p.add_argument_group("power model")
    if not multi:
        g.add_argument("--model", choices=MODEL_CHOICES, default=None,
                       help="model variant (default: linear when fitting from readings)")
    g.add_argument("--readings", help="stress-test readings CSV")
    g.add_argument("--model-file", help="saved model JSON from `fit`")
    g.add_argument("--min-watts", type=float, help="node idle watts (naive model)")
    g.add_argument("--max-watts", type=float, help="node peak watts (naive model)")
    g.add_argument("--per-core-min", type=float, help="min watts per core")
    g.add_argument("--per-core-max", type=float, help="max watts per core")
    g.add_argument("--tdp", type=float, help="processor TDP in watts")
    g.add_argument("--cpu-cores", type=int, help="cores sharing the TDP")


def _add_node_args(p):
    g = p.add_argument_group("node")
    g.add_argument("--node-cores", type=int, help="total cores on the node")
    g.add_argument("--node-memory-gib", type=float, help="installed memory in GiB")
    g.add_argument("--pue", type=float, default=1.0)
    g.add_argument("--mem-coeff", type=float, default=None,
                   help=f"memory W per GiB (default {power.DEFAULT_MEM_W_PER_GIB})")


def _add_trace_args(p):
    p.add_argument("--trace", required=True, help="Nextflow trace TSV")
    p.add_argument("--all-statuses", action="store_true", help="keep tasks of every status, not only COMPLETED")
    p.add_argument("--timezone", default="UTC", help="zone of trace timestamps without offset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wattprint", description="Post-hoc energy and carbon estimates for workflow traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a power model to stress-test readings")
    fit.add_argument("--readings", required=True)
    fit.add_argument("--degree", type=int, choices=sorted(power.DEGREES), default=1)
    fit.add_argument("--out", required=True, help="model JSON to write")
    fit.add_argument("--node-cores", type=int)
    fit.add_argument("--node-memory-gib", type=float, help="derive a memory coefficient from the readings")

    est = sub.add_parser("estimate", help="estimate energy and emissions for a trace")
    _add_trace_args(est)
    _add_model_args(est)
    _add_node_args(est)
    ci = est.add_mutually_exclusive_group(required=True)
    ci.add_argument("--ci", help="carbon-intensity CSV (start,ci_g_per_kwh)")
    ci.add_argument("--ci-constant", type=float, help="constant carbon intensity in gCO2e/kWh")
    est.add_argument("--ci-signal", choices=("average", "marginal", "unspecified"), default=None)
    est.add_argument("--ci-clamp", action="store_true", help="use the first CI interval for times before coverage")
    est.add_argument("--out-dir", default=None, help=f"output directory (fallback ${OUT_DIR_ENV}, then cwd)")
    est.add_argument("--full-precision", action="store_true")

    ev = sub.add_parser("evaluate", help="compare model estimates with measured energy")
    _add_trace_args(ev)
    _add_model_args(ev, multi=True)
    _add_node_args(ev)
    ev.add_argument("--truth-kwh", type=float, required=True, help="measured energy for the run")
    ev.add_argument("--label", default=None, help="row label prefix (default node/governor from readings)")
    ev.add_argument("--out", default=None, help="CSV path (default stdout)")
    return parser


def _model_sources(args) -> list[str]:
    pairs = {
        "readings": (args.readings,),
        "model-file": (args.model_file,),
        "min/max watts": (args.min_watts, args.max_watts),
        "per-core": (args.per_core_min, args.per_core_max),
        "tdp": (args.tdp, args.cpu_cores),
    }
    flags = {
        "min/max watts": "--min-watts and --max-watts",
        "per-core": "--per-core-min and --per-core-max",
        "tdp": "--tdp and --cpu-cores",
    }
    found = []
    for name, values in pairs.items():
        given = [v is not None for v in values]
        if any(given) and not all(given):
            raise ConfigError(f"{flags[name]} must be given together")
        if all(given):
            found.append(name)
    return found


_SOURCE_VARIANTS = {
    "min/max watts": ("naive",),
    "per-core": ("per-core",),
    "tdp": ("tdp",),
    "readings": ("linear", "cubic", "naive", "auto"),
}


_CHOICE_VARIANTS = {
    "linear": power.FITTED_LINEAR,
    "cubic": power.FITTED_CUBIC,
    "naive": power.NAIVE_LINEAR,
    "per-core": power.PER_CORE_LINEAR,
    "tdp": power.TDP_PER_CORE,
    "auto": None,
}


def resolve_model(args, node_cores=None) -> tuple[power.PowerModel, power.PowerReadingSet | None]:
    sources = _model_sources(args)
    if len(sources) != 1:
        given = ", ".join(sources) if sources else "none"
        raise ConfigError(
            "exactly one power model source is required (--readings, --model-file, "
            f"--min/--max-watts, --per-core-min/--per-core-max, --tdp/--cpu-cores); given: {given}"
        )
    source = sources[0]
    choice = args.model
    if source == "model-file":
        model = power.read_model(args.model_file)
        if choice is not None and _CHOICE_VARIANTS[choice] not in (None, model.variant):
            raise ConfigError(f"--model {choice} conflicts with the {model.variant} model in {args.model_file}")
        return model, None
    allowed = _SOURCE_VARIANTS[source]
    if choice is None:
        choice = allowed[0]
    if choice not in allowed:
        raise ConfigError(f"--model {choice} cannot be built from {source}; use one of {', '.join(allowed)}")
    if source == "min/max watts":
        return power.naive_linear(min_watts=args.min_watts, max_watts=args.max_watts, node_cores=node_cores), None
    if source == "per-core":
        return power.per_core_linear(args.per_core_min, args.per_core_max), None
    if source == "tdp":
        return power.tdp_per_core(args.tdp, args.cpu_cores), None
    readings = power.read_readings(args.readings)
    if choice == "naive":
        return power.naive_linear(readings, node_cores=node_cores), readings
    if choice == "auto":
        return power.select_best(readings, node_cores), readings
    return power.fit_model(readings, 1 if choice == "linear" else 3, node_cores), readings


def resolve_node(args, model: power.PowerModel, tasks) -> NodeSpec:
    cores = args.node_cores or model.node_cores
    if cores is None:
        if model.is_node_level:
            raise ConfigError(f"--node-cores is required for the {model.variant} model")
        cores = max((t.cpus for t in tasks), default=1)
    return NodeSpec(cores, installed_memory_gib=args.node_memory_gib, pue=args.pue)


def resolve_mem_coeff(args, model, readings) -> float:
    if args.mem_coeff is not None:
        if args.mem_coeff < 0:
            raise ConfigError("--mem-coeff must be non-negative")
        return args.mem_coeff
    if readings is not None and args.node_memory_gib:
        derived = power.memory_coefficient(readings, args.node_memory_gib)
        if derived is not None:
            return derived
    if model.mem_w_per_gib is not None:
        return model.mem_w_per_gib
    return power.DEFAULT_MEM_W_PER_GIB


def _load_tasks(args):
    tz = resolve_zone(args.timezone)
    tasks = select_tasks(read_trace(args.trace, tz=tz), all_statuses=args.all_statuses)
    hosts = {t.hostname for t in tasks if t.hostname}
    if len(hosts) > 1:
        log.warning("trace spans %d hosts; estimating all of them with one power model", len(hosts))
    return tasks, hosts


def _metadata(model) -> str:
    parts = [
        f"node={model.node or '-'}",
        f"governor={model.governor or '-'}",
        f"date={model.taken_at.isoformat() if model.taken_at else '-'}",
    ]
    return " ".join(parts)


def _describe_node(node: NodeSpec) -> str:
    mem = f"{node.installed_memory_gib:g} GiB installed" if node.installed_memory_gib else "memory unspecified"
    return f"{node.total_cores} cores, {mem}, PUE {node.pue:g}"


def _run_date(today):
    if today is not None:
        return today
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).date()
    return date.today()


def cmd_fit(args) -> int:
    readings = power.read_readings(args.readings)
    model = power.fit_model(readings, args.degree, node_cores=args.node_cores)
    if args.node_memory_gib:
        coeff = power.memory_coefficient(readings, args.node_memory_gib)
        if coeff is not None:
            model = dataclasses.replace(model, mem_w_per_gib=coeff)
    power.write_model(model, args.out)
    print(f"wrote {model.describe()} to {args.out}")
    print(f"rmse {model.variant}: {power.rmse(model, readings):.4f} W")
    for variant, value in compare_models(readings).items():
        print(f"  {variant:<14} rmse {value:.4f} W")
    return 0


def cmd_estimate(args, today=None) -> int:
    if args.pue < 1.0:
        raise ConfigError("--pue must be >= 1.0")
    tasks, hosts = _load_tasks(args)
    model, readings = resolve_model(args, node_cores=args.node_cores)
    node = resolve_node(args, model, tasks)
    mem_coeff = resolve_mem_coeff(args, model, readings)
    if args.ci is not None:
        series = read_ci(args.ci, signal=args.ci_signal)
    else:
        series = parse_ci_value(args.ci_constant, signal=args.ci_signal or "unspecified")

    energy = estimate_workflow_energy(tasks, model, node, mem_coeff)
    footprints = [
        task_emissions(e, t.start, t.complete, series, clamp=args.ci_clamp)
        for e, t in zip(energy.tasks, tasks)
    ]
    totals = workflow_emissions(footprints)

    notes = []
    if model.is_node_level:
        notes.append("idle power is apportioned to tasks by their share of requested cores")
    if model.variant == power.FITTED_CUBIC:
        notes.append("cubic model: each task's dynamic power is evaluated as if it ran alone on the node")
    if len(hosts) > 1:
        notes.append(f"trace spans {len(hosts)} hosts; one power model was applied to all of them")

    summary = WorkflowSummary(
        trace_path=args.trace,
        model=model.describe(),
        model_metadata=_metadata(model),
        ci=series.describe(),
        node=_describe_node(node),
        mem_coeff_w_per_gib=mem_coeff,
        total_kwh=totals.total_kwh,
        cpu_kwh=totals.cpu_kwh,
        mem_kwh=totals.mem_kwh,
        total_gco2e=totals.co2e_g,
        task_count=totals.task_count,
        wall_span=wall_span(tasks),
        generated_on=_run_date(today),
        notes=tuple(notes),
    )
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    paths = write_reports(out_dir, summary, footprints, tasks, full_precision=args.full_precision)
    print(f"{totals.task_count} tasks: {totals.total_kwh:.3f} kWh, {totals.co2e_g:.3f} gCO2e")
    for path in paths.values():
        print(f"wrote {path}")
    return 0


def cmd_evaluate(args) -> int:
    tasks, _ = _load_tasks(args)
    if args.truth_kwh <= 0:
        raise ConfigError("--truth-kwh must be positive")
    models = []
    readings = None
    if args.readings:
        readings = power.read_readings(args.readings)
        models += [
            power.naive_linear(readings, node_cores=args.node_cores),
            power.fit_model(readings, 1, args.node_cores),
            power.fit_model(readings, 3, args.node_cores),
        ]
    if args.model_file:
        models.append(power.read_model(args.model_file))
    pairs = _model_sources(args)
    if "min/max watts" in pairs:
        models.append(power.naive_linear(min_watts=args.min_watts, max_watts=args.max_watts, node_cores=args.node_cores))
    if "per-core" in pairs:
        models.append(power.per_core_linear(args.per_core_min, args.per_core_max))
    if "tdp" in pairs:
        models.append(power.tdp_per_core(args.tdp, args.cpu_cores))
    if not models:
        raise ConfigError("evaluate needs at least one power model source")

    if args.label is not None:
        prefix = args.label
    elif readings is not None:
        prefix = f"{readings.node or '-'}/{readings.governor or '-'}"
    else:
        prefix = "-"
    rows = []
    for model in models:
        node = resolve_node(args, model, tasks)
        mem_coeff = resolve_mem_coeff(args, model, readings)
        estimate = estimate_workflow_energy(tasks, model, node, mem_coeff).total_kwh
        rows.append(EvaluationRow(f"{prefix}/{model.variant}", estimate, args.truth_kwh))
    text = render_evaluation(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None, today=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="warning: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "estimate":
            return cmd_estimate(args, today=today)
        return cmd_evaluate(args)
    except ConfigError as exc:
        print(f"wattprint: error: {exc}", file=sys.stderr)
        return 2
    except (WattprintError, ValueError, OSError) as exc:
        print(f"wattprint: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
