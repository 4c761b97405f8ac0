"""Post-hoc energy and operational carbon estimates for Nextflow workflow traces."""
from .carbon import CiSeries, TaskFootprint, ci_at, parse_ci, task_emissions, workflow_emissions
from .energy import NodeSpec, TaskEnergy, estimate_task_energy, estimate_workflow_energy, task_load
from .errors import WattprintError
from .evaluate import compare_models, pct_error
from .power import (
    PowerModel,
    PowerReading,
    PowerReadingSet,
    fit_model,
    load_model,
    naive_linear,
    parse_readings,
    per_core_linear,
    predict_power,
    rmse,
    save_model,
    tdp_per_core,
)
from .trace import TraceTask, parse_duration, parse_memory, parse_timestamp, parse_trace

__version__ = "0.1.0"
