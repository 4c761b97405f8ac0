"""Node power models.

Stress-test readings are (load, watts) pairs taken at fixed CPU load levels,
11 of them by default (0%, 10%, ..., 100%). From those we fit ordinary least
squares polynomials of degree 1 or 3, or build the fallbacks used when no
readings exist: a line between idle and peak watts, a per-core min/max line,
or a TDP share per core.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import FitError, ModelError, ReadingsError

FITTED_LINEAR = "fitted-linear"
FITTED_CUBIC = "fitted-cubic"
NAIVE_LINEAR = "naive-linear"
PER_CORE_LINEAR = "per-core-linear"
TDP_PER_CORE = "tdp-per-core"

VARIANTS = (FITTED_LINEAR, FITTED_CUBIC, NAIVE_LINEAR, PER_CORE_LINEAR, TDP_PER_CORE)
NODE_LEVEL = (FITTED_LINEAR, FITTED_CUBIC, NAIVE_LINEAR)
N_COEFFICIENTS = {
    FITTED_LINEAR: 2,
    FITTED_CUBIC: 4,
    NAIVE_LINEAR: 2,
    PER_CORE_LINEAR: 2,
    TDP_PER_CORE: 2,
}
DEGREES = {1: FITTED_LINEAR, 3: FITTED_CUBIC}

# W per GiB of allocated memory when no readings supply a coefficient
DEFAULT_MEM_W_PER_GIB = 0.3725


@dataclass(frozen=True)
class PowerReading:
    load_fraction: float
    cpu_watts: float
    mem_watts: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.load_fraction <= 1.0:
            raise ReadingsError(f"load {self.load_fraction} outside [0, 1]")
        if not self.cpu_watts > 0:
            raise ReadingsError(f"cpu watts must be positive, got {self.cpu_watts}")
        if self.mem_watts is not None and self.mem_watts < 0:
            raise ReadingsError(f"memory watts must be non-negative, got {self.mem_watts}")


@dataclass(frozen=True)
class PowerReadingSet:
    readings: tuple[PowerReading, ...]
    node: str | None = None
    governor: str | None = None
    taken_at: date | None = None

    def __post_init__(self):
        if len(self.readings) < 2:
            raise ReadingsError("need at least 2 readings")
        loads = [r.load_fraction for r in self.readings]
        if any(b <= a for a, b in zip(loads, loads[1:])):
            if len(set(loads)) != len(loads):
                raise ReadingsError("duplicate load values in readings")
            raise ReadingsError("readings must be sorted by load")
        if loads[0] != 0.0 or loads[-1] != 1.0:
            raise ReadingsError("readings must span 0% and 100%")

    @classmethod
    def from_pairs(cls, pairs, **meta) -> "PowerReadingSet":
        """Build from (load_fraction, cpu_watts) pairs in any order."""
        readings = sorted((PowerReading(float(l), float(w)) for l, w in pairs), key=lambda r: r.load_fraction)
        return cls(tuple(readings), **meta)

    @property
    def loads(self) -> np.ndarray:
        return np.array([r.load_fraction for r in self.readings])

    @property
    def watts(self) -> np.ndarray:
        return np.array([r.cpu_watts for r in self.readings])


@dataclass(frozen=True)
class PowerModel:
    """A load -> watts mapping.

    Coefficients by variant: ``[p0, p1]`` for the two linear node models,
    ``[p0, p1, p2, p3]`` for the cubic, ``[min_w_per_core, max_w_per_core]``
    for per-core-linear and ``[tdp_watts, cpu_core_count]`` for tdp-per-core.
    """

    variant: str
    coefficients: tuple[float, ...]
    node_cores: int | None = None
    node: str | None = None
    governor: str | None = None
    taken_at: date | None = None
    mem_w_per_gib: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown model variant {self.variant!r}; expected one of {list(VARIANTS)}")
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) != N_COEFFICIENTS[self.variant]:
            raise ModelError(
                f"{self.variant} needs {N_COEFFICIENTS[self.variant]} coefficients, got {len(coeffs)}"
            )
        if not all(math.isfinite(c) for c in coeffs):
            raise ModelError("coefficients must be finite")
        if self.variant == PER_CORE_LINEAR:
            lo, hi = coeffs
            if not (lo > 0 and hi >= lo):
                raise ModelError("per-core model needs 0 < min <= max watts per core")
        if self.variant == TDP_PER_CORE:
            tdp, cores = coeffs
            if not (tdp > 0 and cores > 0):
                raise ModelError("tdp model needs positive TDP and core count")
        if self.node_cores is not None and self.node_cores < 1:
            raise ModelError("node_cores must be a positive integer")
        if self.mem_w_per_gib is not None and self.mem_w_per_gib < 0:
            raise ModelError("memory coefficient must be non-negative")

    @property
    def is_node_level(self) -> bool:
        return self.variant in NODE_LEVEL

    def describe(self) -> str:
        coeffs = ", ".join(f"{c:.6g}" for c in self.coefficients)
        return f"{self.variant} [{coeffs}]"


def parse_readings(raw_text: str) -> PowerReadingSet:
    """Parse a readings CSV (``load_pct,cpu_watts[,mem_watts]``).

    Leading ``# key=value`` comment lines carry node, governor and date.
    """
    meta = {}
    body = []
    for line in raw_text.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            key, sep, value = stripped.lstrip("#").partition("=")
            if sep:
                meta[key.strip().lower()] = value.strip()
        elif stripped:
            body.append(stripped)
    if not body:
        raise ReadingsError("readings file has no header")

    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    fields = rows[0].keys() if rows else csv.DictReader(io.StringIO(body[0])).fieldnames or []
    for required in ("load_pct", "cpu_watts"):
        if required not in fields:
            raise ReadingsError(f"readings file is missing column {required!r}")

    readings = []
    for line_no, row in enumerate(rows, start=2):
        try:
            load = float(row["load_pct"]) / 100.0
            cpu = float(row["cpu_watts"])
            mem_cell = (row.get("mem_watts") or "").strip()
            mem = float(mem_cell) if mem_cell else None
        except (TypeError, ValueError):
            raise ReadingsError(f"non-numeric cell in readings row {line_no}: {row}") from None
        readings.append(PowerReading(load, cpu, mem))

    readings.sort(key=lambda r: r.load_fraction)
    loads = [r.load_fraction for r in readings]
    if len(set(loads)) != len(loads):
        raise ReadingsError("duplicate load values in readings")
    if not loads or loads[0] != 0.0 or loads[-1] != 1.0:
        raise ReadingsError("readings must span 0% and 100%")

    taken_at = None
    if "date" in meta:
        try:
            taken_at = date.fromisoformat(meta["date"])
        except ValueError:
            raise ReadingsError(f"bad date {meta['date']!r}; expected YYYY-MM-DD") from None
    return PowerReadingSet(tuple(readings), node=meta.get("node"), governor=meta.get("governor"), taken_at=taken_at)


def read_readings(path) -> PowerReadingSet:
    with open(path, encoding="utf-8") as fh:
        return parse_readings(fh.read())


def fit_model(readings: PowerReadingSet, degree: int, node_cores: int | None = None) -> PowerModel:
    """Least-squares polynomial fit of cpu watts against load, degree 1 or 3."""
    if degree not in DEGREES:
        raise FitError(f"degree must be one of {sorted(DEGREES)}, got {degree}")
    x, y = readings.loads, readings.watts
    if len(x) <= degree:
        raise FitError(f"degree {degree} fit needs more than {degree} readings, got {len(x)}")
    design = np.vander(x, degree + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < degree + 1:
        raise FitError("degenerate readings: design matrix is rank deficient")
    return PowerModel(
        DEGREES[degree],
        tuple(coeffs),
        node_cores=node_cores,
        node=readings.node,
        governor=readings.governor,
        taken_at=readings.taken_at,
    )


def naive_linear(readings: PowerReadingSet | None = None, *, min_watts=None, max_watts=None,
                 node_cores: int | None = None) -> PowerModel:
    """Line through the idle and peak readings, or through user-supplied min/max watts."""
    if readings is not None:
        by_load = {r.load_fraction: r.cpu_watts for r in readings.readings}
        idle, peak = by_load[0.0], by_load[1.0]
        meta = dict(node=readings.node, governor=readings.governor, taken_at=readings.taken_at)
    else:
        if min_watts is None or max_watts is None:
            raise ModelError("naive model needs readings or both min and max watts")
        idle, peak = float(min_watts), float(max_watts)
        if idle < 0 or peak < 0:
            raise ModelError("min/max watts must be non-negative")
        meta = {}
    return PowerModel(NAIVE_LINEAR, (idle, peak - idle), node_cores=node_cores, **meta)


def per_core_linear(min_w_per_core: float, max_w_per_core: float) -> PowerModel:
    return PowerModel(PER_CORE_LINEAR, (min_w_per_core, max_w_per_core))


def tdp_per_core(tdp_watts: float, cpu_core_count: int) -> PowerModel:
    return PowerModel(TDP_PER_CORE, (tdp_watts, cpu_core_count))


def _polyval(coeffs, load):
    total = 0.0
    for c in reversed(coeffs):
        total = total * load + c
    return total


def predict_power(model: PowerModel, load_fraction: float) -> float:
    """Node watts at ``load_fraction`` (clamped into [0, 1]); never negative."""
    if not model.is_node_level:
        raise ModelError(f"{model.variant} needs per-task core context; use the energy module")
    load = min(1.0, max(0.0, float(load_fraction)))
    return max(0.0, _polyval(model.coefficients, load))


def rmse(model: PowerModel, readings: PowerReadingSet) -> float:
    errors = [predict_power(model, r.load_fraction) - r.cpu_watts for r in readings.readings]
    return math.sqrt(math.fsum(e * e for e in errors) / len(errors))


def memory_coefficient(readings: PowerReadingSet, installed_gib: float) -> float | None:
    """Mean memory watts per installed GiB, or None if the readings carry no memory column."""
    values = [r.mem_watts for r in readings.readings if r.mem_watts is not None]
    if not values:
        return None
    if installed_gib <= 0:
        raise ValueError("installed memory must be positive")
    return math.fsum(values) / len(values) / installed_gib


def select_best(readings: PowerReadingSet, node_cores: int | None = None) -> PowerModel:
    """Fitted model with the lowest RMSE on its own readings; linear wins ties."""
    candidates = [fit_model(readings, 1, node_cores)]
    if len(readings.readings) > 3:
        candidates.append(fit_model(readings, 3, node_cores))
    return min(candidates, key=lambda m: rmse(m, readings))


def model_to_dict(model: PowerModel) -> dict:
    doc = {
        "variant": model.variant,
        "coefficients": list(model.coefficients),
        "node_cores": model.node_cores,
        "node": model.node,
        "governor": model.governor,
        "date": model.taken_at.isoformat() if model.taken_at else None,
    }
    if model.mem_w_per_gib is not None:
        doc["mem_w_per_gib"] = model.mem_w_per_gib
    return doc


def save_model(model: PowerModel) -> str:
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def load_model(document: str) -> PowerModel:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    for key in ("variant", "coefficients"):
        if key not in doc:
            raise ModelError(f"model document is missing {key!r}")
    if not isinstance(doc["coefficients"], list):
        raise ModelError("coefficients must be a list")
    taken_at = None
    if doc.get("date"):
        try:
            taken_at = date.fromisoformat(doc["date"])
        except (TypeError, ValueError):
            raise ModelError(f"bad date {doc['date']!r}") from None
    node_cores = doc.get("node_cores")
    if node_cores is not None and (not isinstance(node_cores, int) or isinstance(node_cores, bool)):
        raise ModelError("node_cores must be an integer")
    try:
        coeffs = tuple(float(c) for c in doc["coefficients"])
    except (TypeError, ValueError):
        raise ModelError("coefficients must be numbers") from None
    return PowerModel(
        variant=doc["variant"],
        coefficients=coeffs,
        node_cores=node_cores,
        node=doc.get("node"),
        governor=doc.get("governor"),
        taken_at=taken_at,
        mem_w_per_gib=doc.get("mem_w_per_gib"),
    )


def write_model(model: PowerModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(save_model(model))


def read_model(path) -> PowerModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())
