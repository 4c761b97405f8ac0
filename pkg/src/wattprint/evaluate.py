"""Accuracy checks: model RMSE against stress-test readings, and estimate error
against measured energy."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .power import FITTED_CUBIC, FITTED_LINEAR, NAIVE_LINEAR, PowerReadingSet, fit_model, naive_linear, rmse

EVALUATION_COLUMNS = ("label", "estimate_kwh", "truth_kwh", "pct_error")


def pct_error(estimate: float, truth: float) -> float:
    if not truth > 0:
        raise ValueError(f"ground-truth energy must be positive, got {truth}")
    return abs(estimate - truth) / truth * 100.0


@dataclass(frozen=True)
class EvaluationRow:
    label: str
    estimate_kwh: float
    truth_kwh: float

    def __post_init__(self):
        if not self.truth_kwh > 0:
            raise ValueError(f"ground-truth energy must be positive, got {self.truth_kwh}")

    @property
    def pct_error(self) -> float:
        return pct_error(self.estimate_kwh, self.truth_kwh)


def compare_models(readings: PowerReadingSet) -> dict[str, float]:
    """RMSE of the naive, fitted-linear and fitted-cubic models on ``readings``."""
    table = {
        NAIVE_LINEAR: rmse(naive_linear(readings), readings),
        FITTED_LINEAR: rmse(fit_model(readings, 1), readings),
    }
    if len(readings.readings) > 3:
        table[FITTED_CUBIC] = rmse(fit_model(readings, 3), readings)
    return table


def render_evaluation(rows: list[EvaluationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVALUATION_COLUMNS)
    for row in rows:
        writer.writerow([row.label, repr(row.estimate_kwh), repr(row.truth_kwh), f"{row.pct_error:.2f}"])
    return buf.getvalue()
