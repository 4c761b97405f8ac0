"""Small desk-scale experiments with the estimator.

  rmse      model RMSE on random monotone readings sets (convex and free-form)
  constant  constant-CI arithmetic for a small and a large workflow
  grain     time-aligned vs mean-constant CI for a workflow run in low-CI hours

Usage: python scripts/experiments.py [rmse|constant|grain ...] [--seed N] [--sets N]
"""
import argparse
from datetime import datetime, timedelta, timezone

import numpy as np

from wattprint.carbon import CiSeries, task_emissions, workflow_emissions
from wattprint.energy import NodeSpec, TaskEnergy, estimate_workflow_energy
from wattprint.evaluate import compare_models
from wattprint.power import PowerReadingSet, per_core_linear
from wattprint.trace import TraceTask

LOADS = [k / 10 for k in range(11)]
T0 = datetime(2024, 9, 26, tzinfo=timezone.utc)


def random_readings(rng, convex):
    steps = rng.uniform(0, 20, size=10)
    if convex:
        steps = np.sort(steps)
    watts = rng.uniform(10, 150) + np.concatenate([[0.0], np.cumsum(steps)])
    return PowerReadingSet.from_pairs(zip(LOADS, watts.tolist()))


def rmse_study(seed, sets):
    rng = np.random.default_rng(seed)
    for convex in (True, False):
        table = np.array([list(compare_models(random_readings(rng, convex)).values()) for _ in range(sets)])
        naive, linear, cubic = table.T
        nested = np.all(cubic <= linear) and np.all(linear <= naive + 1e-9)
        label = "convex" if convex else "free-form"
        print(f"{label:>9}: mean rmse naive {naive.mean():.3f}  linear {linear.mean():.3f}  "
              f"cubic {cubic.mean():.3f} W  nesting holds in all {sets}: {nested}")


def constant_ci():
    for kwh, ci in ((0.114, 136), (30.51, 394)):
        fp = task_emissions(TaskEnergy(1, kwh, 0.0), T0, T0 + timedelta(hours=1), CiSeries.constant(ci))
        print(f"{kwh} kWh at {ci} gCO2e/kWh -> {fp.co2e_g:.3f} gCO2e")


def granularity():
    hourly = [310, 290, 260, 120, 35, 28, 22, 30, 140, 280, 330, 350]
    series = CiSeries.from_intervals([(T0 + timedelta(hours=h), v) for h, v in enumerate(hourly)])
    mean = CiSeries.constant(sum(hourly) / len(hourly))
    tasks = [
        TraceTask(i, f"T{i}", "COMPLETED", 45 * 60_000, 350.0, 4, 2**33,
                  T0 + timedelta(hours=4, minutes=20 * i), T0 + timedelta(hours=4, minutes=20 * i + 45))
        for i in range(8)
    ]
    energy = estimate_workflow_energy(tasks, per_core_linear(0.69, 3.75), NodeSpec(8))
    for label, ci in (("time-aligned", series), ("mean constant", mean)):
        total = workflow_emissions([task_emissions(e, t.start, t.complete, ci) for e, t in zip(energy.tasks, tasks)])
        print(f"{label:>13}: {total.total_kwh:.4f} kWh -> {total.co2e_g:.3f} gCO2e")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("experiments", nargs="*", metavar="{rmse,constant,grain}")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sets", type=int, default=500)
    args = parser.parse_args()
    unknown = set(args.experiments) - {"rmse", "constant", "grain"}
    if unknown:
        parser.error(f"unknown experiment(s): {', '.join(sorted(unknown))}")
    for name in args.experiments or ("rmse", "constant", "grain"):
        print(f"== {name}")
        if name == "rmse":
            rmse_study(args.seed, args.sets)
        elif name == "constant":
            constant_ci()
        else:
            granularity()


if __name__ == "__main__":
    main()
