"""Sensitivity of the consensus baselines to the step size epsilon.

    python scripts/epsilon_sweep.py --preset dense-tracking --seeds 10

Epsilon is swept as a fraction of 1 / max degree; IFDKF and CKF have no
step size and are printed once as references.
"""

from __future__ import annotations

import argparse
import warnings
from dataclasses import replace

import numpy as np

from ifdkf.filters import FilterSpec
from ifdkf.graph import max_degree
from ifdkf.metrics import steady_state_stats
from ifdkf.sim import SCENARIO_PRESETS, preset, run_many

WINDOW = (50, 150)


def position_mae(scenario, seeds, name, jobs):
    runs = run_many(scenario, seeds, jobs=jobs)
    return float(np.mean([steady_state_stats(t, name, WINDOW).position_mae
                          for t in runs.values()]))


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--preset", default="dense-tracking", choices=SCENARIO_PRESETS)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.25, 0.5, 0.65, 0.9])
    p.add_argument("--jobs", type=int, default=None)
    args = p.parse_args(argv)

    seeds = list(range(args.seeds))
    base = preset(args.preset)
    dmax = max_degree(base.topology)
    refs = replace(base, filters=(FilterSpec("IFDKF"), FilterSpec("CKF")))
    for name in ("IFDKF", "CKF"):
        print(f"{name:5s} {position_mae(refs, seeds, name, args.jobs):9.3f}")
    print("fraction  epsilon      KCF     GKCF      ICF")
    for frac in args.fractions:
        eps = frac / dmax
        specs = tuple(FilterSpec(k, epsilon=eps) for k in ("KCF", "GKCF", "ICF"))
        scenario = replace(base, filters=specs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            row = [position_mae(scenario, seeds, s.name, args.jobs) for s in specs]
        print(f"{frac:8.2f} {eps:8.4f} " + " ".join(f"{v:8.3f}" for v in row))


if __name__ == "__main__":
    main()
