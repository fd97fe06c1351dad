"""Command-line entry point: ``ifdkf run | analyze | presets``."""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics
from .config import RunConfig, load_config, parse_filters
from .errors import ConfigurationError
from .graph import (TOPOLOGY_PRESETS, classify_naive, epochs, is_connected, max_degree,
                    neighborhood)
from .sim import SCENARIO_PRESETS, preset, run_many

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _format_set(s) -> str:
    return "{" + ",".join(map(str, sorted(s))) + "}"


def _load(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigurationError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = RunConfig(scenario=preset(args.preset))
    else:
        raise ConfigurationError("one of --config or --preset is required")
    sc = cfg.scenario
    if getattr(args, "ticks", None) is not None:
        if args.ticks < 1:
            raise ConfigurationError("--ticks: must be >= 1")
        sc = replace(sc, ticks=args.ticks)
    if getattr(args, "filters", None) or getattr(args, "epsilon", None) is not None:
        names = args.filters or ",".join(f.name for f in sc.filters)
        eps = args.epsilon
        if eps is not None and eps != "auto":
            try:
                eps = float(eps)
            except ValueError:
                raise ConfigurationError(f"--epsilon: expected a number or 'auto', got {eps!r}") from None
        sc = replace(sc, filters=parse_filters(names, eps, path="--filters"))
    seeds = cfg.seeds
    if getattr(args, "seeds", None) is not None:
        if args.seeds < 1:
            raise ConfigurationError("--seeds: must be >= 1")
        base = args.seed if args.seed is not None else seeds[0]
        seeds = list(range(base, base + args.seeds))
    elif getattr(args, "seed", None) is not None:
        seeds = [args.seed]
    sc = replace(sc, seed=seeds[0])
    sc.validate()
    out = Path(args.out) if getattr(args, "out", None) else cfg.out
    jobs = args.jobs if getattr(args, "jobs", None) is not None else cfg.jobs
    return RunConfig(scenario=sc, seeds=seeds, out=out, jobs=jobs)


def cmd_run(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        results = run_many(sc, cfg.seeds, jobs=cfg.jobs)
    failed = set()
    for seed, traces in results.items():
        for name, rows in metrics.split_by_filter(traces).items():
            metrics.emit_trace_csv(rows, cfg.out / metrics.trace_filename(sc.name, name, seed))
            if any(r.failed for r in rows):
                failed.add(name)
    summary = metrics.summarize(list(results.values()))
    metrics.emit_summary_csv(summary, cfg.out / metrics.summary_filename(sc.name))

    by_filter: dict[str, list[np.ndarray]] = {}
    for _, name, mae in summary:
        by_filter.setdefault(name, []).append(mae)
    for name, maes in by_filter.items():
        mae = np.mean(maes, axis=0)
        status = "  FAILED" if name in failed else ""
        print(f"{name:6s} mean MAE over {sc.ticks} ticks, {len(cfg.seeds)} seed(s): "
              + " ".join(f"{v:.4g}" for v in mae) + status)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    print(f"scenario: {sc.name}")
    for start, topo in epochs(sc.topology, sc.schedule):
        report = classify_naive(topo, sc.model)
        print(f"epoch k>={start}: alive={_format_set(topo.alive)} max_degree={max_degree(topo)} "
              f"connected={'yes' if is_connected(topo) else 'no'}")
        for i in topo.nodes:
            print(f"  node {i}: |N_i|={len(neighborhood(topo, i))} rank={report.rank[i]}")
        print(f"  {report}")
    return EXIT_OK


def cmd_presets(args) -> int:
    print("scenarios: " + ", ".join(SCENARIO_PRESETS))
    print("topologies: " + ", ".join(TOPOLOGY_PRESETS))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ifdkf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp):
        sp.add_argument("--preset", choices=SCENARIO_PRESETS)
        sp.add_argument("--config", help="YAML scenario config")

    r = sub.add_parser("run", help="simulate a scenario and write CSV traces")
    source(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--seeds", type=int, metavar="N", help="run N consecutive seeds")
    r.add_argument("--out", help="output directory")
    r.add_argument("--filters", metavar="LIST", help="comma-separated, e.g. IFDKF,ICF,CKF")
    r.add_argument("--epsilon", metavar="VAL|auto")
    r.add_argument("--ticks", type=int, metavar="K")
    r.add_argument("--jobs", type=int, default=None, help="worker processes for multi-seed runs")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="report degrees, connectivity and naive nodes")
    source(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("presets", help="list built-in presets")
    s.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
