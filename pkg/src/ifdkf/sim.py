"""Deterministic scenario engine.

Per tick: apply topology events, advance the truth, draw every alive node's
measurement once, then step each configured filter on that shared
realization and record one trace row per alive node (one for the CKF).
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalDegeneracyError
from .filters import CKF_NODE, FilterKind, FilterSpec, NodeBelief, step
from .graph import EventSchedule, FailNodes, SwitchTopology, Topology, apply_events, preset_edges
from .model import (MEASUREMENT_STREAM, PRIOR_STREAM, PROCESS_STREAM, GaussianSource,
                    LinearModel, information_pair, measure, tracking_model, step_truth)

log = logging.getLogger(__name__)

DEFAULT_P0_SCALE = 1e4


@dataclass(frozen=True)
class InitSpec:
    """Initial truth and node priors.

    Prior components listed in `random_components` are drawn uniformly from
    `prior_range` per node; all other components start at zero. `priors`
    overrides the draw for the listed nodes. The CKF starts from the mean of
    the node priors.
    """

    prior_range: tuple[float, float] = (0.0, 500.0)
    P0: np.ndarray | None = None
    truth: np.ndarray | None = None
    random_components: tuple[int, ...] = (0, 1)
    priors: dict[int, np.ndarray] = field(default_factory=dict)
    shared_across_filters: bool = True

    def initial_truth(self, n: int) -> np.ndarray:
        return np.zeros(n) if self.truth is None else np.asarray(self.truth, dtype=float)

    def initial_covariance(self, n: int) -> np.ndarray:
        return DEFAULT_P0_SCALE * np.eye(n) if self.P0 is None else np.asarray(self.P0, dtype=float)

    def node_priors(self, nodes: Sequence[int], n: int, seed: int) -> dict[int, np.ndarray]:
        low, high = self.prior_range
        out = {}
        for i in nodes:
            if i in self.priors:
                out[i] = np.asarray(self.priors[i], dtype=float)
                continue
            x = np.zeros(n)
            idx = [c for c in self.random_components if c < n]
            x[idx] = GaussianSource.seeded(seed, PRIOR_STREAM, i).uniform(low, high, len(idx))
            out[i] = x
        return out


@dataclass(frozen=True)
class Scenario:
    name: str
    model: LinearModel
    topology: Topology
    schedule: EventSchedule = EventSchedule()
    ticks: int = 150
    filters: tuple[FilterSpec, ...] = ()
    init: InitSpec = InitSpec()
    seed: int = 0
    resync_tick: int | None = None  # copy the CKF prior into every alive node at this tick
    noise: bool = True

    def validate(self) -> None:
        if self.ticks < 1:
            raise ConfigurationError("ticks must be >= 1")
        if not self.filters:
            raise ConfigurationError("at least one filter is required")
        names = [f.name for f in self.filters]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate filters: {names}")
        n, N = self.model.n, self.topology.node_count
        unknown = set(self.model.sensors) - set(range(1, N + 1))
        if unknown:
            raise ConfigurationError(f"sensors defined for unknown nodes {sorted(unknown)}")
        self.schedule.validate(N)
        unknown = set(self.init.priors) - set(range(1, N + 1))
        if unknown:
            raise ConfigurationError(f"init.priors for unknown nodes {sorted(unknown)}")
        if self.init.initial_covariance(n).shape != (n, n):
            raise ConfigurationError(f"init.P0 must be {n}x{n}")
        if self.init.initial_truth(n).shape != (n,):
            raise ConfigurationError(f"init.truth must have length {n}")
        for i, x in self.init.priors.items():
            if np.shape(x) != (n,):
                raise ConfigurationError(f"init.priors.{i} must have length {n}")
        low, high = self.init.prior_range
        if not low <= high:
            raise ConfigurationError("init.prior_range must satisfy low <= high")
        for f in self.filters:
            f.resolve(self.topology)


@dataclass(frozen=True)
class TickTrace:
    tick: int
    filter: str
    node: int
    truth: np.ndarray
    estimate: np.ndarray
    abs_error: np.ndarray
    cov_trace: float
    failed: bool = False
    covariance: np.ndarray | None = field(default=None, repr=False, compare=False)


def _failure_row(tick, name, node, truth) -> TickTrace:
    nan = np.full_like(truth, np.nan)
    return TickTrace(tick, name, node, truth, nan, nan, float("nan"), failed=True)


@dataclass
class _FilterRun:
    spec: FilterSpec
    resolved: object
    beliefs: dict[int, NodeBelief]
    failure: NumericalDegeneracyError | None = None


def iter_run(scenario: Scenario, record_covariance: bool = False) -> Iterator[TickTrace]:
    """Yield trace rows in (tick, filter, node) order."""
    scenario.validate()
    model, seed = scenario.model, scenario.seed
    n = model.n
    topology = scenario.topology
    node_ids = list(range(1, topology.node_count + 1))

    if scenario.noise:
        process = GaussianSource.seeded(seed, PROCESS_STREAM)
        meas_noise = {i: GaussianSource.seeded(seed, MEASUREMENT_STREAM, i) for i in node_ids}
    else:
        process = GaussianSource.disabled()
        meas_noise = {i: GaussianSource.disabled() for i in node_ids}

    P0 = scenario.init.initial_covariance(n)
    priors = scenario.init.node_priors(node_ids, n, seed)
    ckf_prior = np.mean([priors[i] for i in node_ids], axis=0)

    runs = []
    for spec in scenario.filters:
        if spec.kind is FilterKind.CKF:
            beliefs = {CKF_NODE: NodeBelief.from_prior(ckf_prior, P0)}
        else:
            beliefs = {i: NodeBelief.from_prior(priors[i], P0) for i in node_ids}
        runs.append(_FilterRun(spec, spec.resolve(topology), beliefs))
    ckf_run = next((r for r in runs if r.spec.kind is FilterKind.CKF), None)
    if scenario.resync_tick is not None and ckf_run is None:
        raise ConfigurationError("resync_tick requires a CKF filter")

    x = scenario.init.initial_truth(n)
    for k in range(1, scenario.ticks + 1):
        topology = apply_events(topology, scenario.schedule, k)
        x = step_truth(model, x, process)
        pairs = {}
        for i in topology.nodes:
            z = measure(model.sensor(i), x, meas_noise[i], node=i, tick=k)
            pairs[i] = information_pair(model.sensor(i), z)

        if k == scenario.resync_tick and ckf_run.failure is None:
            shared = ckf_run.beliefs[CKF_NODE]
            for r in runs:
                if r is not ckf_run:
                    for i in topology.nodes:
                        r.beliefs[i] = NodeBelief(shared.x_prior.copy(), shared.P_prior.copy())

        for r in runs:
            name = r.spec.name
            rows = [CKF_NODE] if r.spec.kind is FilterKind.CKF else topology.nodes
            if r.failure is None:
                try:
                    result = step(r.resolved, r.beliefs, topology, pairs, model, tick=k)
                except NumericalDegeneracyError as exc:
                    r.failure = exc
                    log.warning("%s failed: %s", name, exc)
            if r.failure is not None:
                for i in rows:
                    yield _failure_row(k, name, i, x)
                continue
            for i in rows:
                post = result.posteriors[i]
                yield TickTrace(k, name, i, x.copy(), post.x_post, np.abs(post.x_post - x),
                                float(np.trace(post.P_post)),
                                covariance=post.P_post if record_covariance else None)
            r.beliefs.update(result.priors)


def run(scenario: Scenario, record_covariance: bool = False) -> list[TickTrace]:
    return list(iter_run(scenario, record_covariance))


def _run_seed(args) -> list[TickTrace]:
    scenario, seed = args
    return run(replace(scenario, seed=seed))


def run_many(scenario: Scenario, seeds: Sequence[int], jobs: int | None = None
             ) -> dict[int, list[TickTrace]]:
    """Run one scenario under several seeds; results keyed by seed, in order."""
    seeds = list(seeds)
    if jobs == 1 or len(seeds) == 1:
        return {s: _run_seed((scenario, s)) for s in seeds}
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = pool.map(_run_seed, [(scenario, s) for s in seeds])
        return dict(zip(seeds, results))


ALL_FILTERS = tuple(FilterSpec(k) for k in FilterKind)
SCENARIO_PRESETS = ("dense-tracking", "chain", "switch-at-65", "fail-at-65")
DEFAULT_TICKS = 150
EVENT_TICK = 65


def preset(name: str, seed: int = 0, ticks: int = DEFAULT_TICKS,
           filters: Sequence[FilterSpec] = ALL_FILTERS) -> Scenario:
    """The four camera-network experiments with their fixed model constants."""
    schedule = EventSchedule()
    if name == "dense-tracking":
        topology, observers = Topology.preset("dense-A"), {1}
    elif name == "chain":
        topology, observers = Topology.preset("chain"), {1}
    elif name == "switch-at-65":
        topology, observers = Topology.preset("dense-B"), {1}
        schedule = EventSchedule(((EVENT_TICK, SwitchTopology(preset_edges("chain"))),))
    elif name == "fail-at-65":
        topology, observers = Topology.preset("dense-B"), {2, 3}
        schedule = EventSchedule(((EVENT_TICK, FailNodes({5, 6})),))
    else:
        raise ConfigurationError(
            f"unknown scenario preset {name!r}; expected one of {SCENARIO_PRESETS}")
    return Scenario(name=name, model=tracking_model(observers), topology=topology,
                    schedule=schedule, ticks=ticks, filters=tuple(filters), seed=seed)
