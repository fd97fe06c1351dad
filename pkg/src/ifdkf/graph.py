"""Undirected communication topology, event schedule and naivety analysis.

Nodes are numbered 1..N. Failed nodes stay in the edge set but disappear
from every neighborhood query from their failure tick onward.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigurationError, QueryError
from .model import LinearModel

Edge = tuple[int, int]

RANK_RTOL = 1e-9


def _norm_edges(edges: Iterable[Iterable[int]]) -> frozenset[Edge]:
    out = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise ConfigurationError(f"self-loop on node {i}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


# Preset edge lists for the six-camera network. Only N_5 = {1,3,4,6} and the
# maximum degrees are fixed for dense-A; dense-B is the unique shape (up to
# relabelling 5 and 6) that yields the naive sets of both robustness tests.
PRESET_EDGES: dict[str, tuple[Edge, ...]] = {
    "dense-A": ((1, 2), (2, 3), (3, 4), (1, 5), (3, 5), (4, 5), (5, 6)),
    "dense-B": ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4), (4, 5), (5, 6)),
    "chain": ((1, 2), (2, 3), (3, 4), (4, 5), (5, 6)),
}
TOPOLOGY_PRESETS = (*PRESET_EDGES, "complete")


def preset_edges(name: str, node_count: int = 6) -> frozenset[Edge]:
    if name == "complete":
        return frozenset(combinations(range(1, node_count + 1), 2))
    if name == "chain":
        return frozenset((i, i + 1) for i in range(1, node_count))
    try:
        edges = PRESET_EDGES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown topology preset {name!r}; expected one of {TOPOLOGY_PRESETS}") from None
    if node_count != 6:
        raise ConfigurationError(f"topology preset {name!r} is defined for 6 nodes")
    return frozenset(edges)


@dataclass(frozen=True)
class Topology:
    node_count: int
    edges: frozenset[Edge]
    alive: frozenset[int] = None  # type: ignore[assignment]

    def __post_init__(self):
        edges = _norm_edges(self.edges)
        alive = frozenset(range(1, self.node_count + 1)) if self.alive is None else frozenset(self.alive)
        nodes = range(1, self.node_count + 1)
        for i, j in edges:
            if i not in nodes or j not in nodes:
                raise ConfigurationError(f"edge ({i}, {j}) references an unknown node")
        if not alive <= set(nodes):
            raise ConfigurationError(f"alive set references unknown nodes: {sorted(alive - set(nodes))}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "alive", alive)
        adj: dict[int, set[int]] = {i: set() for i in nodes}
        for i, j in edges:
            adj[i].add(j)
            adj[j].add(i)
        object.__setattr__(self, "_adj", {i: frozenset(v) for i, v in adj.items()})

    @classmethod
    def preset(cls, name: str, node_count: int = 6) -> "Topology":
        return cls(node_count, preset_edges(name, node_count))

    @property
    def nodes(self) -> list[int]:
        return sorted(self.alive)

    def _check(self, i: int) -> None:
        if i not in self._adj:
            raise QueryError(f"unknown node {i}")
        if i not in self.alive:
            raise QueryError(f"node {i} has failed")

    def degree(self, i: int) -> int:
        return len(neighborhood(self, i))


def neighborhood(t: Topology, i: int) -> frozenset[int]:
    t._check(i)
    return t._adj[i] & t.alive


def inclusive_neighborhood(t: Topology, i: int) -> frozenset[int]:
    return neighborhood(t, i) | {i}


def max_degree(t: Topology) -> int:
    if not t.alive:
        raise QueryError("topology has no alive nodes")
    return max(len(neighborhood(t, i)) for i in t.alive)


def is_connected(t: Topology) -> bool:
    if not t.alive:
        return False
    start = min(t.alive)
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in neighborhood(t, i):
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return seen == set(t.alive)


def observability_matrix(A: np.ndarray, H: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks, HAk = [], H
    for _ in range(n):
        blocks.append(HAk)
        HAk = HAk @ A
    return np.vstack(blocks) if H.shape[0] else np.zeros((0, n))


def observability_rank(A: np.ndarray, H: np.ndarray) -> int:
    O = observability_matrix(A, H)
    if O.size == 0:
        return 0
    s = np.linalg.svd(O, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


@dataclass(frozen=True)
class NaivetyReport:
    naive: frozenset[int]
    rank: dict[int, int]           # observability rank of (A, H_J_i)
    sensing_rows: dict[int, int]   # rows stacked into H_J_i
    n: int

    def __str__(self) -> str:
        return "naive: {" + ",".join(map(str, sorted(self.naive))) + "}"


def joint_sensing_matrix(t: Topology, model: LinearModel, i: int) -> np.ndarray:
    blocks = [model.sensor(j).H for j in sorted(inclusive_neighborhood(t, i))
              if model.sensor(j).observes]
    return np.vstack(blocks) if blocks else np.zeros((0, model.n))


def classify_naive(t: Topology, model: LinearModel) -> NaivetyReport:
    ranks, rows = {}, {}
    for i in t.nodes:
        HJ = joint_sensing_matrix(t, model, i)
        rows[i] = HJ.shape[0]
        ranks[i] = observability_rank(model.A, HJ)
    naive = frozenset(i for i, r in ranks.items() if r < model.n)
    return NaivetyReport(naive=naive, rank=ranks, sensing_rows=rows, n=model.n)


@dataclass(frozen=True)
class SwitchTopology:
    edges: frozenset[Edge]

    def __post_init__(self):
        object.__setattr__(self, "edges", _norm_edges(self.edges))


@dataclass(frozen=True)
class FailNodes:
    nodes: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(int(i) for i in self.nodes))


Event = SwitchTopology | FailNodes


@dataclass(frozen=True)
class EventSchedule:
    events: tuple[tuple[int, Event], ...] = ()
    _by_tick: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        events = tuple((int(k), ev) for k, ev in self.events)
        by_tick: dict[int, list[Event]] = {}
        for k, ev in events:
            by_tick.setdefault(k, []).append(ev)
        ticks = [k for k, _ in events]
        if any(b < a for a, b in zip(ticks, ticks[1:])):
            raise ConfigurationError("schedule ticks must be increasing")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "_by_tick", by_tick)

    def at(self, tick: int) -> list[Event]:
        return self._by_tick.get(tick, [])

    @property
    def ticks(self) -> list[int]:
        return sorted(self._by_tick)

    def validate(self, node_count: int) -> None:
        known = set(range(1, node_count + 1))
        for k, ev in self.events:
            refs = ev.nodes if isinstance(ev, FailNodes) else {v for e in ev.edges for v in e}
            unknown = set(refs) - known
            if unknown:
                raise ConfigurationError(
                    f"schedule event at tick {k} references unknown nodes {sorted(unknown)}")


def apply_events(t: Topology, schedule: EventSchedule, tick: int) -> Topology:
    for ev in schedule.at(tick):
        if isinstance(ev, SwitchTopology):
            t = replace(t, edges=ev.edges)
        else:
            t = replace(t, alive=t.alive - ev.nodes)
    return t


def epochs(t: Topology, schedule: EventSchedule, first_tick: int = 1
           ) -> Iterator[tuple[int, Topology]]:
    """(start tick, topology) for each interval between schedule events."""
    t = apply_events(t, schedule, first_tick)
    yield first_tick, t
    for k in schedule.ticks:
        if k > first_tick:
            t = apply_events(t, schedule, k)
            yield k, t
