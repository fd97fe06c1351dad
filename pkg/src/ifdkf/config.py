"""YAML scenario configs.

A config either names a scenario preset and overrides run parameters::

    preset: fail-at-65
    seeds: 20
    filters: [IFDKF, ICF, CKF]

or describes a scenario in full::

    name: my-net
    ticks: 150
    seed: 7
    model:
      A: [[1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]]
      B: [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
      Q: [[10, 0, 0, 0], [0, 10, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
      sensors:
        1: {H: [[1, 0, 0, 0], [0, 1, 0, 0]], R: [[100, 0], [0, 100]]}
        2: {observes: false}
    topology: {nodes: 6, preset: dense-A}      # or edges: [[1, 2], [2, 3]]
    schedule:
      - {tick: 65, switch_to: chain}           # preset name or edge list
      - {tick: 80, fail: [5]}
    init: {prior_range: [0, 500], P0: 10000}   # P0 scalar means scalar * I
    filters: [CKF, LKF, IFDKF, {kind: ICF, epsilon: auto, node_count: 6}]
    epsilon: auto                              # default for KCF/GKCF/ICF
    out: ./out
    jobs: 4                                    # worker processes for multi-seed runs

Sensors not listed are silent. Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigurationError
from .filters import AUTO, FilterKind, FilterSpec
from .graph import (TOPOLOGY_PRESETS, EventSchedule, FailNodes, SwitchTopology, Topology,
                    preset_edges)
from .model import LinearModel, SensorModel
from .sim import SCENARIO_PRESETS, InitSpec, Scenario, preset


class ConfigKeyError(ConfigurationError):
    def __init__(self, path: str, message: str, line: int | None = None):
        self.path, self.line = path, line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{path}: {message}{where}")


class _Doc:
    """Parsed YAML plus the source line of every key path."""

    def __init__(self, text: str):
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigKeyError("<config>", f"malformed YAML: {getattr(exc, 'problem', exc)}",
                                 mark.line + 1 if mark else None) from None
        self.lines: dict[str, int] = {}
        self.data = self._convert(root, "") if root is not None else {}

    def _convert(self, node, path):
        self.lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = _scalar(k)
                sub = f"{path}.{key}" if path else str(key)
                self.lines[sub] = k.start_mark.line + 1
                out[key] = self._convert(v, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._convert(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return _scalar(node)

    def err(self, path: str, message: str) -> ConfigKeyError:
        line = self.lines.get(path)
        probe = path
        while line is None and "." in probe:
            probe = probe.rsplit(".", 1)[0]
            line = self.lines.get(probe)
        return ConfigKeyError(path, message, line)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


TOP_KEYS = {"name", "preset", "ticks", "seed", "seeds", "model", "topology", "schedule", "init",
            "filters", "epsilon", "out", "resync_tick", "noise", "jobs"}
PRESET_KEYS = {"preset", "ticks", "seed", "seeds", "filters", "epsilon", "out", "resync_tick",
               "jobs"}


@dataclass
class RunConfig:
    """A validated scenario plus run-level settings."""

    scenario: Scenario
    seeds: list[int] = field(default_factory=lambda: [0])
    out: Path = Path("out")
    jobs: int | None = None


def _check_keys(doc: _Doc, block: dict, allowed: set, path: str) -> None:
    if not isinstance(block, dict):
        raise doc.err(path or "<config>", "expected a mapping")
    for key in block:
        if key not in allowed:
            sub = f"{path}.{key}" if path else str(key)
            raise doc.err(sub, f"unknown key (expected one of {sorted(allowed)})")


def _required(doc: _Doc, block: dict, key: str, path: str):
    if key not in block or block[key] is None:
        raise doc.err(f"{path}.{key}" if path else key, "required")
    return block[key]


def _matrix(doc: _Doc, value, path: str, shape=None) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise doc.err(path, "expected a numeric array") from None
    if arr.ndim == 0 and shape is not None and len(shape) == 2 and shape[0] == shape[1]:
        return float(arr) * np.eye(shape[0])
    if arr.size == 0 and shape is not None:
        return np.zeros(shape)
    if shape is not None and arr.shape != tuple(shape):
        raise doc.err(path, f"expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def _int(doc: _Doc, value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise doc.err(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise doc.err(path, f"must be >= {minimum}")
    return value


def _parse_model(doc: _Doc, block, node_count: int) -> LinearModel:
    _check_keys(doc, block, {"A", "B", "Q", "sensors"}, "model")
    A = _matrix(doc, _required(doc, block, "A", "model"), "model.A")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise doc.err("model.A", f"must be square, got shape {A.shape}")
    n = A.shape[0]
    B = _matrix(doc, _required(doc, block, "B", "model"), "model.B")
    if B.ndim != 2 or B.shape[0] != n:
        raise doc.err("model.B", f"must have {n} rows, got shape {B.shape}")
    Q = _matrix(doc, _required(doc, block, "Q", "model"), "model.Q", (B.shape[1],) * 2)
    sensors_block = _required(doc, block, "sensors", "model")
    if not isinstance(sensors_block, dict):
        raise doc.err("model.sensors", "expected a mapping of node id to sensor")
    sensors = {}
    for node, s in sensors_block.items():
        path = f"model.sensors.{node}"
        if isinstance(node, bool) or not isinstance(node, int) or not 1 <= node <= node_count:
            raise doc.err(path, f"sensor for unknown node (nodes are 1..{node_count})")
        _check_keys(doc, s, {"H", "R", "observes"}, path)
        if s.get("observes", True) is False:
            if "H" in s or "R" in s:
                raise doc.err(path, "a non-observing sensor takes no H or R")
            sensors[node] = SensorModel.silent(n)
            continue
        H = _matrix(doc, _required(doc, s, "H", path), f"{path}.H")
        if H.ndim != 2 or H.shape[1] != n:
            raise doc.err(f"{path}.H", f"must have {n} columns")
        R = _matrix(doc, _required(doc, s, "R", path), f"{path}.R", (H.shape[0],) * 2)
        try:
            sensors[node] = SensorModel(H, R)
        except ConfigurationError as exc:
            raise doc.err(f"{path}.R", str(exc)) from None
    try:
        return LinearModel(A, B, Q, sensors)
    except ConfigurationError as exc:
        raise doc.err("model", str(exc)) from None


def _edges(doc: _Doc, value, path: str, node_count: int):
    if isinstance(value, str):
        if value not in TOPOLOGY_PRESETS:
            raise doc.err(path, f"unknown topology preset {value!r}")
        try:
            return preset_edges(value, node_count)
        except ConfigurationError as exc:
            raise doc.err(path, str(exc)) from None
    if not isinstance(value, list) or not all(
            isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)
            for e in value):
        raise doc.err(path, "expected a preset name or a list of [i, j] node pairs")
    for e in value:
        if not all(1 <= v <= node_count for v in e):
            raise doc.err(path, f"edge {e} references an unknown node")
    return value


def _parse_topology(doc: _Doc, block) -> Topology:
    _check_keys(doc, block, {"nodes", "preset", "edges"}, "topology")
    N = _int(doc, block.get("nodes", 6), "topology.nodes", 1)
    if ("preset" in block) == ("edges" in block):
        raise doc.err("topology", "exactly one of preset or edges is required")
    if "preset" in block:
        edges = _edges(doc, block["preset"], "topology.preset", N)
    else:
        edges = _edges(doc, block["edges"], "topology.edges", N)
    try:
        return Topology(N, edges)
    except ConfigurationError as exc:
        raise doc.err("topology", str(exc)) from None


def _parse_schedule(doc: _Doc, entries, node_count: int) -> EventSchedule:
    if entries is None:
        return EventSchedule()
    if not isinstance(entries, list):
        raise doc.err("schedule", "expected a list of events")
    events, last = [], None
    for k, entry in enumerate(entries):
        path = f"schedule[{k}]"
        _check_keys(doc, entry, {"tick", "switch_to", "fail"}, path)
        tick = _int(doc, _required(doc, entry, "tick", path), f"{path}.tick", 1)
        if last is not None and tick <= last:
            raise doc.err(f"{path}.tick", "schedule ticks must be strictly increasing")
        last = tick
        if "switch_to" not in entry and "fail" not in entry:
            raise doc.err(path, "event needs switch_to or fail")
        if "switch_to" in entry:
            events.append((tick, SwitchTopology(
                _edges(doc, entry["switch_to"], f"{path}.switch_to", node_count))))
        if "fail" in entry:
            fail = entry["fail"]
            if not isinstance(fail, list) or not all(
                    isinstance(i, int) and 1 <= i <= node_count for i in fail):
                raise doc.err(f"{path}.fail", f"expected a list of node ids in 1..{node_count}")
            events.append((tick, FailNodes(fail)))
    return EventSchedule(tuple(events))


def _parse_init(doc: _Doc, block, n: int) -> InitSpec:
    if block is None:
        return InitSpec()
    _check_keys(doc, block, {"prior_range", "P0", "truth", "random_components", "priors"}, "init")
    kw: dict[str, Any] = {}
    if "prior_range" in block:
        pr = _matrix(doc, block["prior_range"], "init.prior_range", (2,))
        if pr[0] > pr[1]:
            raise doc.err("init.prior_range", "low must not exceed high")
        kw["prior_range"] = (float(pr[0]), float(pr[1]))
    if "P0" in block:
        kw["P0"] = _matrix(doc, block["P0"], "init.P0", (n, n))
    if "truth" in block:
        kw["truth"] = _matrix(doc, block["truth"], "init.truth", (n,))
    if "random_components" in block:
        rc = block["random_components"]
        if not isinstance(rc, list) or not all(isinstance(c, int) and 0 <= c < n for c in rc):
            raise doc.err("init.random_components", f"expected indices in 0..{n - 1}")
        kw["random_components"] = tuple(rc)
    if "priors" in block:
        pri = block["priors"]
        if not isinstance(pri, dict):
            raise doc.err("init.priors", "expected a mapping of node id to vector")
        kw["priors"] = {i: _matrix(doc, v, f"init.priors.{i}", (n,)) for i, v in pri.items()}
    return InitSpec(**kw)


def parse_filters(value, epsilon=None, doc: _Doc | None = None, path: str = "filters"
                  ) -> tuple[FilterSpec, ...]:
    """Filter list from names, mappings, or a comma-separated string."""
    doc = doc or _Doc("{}")
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    if not isinstance(value, list) or not value:
        raise doc.err(path, "expected a non-empty list of filters")
    specs = []
    for k, item in enumerate(value):
        sub = f"{path}[{k}]"
        if isinstance(item, str):
            item = {"kind": item}
        _check_keys(doc, item, {"kind", "epsilon", "node_count"}, sub)
        kind = str(_required(doc, item, "kind", sub)).upper()
        if kind not in FilterKind.__members__:
            raise doc.err(f"{sub}.kind", f"unknown filter {kind!r}; "
                                          f"expected one of {[k.value for k in FilterKind]}")
        kind = FilterKind(kind)
        eps = item.get("epsilon")
        if kind.uses_epsilon and eps is None:
            eps = epsilon
        try:
            specs.append(FilterSpec(kind, eps if kind.uses_epsilon else item.get("epsilon"),
                                    item.get("node_count")))
        except (ConfigurationError, ValueError) as exc:
            raise doc.err(sub, str(exc)) from None
    return tuple(specs)


def _parse_epsilon(doc: _Doc, value, path: str = "epsilon"):
    if value is None or value == AUTO:
        return value
    try:
        eps = float(value)
    except (TypeError, ValueError):
        raise doc.err(path, f"expected a number or 'auto', got {value!r}") from None
    if not eps > 0:
        raise doc.err(path, "must be > 0")
    return eps


def _seeds(doc: _Doc, data) -> list[int]:
    seed = _int(doc, data.get("seed", 0), "seed", 0)
    seeds = data.get("seeds")
    if seeds is None:
        return [seed]
    if isinstance(seeds, list):
        return [_int(doc, s, f"seeds[{k}]", 0) for k, s in enumerate(seeds)]
    count = _int(doc, seeds, "seeds", 1)
    return list(range(seed, seed + count))


def parse_config(text: str, default_name: str = "scenario") -> RunConfig:
    doc = _Doc(text)
    data = doc.data
    _check_keys(doc, data, TOP_KEYS, "")
    epsilon = _parse_epsilon(doc, data.get("epsilon"))
    seeds = _seeds(doc, data)
    out = Path(data.get("out", "out"))

    if "preset" in data:
        _check_keys(doc, data, PRESET_KEYS, "")
        name = data["preset"]
        if name not in SCENARIO_PRESETS:
            raise doc.err("preset", f"unknown scenario preset {name!r}; "
                                    f"expected one of {list(SCENARIO_PRESETS)}")
        scenario = preset(name)
        if "filters" in data or epsilon is not None:
            filters = data.get("filters", [f.name for f in scenario.filters])
            scenario = replace(scenario, filters=parse_filters(filters, epsilon, doc))
    else:
        topology = _parse_topology(doc, _required(doc, data, "topology", ""))
        model = _parse_model(doc, _required(doc, data, "model", ""), topology.node_count)
        filters = parse_filters(_required(doc, data, "filters", ""), epsilon, doc)
        noise = data.get("noise", True)
        if not isinstance(noise, bool):
            raise doc.err("noise", "expected true or false")
        scenario = Scenario(
            name=str(data.get("name", default_name)), model=model, topology=topology,
            schedule=_parse_schedule(doc, data.get("schedule"), topology.node_count),
            filters=filters, init=_parse_init(doc, data.get("init"), model.n), noise=noise)
    if "ticks" in data:
        scenario = replace(scenario, ticks=_int(doc, data["ticks"], "ticks", 1))
    if data.get("resync_tick") is not None:
        scenario = replace(scenario, resync_tick=_int(doc, data["resync_tick"], "resync_tick", 1))
    scenario = replace(scenario, seed=seeds[0])
    try:
        scenario.validate()
    except ConfigurationError as exc:
        raise ConfigKeyError("<config>", str(exc)) from None
    jobs = _int(doc, data["jobs"], "jobs", 1) if data.get("jobs") is not None else None
    return RunConfig(scenario=scenario, seeds=seeds, out=out, jobs=jobs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, default_name=path.stem)
