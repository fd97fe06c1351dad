"""Mean absolute error summaries and CSV output."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, IncompleteTraceError
from .filters import FilterKind
from .sim import TickTrace

CKF = "CKF"


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


class TraceTable:
    """Index over trace rows: (filter, tick) -> list of rows ordered by node."""

    def __init__(self, traces: Iterable[TickTrace]):
        self._rows: dict[tuple[str, int], list[TickTrace]] = defaultdict(list)
        for t in traces:
            self._rows[(t.filter, t.tick)].append(t)
        for rows in self._rows.values():
            rows.sort(key=lambda t: t.node)
        self.filters = sorted({f for f, _ in self._rows}, key=_filter_order)
        self.ticks = sorted({k for _, k in self._rows})

    def rows(self, filter: str, tick: int) -> list[TickTrace]:
        rows = self._rows.get((filter, tick))
        if not rows:
            raise IncompleteTraceError(f"no trace rows for filter {filter} at tick {tick}")
        return rows

    def node_series(self, filter: str, node: int) -> tuple[np.ndarray, np.ndarray]:
        """(ticks, abs_error rows) for one node; ticks where it is absent are skipped."""
        ticks, errs = [], []
        for k in self.ticks:
            for t in self._rows.get((filter, k), ()):
                if t.node == node:
                    ticks.append(k)
                    errs.append(t.abs_error)
        return np.array(ticks), np.array(errs)


_ORDER = [k.value for k in FilterKind]


def _filter_order(name: str):
    return (_ORDER.index(name) if name in _ORDER else len(_ORDER), name)


def _table(traces) -> TraceTable:
    return traces if isinstance(traces, TraceTable) else TraceTable(traces)


def mean_abs_error(traces, tick: int, filter: str, expected_nodes: int | None = None) -> np.ndarray:
    """Componentwise mean of |estimate - truth| over the alive nodes at `tick`."""
    rows = _table(traces).rows(filter, tick)
    if expected_nodes is not None and filter != CKF and len(rows) != expected_nodes:
        raise IncompleteTraceError(
            f"{filter} at tick {tick}: expected {expected_nodes} rows, got {len(rows)}")
    return np.mean([r.abs_error for r in rows], axis=0)


def mae_series(traces, filter: str) -> tuple[np.ndarray, np.ndarray]:
    table = _table(traces)
    ticks = np.array([k for k in table.ticks if (filter, k) in table._rows])
    return ticks, np.array([mean_abs_error(table, k, filter) for k in ticks])


@dataclass(frozen=True)
class SteadyStateSummary:
    filter: str
    window: tuple[int, int]
    mae: np.ndarray  # time average over the window, per state component

    @property
    def position_mae(self) -> float:
        return float(np.mean(self.mae[:2]))


def steady_state_stats(traces, filter: str, window: tuple[int, int]) -> SteadyStateSummary:
    """Time-averaged MAE over the inclusive tick window."""
    table = _table(traces)
    lo, hi = window
    if not table.ticks or lo < table.ticks[0] or hi > table.ticks[-1] or lo > hi:
        raise ValueError(f"window {window} exceeds run length "
                         f"[{table.ticks[0] if table.ticks else None}, "
                         f"{table.ticks[-1] if table.ticks else None}]")
    maes = [mean_abs_error(table, k, filter) for k in range(lo, hi + 1)]
    return SteadyStateSummary(filter, (lo, hi), np.mean(maes, axis=0))


def ckf_gap(traces, tick: int, filter: str) -> np.ndarray:
    table = _table(traces)
    return mean_abs_error(table, tick, filter) - table.rows(CKF, tick)[0].abs_error


def summarize(runs: Sequence[Iterable[TickTrace]]) -> list[tuple[int, str, np.ndarray]]:
    """(tick, filter, MAE) rows averaged over independent runs (seeds)."""
    tables = [_table(r) for r in runs]
    if not tables:
        return []
    out = []
    for k in tables[0].ticks:
        for f in tables[0].filters:
            out.append((k, f, np.mean([mean_abs_error(t, k, f) for t in tables], axis=0)))
    return out


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from None


def emit_trace_csv(traces: Iterable[TickTrace], path, n: int = 4) -> Path:
    """Write trace rows sorted by (tick, filter, node)."""
    rows = sorted(traces, key=lambda t: (t.tick, _filter_order(t.filter), t.node))
    if rows:
        n = rows[0].truth.shape[0]
    header = (["tick", "filter", "node"] + [f"truth_{c}" for c in range(n)]
              + [f"est_{c}" for c in range(n)] + [f"abs_err_{c}" for c in range(n)] + ["cov_trace"])
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in rows:
            w.writerow([t.tick, t.filter, t.node, *map(_fmt, t.truth), *map(_fmt, t.estimate),
                        *map(_fmt, t.abs_error), _fmt(t.cov_trace)])
    return Path(path)


def emit_summary_csv(summary: Iterable[tuple[int, str, np.ndarray]], path, n: int = 4) -> Path:
    rows = list(summary)
    if rows:
        n = rows[0][2].shape[0]
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "filter"] + [f"mae_{c}" for c in range(n)])
        for k, f, mae in rows:
            w.writerow([k, f, *map(_fmt, mae)])
    return Path(path)


def emit_csv(records, path, n: int = 4) -> Path:
    """Trace rows or summary tuples to CSV, chosen by record type."""
    records = list(records)
    if records and not isinstance(records[0], TickTrace):
        return emit_summary_csv(records, path, n)
    return emit_trace_csv(records, path, n)


def trace_filename(scenario: str, filter: str, seed: int) -> str:
    return f"{scenario}_{filter}_{seed}.csv"


def summary_filename(scenario: str) -> str:
    return f"{scenario}_summary.csv"


def split_by_filter(traces: Iterable[TickTrace]) -> Mapping[str, list[TickTrace]]:
    out: dict[str, list[TickTrace]] = {}
    for t in traces:
        out.setdefault(t.filter, []).append(t)
    return out
