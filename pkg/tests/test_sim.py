from dataclasses import replace

import numpy as np
import pytest

import ifdkf.sim as sim
from ifdkf.errors import ConfigurationError, NumericalDegeneracyError
from ifdkf.filters import CKF_NODE, FilterKind, FilterSpec
from ifdkf.graph import EventSchedule, FailNodes, SwitchTopology, Topology, preset_edges
from ifdkf.model import TRACKING_A, tracking_model
from ifdkf.sim import (ALL_FILTERS, SCENARIO_PRESETS, InitSpec, Scenario, preset, run,
                       run_many)


def _rows_by(traces, filter):
    return [t for t in traces if t.filter == filter]


def test_dense_tracking_row_count():
    traces = run(preset("dense-tracking", seed=3))
    assert len(traces) == 150 * (5 * 6 + 1)
    ckf = _rows_by(traces, "CKF")
    assert len(ckf) == 150 and {t.node for t in ckf} == {CKF_NODE}


def test_rows_are_ordered_by_tick_filter_node():
    traces = run(preset("chain", seed=1, ticks=3))
    order = [k.value for k in FilterKind]
    keys = [(t.tick, order.index(t.filter), t.node) for t in traces]
    assert keys == sorted(keys)
    assert {t.tick for t in traces} == {1, 2, 3}


@pytest.mark.parametrize("truth", [np.zeros(4), np.array([10.0, -20.0, 1.0, 2.0])])
def test_noise_free_perfect_priors_give_zero_error(truth):
    x1 = TRACKING_A @ truth
    base = preset("dense-tracking", ticks=1)
    scenario = replace(base, noise=False,
                       init=InitSpec(truth=truth, priors={i: x1 for i in range(1, 7)}))
    traces = run(scenario)
    assert len(traces) == 31
    for t in traces:
        np.testing.assert_allclose(t.abs_error, 0.0, atol=1e-9)


@pytest.mark.parametrize("name", SCENARIO_PRESETS)
def test_runs_are_deterministic(name):
    a = run(preset(name, seed=5, ticks=20))
    b = run(preset(name, seed=5, ticks=20))
    assert len(a) == len(b)
    for s, t in zip(a, b):
        assert (s.tick, s.filter, s.node) == (t.tick, t.filter, t.node)
        assert np.array_equal(s.estimate, t.estimate) and s.cov_trace == t.cov_trace


def test_different_seeds_differ():
    a = run(preset("chain", seed=0, ticks=5))
    b = run(preset("chain", seed=1, ticks=5))
    assert not np.array_equal(a[-1].truth, b[-1].truth)


def test_filters_share_one_realization():
    traces = run(preset("dense-tracking", seed=2, ticks=30))
    for k in range(1, 31):
        truths = [t.truth for t in traces if t.tick == k]
        assert all(np.array_equal(truths[0], x) for x in truths)


def test_filter_set_does_not_perturb_other_filters():
    alone = run(preset("dense-tracking", seed=4, ticks=30, filters=(FilterSpec("IFDKF"),)))
    together = _rows_by(run(preset("dense-tracking", seed=4, ticks=30)), "IFDKF")
    assert len(alone) == len(together)
    for s, t in zip(alone, together):
        assert np.array_equal(s.estimate, t.estimate)


def test_dead_nodes_emit_no_rows_after_failure():
    traces = run(preset("fail-at-65", seed=0, ticks=70))
    for t in traces:
        if t.filter == "CKF":
            continue
        if t.tick >= 65:
            assert t.node not in (5, 6)
    assert len([t for t in traces if t.tick == 70 and t.filter == "IFDKF"]) == 4
    assert len([t for t in traces if t.tick == 64 and t.filter == "IFDKF"]) == 6


def test_initial_priors_shared_and_ckf_starts_at_their_mean():
    scenario = preset("chain", seed=9, ticks=1)
    priors = scenario.init.node_priors(range(1, 7), 4, 9)
    for x in priors.values():
        assert np.all((0 <= x[:2]) & (x[:2] <= 500)) and np.all(x[2:] == 0)
    # Before any measurement the LKF at a silent node keeps its prior.
    traces = run(scenario)
    lkf = {t.node: t.estimate for t in _rows_by(traces, "LKF")}
    for i in (2, 3, 4, 5, 6):
        np.testing.assert_allclose(lkf[i], priors[i], rtol=1e-12)


def test_preset_contents():
    switch = preset("switch-at-65")
    assert switch.schedule.events == ((65, SwitchTopology(preset_edges("chain"))),)
    assert switch.topology == Topology.preset("dense-B")
    fail = preset("fail-at-65")
    assert fail.schedule.events == ((65, FailNodes({5, 6})),)
    assert fail.model.observers() == [2, 3]
    dense = preset("dense-tracking")
    kinds = {f.kind for f in dense.filters}
    assert {FilterKind.KCF, FilterKind.GKCF, FilterKind.ICF, FilterKind.IFDKF,
            FilterKind.CKF} <= kinds
    assert dense.ticks == 150 and dense.model.observers() == [1]


def test_unknown_preset_rejected():
    with pytest.raises(ConfigurationError, match="unknown scenario preset"):
        preset("mesh")


def test_numerical_failure_marks_remaining_rows(monkeypatch):
    real_step = sim.step

    def flaky(spec, beliefs, topology, pairs, model, tick=None):
        if spec.kind is FilterKind.KCF and tick == 3:
            raise NumericalDegeneracyError("injected", tick=tick, filter="KCF")
        return real_step(spec, beliefs, topology, pairs, model, tick=tick)

    monkeypatch.setattr(sim, "step", flaky)
    traces = run(preset("chain", seed=0, ticks=6))
    kcf = _rows_by(traces, "KCF")
    assert all(not t.failed for t in kcf if t.tick < 3)
    bad = [t for t in kcf if t.tick >= 3]
    assert len(bad) == 4 * 6
    assert all(t.failed and np.all(np.isnan(t.estimate)) for t in bad)
    assert not any(t.failed for t in traces if t.filter != "KCF")


def _scenario(**kw):
    base = Scenario(name="t", model=tracking_model([1], nodes=(1, 2)),
                    topology=Topology(2, [(1, 2)]), ticks=5, filters=ALL_FILTERS)
    return replace(base, **kw)


@pytest.mark.parametrize("kw, match", [
    (dict(ticks=0), "ticks"),
    (dict(filters=()), "at least one filter"),
    (dict(filters=(FilterSpec("LKF"), FilterSpec("LKF"))), "duplicate"),
    (dict(schedule=EventSchedule(((3, FailNodes({7})),))), "unknown nodes"),
    (dict(init=InitSpec(P0=np.eye(3))), "P0"),
    (dict(init=InitSpec(priors={9: np.zeros(4)})), "unknown nodes"),
    (dict(init=InitSpec(prior_range=(5.0, 1.0))), "prior_range"),
    (dict(model=tracking_model([1], nodes=(1, 2, 3))), "unknown nodes"),
    (dict(filters=(FilterSpec("LKF"),), resync_tick=2), "CKF"),
])
def test_invalid_scenarios_abort_before_running(kw, match):
    with pytest.raises(ConfigurationError, match=match):
        run(_scenario(**kw))


def test_run_many_matches_sequential_runs():
    scenario = preset("chain", ticks=10)
    parallel = run_many(scenario, [0, 1, 2], jobs=2)
    assert list(parallel) == [0, 1, 2]
    for s, traces in parallel.items():
        ref = run(replace(scenario, seed=s))
        assert [t.estimate.tolist() for t in traces] == [t.estimate.tolist() for t in ref]


def test_record_covariance():
    traces = run(preset("chain", ticks=2, filters=(FilterSpec("IFDKF"),)),
                 record_covariance=True)
    for t in traces:
        assert t.covariance.shape == (4, 4)
        assert t.cov_trace == pytest.approx(np.trace(t.covariance))
