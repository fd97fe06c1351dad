import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifdkf.errors import ConfigurationError, NumericalDegeneracyError
from ifdkf.filters import (CKF_NODE, ExchangeMessage, FilterKind, FilterSpec, NodeBelief,
                           ckf_step, gkcf_update, icf_update, ifdkf_consensus_form, ifdkf_update,
                           kcf_update, kf_update, lkf_step, naive_fusion_update, step)
from ifdkf.graph import Topology
from ifdkf.linalg import is_spd
from ifdkf.model import (GaussianSource, information_pair, measure, tracking_model, simulate_truth)

from conftest import gain_form_update, random_message, random_spd


def _inbox(rng, size, n=4):
    return {j: random_message(rng, j, n, observes=rng.random() < 0.6) for j in range(1, size + 1)}


def test_ifdkf_isolated_node_equals_lkf_update(rng):
    msg = random_message(rng, 1)
    a = ifdkf_update(1, {1: msg})
    b = kf_update(NodeBelief.from_prior(msg.x_prior, msg.P_prior), msg.S, msg.y)
    assert a.x_post.tobytes() == b.x_post.tobytes()
    assert a.P_post.tobytes() == b.P_post.tobytes()


def test_ifdkf_identical_priors_no_measurements_fixed_point(rng):
    P = random_spd(rng, 4)
    x = rng.standard_normal(4)
    inbox = {j: ExchangeMessage(j, np.zeros((4, 4)), np.zeros(4), x, P) for j in (1, 2, 3)}
    b = ifdkf_update(2, inbox)
    np.testing.assert_allclose(b.x_post, x, atol=1e-10)
    np.testing.assert_allclose(b.P_post, P, rtol=1e-10)


def test_ifdkf_star_matches_consensus_form(rng):
    inbox = _inbox(rng, 3)
    np.testing.assert_allclose(ifdkf_update(1, inbox).x_post, ifdkf_consensus_form(1, inbox),
                               atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), size=st.integers(1, 5))
def test_ifdkf_consensus_form_equivalence_property(seed, size):
    rng = np.random.default_rng(seed)
    inbox = _inbox(rng, size)
    own = int(rng.integers(1, size + 1))
    a = ifdkf_update(own, inbox).x_post
    b = ifdkf_consensus_form(own, inbox)
    np.testing.assert_allclose(a, b, atol=1e-9 * max(1.0, np.abs(a).max()))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), size=st.integers(1, 5))
def test_ifdkf_posterior_pd(seed, size):
    rng = np.random.default_rng(seed)
    assert is_spd(ifdkf_update(1, _inbox(rng, size)).P_post)


def test_ifdkf_posterior_not_above_shared_prior(rng):
    P = random_spd(rng, 4, scale=20.0)
    inbox = {}
    for j in (1, 2, 3):
        m = random_message(rng, j)
        inbox[j] = ExchangeMessage(j, m.S, m.y, m.x_prior, P)
    M = ifdkf_update(1, inbox).P_post
    assert np.linalg.eigvalsh(P - M).min() >= -1e-9


def test_prior_information_underestimation_factor(rng):
    # equal priors: naive fusion counts prior information |J| times, IFDKF once
    Pc = random_spd(rng, 4)
    inbox = {j: ExchangeMessage(j, np.zeros((4, 4)), np.zeros(4), rng.standard_normal(4), Pc)
             for j in range(1, 5)}
    naive = np.linalg.inv(naive_fusion_update(1, inbox).P_post)
    ours = np.linalg.inv(ifdkf_update(1, inbox).P_post)
    np.testing.assert_allclose(naive, 4 * np.linalg.inv(Pc), rtol=1e-9)
    np.testing.assert_allclose(ours, np.linalg.inv(Pc), rtol=1e-9)


def test_ifdkf_names_offending_sender(rng):
    inbox = _inbox(rng, 3)
    bad = inbox[2]
    inbox[2] = ExchangeMessage(2, bad.S, bad.y, bad.x_prior, -np.eye(4))
    with pytest.raises(NumericalDegeneracyError) as err:
        ifdkf_update(1, inbox)
    assert err.value.node == 2


def test_ckf_single_sensor_equals_lkf(rng):
    model = tracking_model([1])
    b = NodeBelief.from_prior(rng.standard_normal(4) * 100, 1e4 * np.eye(4))
    S, y = information_pair(model.sensor(1), np.array([3.0, 4.0]))
    post, prior = ckf_step(b, {1: (S, y), 2: information_pair(model.sensor(2), None)}, model)
    lkf = lkf_step(b, S, y, model)
    np.testing.assert_allclose(prior.x_prior, lkf.x_prior, atol=1e-12)
    np.testing.assert_allclose(prior.P_prior, lkf.P_prior, atol=1e-12)


def test_ckf_information_additivity():
    model = tracking_model([1, 2])
    S1, _ = information_pair(model.sensor(1), np.zeros(2))
    b = NodeBelief.from_prior(np.zeros(4), np.eye(4))
    one, _ = ckf_step(b, {1: (S1, np.zeros(4))}, model)
    two, _ = ckf_step(b, {1: (S1, np.zeros(4)), 2: (S1, np.zeros(4))}, model)
    np.testing.assert_allclose(np.linalg.inv(two.P_post) - np.linalg.inv(b.P_prior),
                               2 * S1, atol=1e-12)
    np.testing.assert_allclose(np.linalg.inv(one.P_post) - np.linalg.inv(b.P_prior), S1, atol=1e-12)


def test_ckf_matches_textbook_kalman_filter_trace():
    model = tracking_model([1, 3, 5])
    truth = simulate_truth(model, np.zeros(4), 150, seed=4)
    noise = {i: GaussianSource.seeded(4, 1, i) for i in (1, 3, 5)}
    b = NodeBelief.from_prior(np.array([250.0, 250.0, 0.0, 0.0]), 1e4 * np.eye(4))
    x_ref, P_ref = b.x_prior.copy(), b.P_prior.copy()
    H_all = np.vstack([model.sensor(i).H for i in (1, 3, 5)])
    R_all = np.kron(np.eye(3), model.sensor(1).R)
    for k in range(1, 151):
        zs = {i: measure(model.sensor(i), truth[k], noise[i]) for i in (1, 3, 5)}
        post, b = ckf_step(b, {i: information_pair(model.sensor(i), zs[i]) for i in zs}, model)
        x_ref, P_ref = gain_form_update(x_ref, P_ref, H_all, R_all,
                                        np.concatenate([zs[i].z for i in (1, 3, 5)]))
        np.testing.assert_allclose(post.x_post, x_ref, atol=1e-9)
        np.testing.assert_allclose(post.P_post, P_ref, atol=1e-9)
        x_ref, P_ref = model.A @ x_ref, model.A @ P_ref @ model.A.T + model.BQBt


def test_lkf_zero_information_is_pure_prediction(rng):
    model = tracking_model([1])
    P = random_spd(rng, 4)
    b = NodeBelief.from_prior(np.ones(4), P)
    nxt = lkf_step(b, np.zeros((4, 4)), np.zeros(4), model)
    np.testing.assert_allclose(nxt.x_prior, model.A @ np.ones(4), atol=1e-12)
    np.testing.assert_allclose(nxt.P_prior, model.A @ P @ model.A.T + model.BQBt, rtol=1e-10)


def test_lkf_scalar_equal_weighting():
    from ifdkf.model import LinearModel
    model = LinearModel(np.eye(1), np.eye(1), np.zeros((1, 1)), {})
    nxt = lkf_step(NodeBelief.from_prior([0.0], [[1.0]]), np.eye(1), np.array([2.0]), model)
    np.testing.assert_allclose(nxt.x_prior, [1.0])
    np.testing.assert_allclose(nxt.P_prior, [[0.5]])


def test_lkf_matches_gain_form(rng):
    model = tracking_model([1])
    for _ in range(50):
        P = random_spd(rng, 4, scale=30.0)
        x = rng.standard_normal(4) * 10
        z = rng.standard_normal(2) * 10
        S, y = information_pair(model.sensor(1), z)
        nxt = lkf_step(NodeBelief.from_prior(x, P), S, y, model)
        xg, Pg = gain_form_update(x, P, model.sensor(1).H, model.sensor(1).R, z)
        np.testing.assert_allclose(nxt.x_prior, model.A @ xg, atol=1e-9)
        np.testing.assert_allclose(nxt.P_prior, model.A @ Pg @ model.A.T + model.BQBt, atol=1e-9)


def _run_network(spec, topology, model, priors, P0, ticks, seed):
    truth = simulate_truth(model, np.zeros(4), ticks, seed)
    noise = {i: GaussianSource.seeded(seed, 1, i) for i in topology.nodes}
    beliefs = {i: NodeBelief.from_prior(priors[i], P0) for i in topology.nodes}
    if spec.kind is FilterKind.CKF:
        beliefs = {CKF_NODE: NodeBelief.from_prior(np.mean(list(priors.values()), axis=0), P0)}
    resolved = spec.resolve(topology)
    history = []
    for k in range(1, ticks + 1):
        pairs = {i: information_pair(model.sensor(i), measure(model.sensor(i), truth[k], noise[i]))
                 for i in topology.nodes}
        res = step(resolved, beliefs, topology, pairs, model, tick=k)
        history.append(res.posteriors)
        beliefs.update(res.priors)
    return truth, history


def test_kcf_two_node_complete_graph_agrees():
    model = tracking_model([1, 2], nodes=(1, 2))
    topo = Topology.preset("complete", 2)
    prior = np.array([100.0, 300.0, 0.0, 0.0])
    _, hist = _run_network(FilterSpec("KCF"), topo, model, {1: prior, 2: prior},
                           1e4 * np.eye(4), 50, 3)
    np.testing.assert_allclose(hist[-1][1].x_post, hist[-1][2].x_post, atol=1e-6)


def test_kcf_two_node_disagreement_contracts():
    model = tracking_model([1, 2], nodes=(1, 2))
    topo = Topology.preset("complete", 2)
    priors = {1: np.array([100.0, 300.0, 0.0, 0.0]), 2: np.array([400.0, 50.0, 0.0, 0.0])}
    _, hist = _run_network(FilterSpec("KCF"), topo, model, priors, 1e4 * np.eye(4), 50, 3)
    start = np.linalg.norm(priors[1] - priors[2])
    end = np.linalg.norm(hist[-1][1].x_post - hist[-1][2].x_post)
    assert end < 1e-6 * start


def test_icf_with_correct_n_matches_ckf_on_complete_graph():
    model = tracking_model([1, 2, 3], nodes=(1, 2, 3))
    topo = Topology.preset("complete", 3)
    prior = np.array([200.0, 200.0, 0.0, 0.0])
    priors = {i: prior for i in (1, 2, 3)}
    # one sweep with eps = 1/N on a complete graph is an exact average
    icf = FilterSpec("ICF", epsilon=1 / 3, node_count=3)
    _, h_icf = _run_network(icf, topo, model, priors, 1e4 * np.eye(4), 150, 8)
    _, h_ckf = _run_network(FilterSpec("CKF"), topo, model, priors, 1e4 * np.eye(4), 150, 8)
    for a, c in zip(h_icf, h_ckf):
        for i in (1, 2, 3):
            np.testing.assert_allclose(a[i].x_post, c[CKF_NODE].x_post, atol=1e-6)


def test_gkcf_zero_epsilon_naive_nodes_only_predict(rng):
    model = tracking_model([1], nodes=(1, 2, 3))
    msgs = {j: ExchangeMessage(j, *information_pair(model.sensor(j), np.array([5.0, 5.0])
                                                    if j == 1 else None),
                               rng.standard_normal(4) * 50, random_spd(rng, 4, 100.0))
            for j in (1, 2, 3)}
    b = gkcf_update(3, {2: msgs[2], 3: msgs[3]}, 0.0)
    np.testing.assert_allclose(b.x_post, msgs[3].x_prior, atol=1e-9)
    np.testing.assert_allclose(b.P_post, msgs[3].P_prior, rtol=1e-9)


def test_consensus_filters_reject_negative_epsilon(rng):
    inbox = _inbox(rng, 2)
    for fn in (kcf_update, gkcf_update):
        with pytest.raises(ConfigurationError):
            fn(1, inbox, -0.1)
    with pytest.raises(ConfigurationError):
        icf_update(1, inbox, -0.1, 6)


def test_filter_spec_validation():
    with pytest.raises(ConfigurationError):
        FilterSpec("ICF", epsilon=0.0)
    with pytest.raises(ConfigurationError):
        FilterSpec("IFDKF", epsilon=0.1)
    with pytest.raises(ValueError):
        FilterSpec("XKF")


def test_epsilon_auto_and_large_epsilon_warning():
    topo = Topology.preset("dense-A")
    assert FilterSpec("GKCF").resolve(topo).epsilon == pytest.approx(0.65 / 4)
    with pytest.warns(RuntimeWarning):
        FilterSpec("GKCF", epsilon=0.5).resolve(topo)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        FilterSpec("GKCF", epsilon=0.2).resolve(topo)


def test_icf_node_count_defaults_to_configured_size():
    assert FilterSpec("ICF").resolve(Topology.preset("dense-B")).node_count == 6


@pytest.mark.parametrize("kind", list(FilterKind))
def test_one_tick_zero_noise_perfect_prior_stays_at_truth(kind):
    model = tracking_model([1])
    topo = Topology.preset("dense-A")
    x1 = model.A @ np.array([0.0, 0.0, 1.0, 1.0])
    pairs = {i: information_pair(model.sensor(i),
                                 measure(model.sensor(i), x1, GaussianSource.disabled()))
             for i in topo.nodes}
    nodes = [CKF_NODE] if kind is FilterKind.CKF else topo.nodes
    beliefs = {i: NodeBelief.from_prior(x1, 1e4 * np.eye(4)) for i in nodes}
    res = step(FilterSpec(kind).resolve(topo), beliefs, topo, pairs, model, tick=1)
    for i in nodes:
        np.testing.assert_allclose(res.posteriors[i].x_post, x1, atol=1e-9)


def test_step_skips_dead_nodes_and_tags_errors():
    from dataclasses import replace
    model = tracking_model([1])
    topo = replace(Topology.preset("dense-B"), alive=frozenset({1, 2, 3, 4}))
    beliefs = {i: NodeBelief.from_prior(np.zeros(4), np.eye(4)) for i in range(1, 7)}
    pairs = {i: information_pair(model.sensor(i), None) for i in topo.nodes}
    res = step(FilterSpec("IFDKF").resolve(topo), beliefs, topo, pairs, model, tick=3)
    assert set(res.posteriors) == {1, 2, 3, 4}
    beliefs[2] = NodeBelief.from_prior(np.zeros(4), -np.eye(4))
    with pytest.raises(NumericalDegeneracyError) as err:
        step(FilterSpec("IFDKF").resolve(topo), beliefs, topo, pairs, model, tick=3)
    assert (err.value.tick, err.value.filter) == (3, "IFDKF")
