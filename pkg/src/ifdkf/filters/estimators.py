"""Centralized, local and distributed Kalman filters on a sensor network.

All distributed filters run in the same-frequency regime: per tick every
alive node measures, exchanges exactly one message with its neighbors,
updates and predicts. Messages are snapshotted before any node updates.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ConfigurationError, NumericalDegeneracyError
from ..graph import Topology, inclusive_neighborhood, max_degree
from ..linalg import spd_inv, symmetrize
from ..model import LinearModel
from .kernels import NodeBelief, information_update, kf_predict, kf_update

CKF_NODE = 0  # node id under which the single centralized belief is stored


class FilterKind(str, enum.Enum):
    CKF = "CKF"
    LKF = "LKF"
    KCF = "KCF"
    GKCF = "GKCF"
    ICF = "ICF"
    IFDKF = "IFDKF"

    @property
    def uses_epsilon(self) -> bool:
        return self in (FilterKind.KCF, FilterKind.GKCF, FilterKind.ICF)

    @property
    def distributed(self) -> bool:
        return self is not FilterKind.CKF


AUTO = "auto"
EPSILON_FACTOR = 0.65


@dataclass(frozen=True)
class FilterSpec:
    """A filter kind plus its consensus parameters.

    `epsilon` is a number or "auto" (0.65 / max degree of the initial
    topology). `node_count` is ICF's assumed network size and is never
    updated after construction.
    """

    kind: FilterKind
    epsilon: float | str | None = None
    node_count: int | None = None

    def __post_init__(self):
        kind = FilterKind(self.kind)
        object.__setattr__(self, "kind", kind)
        eps = self.epsilon
        if not kind.uses_epsilon:
            if eps is not None or self.node_count is not None:
                raise ConfigurationError(f"{kind.value} accepts no parameters")
            return
        if eps is None:
            eps = AUTO
        if eps != AUTO:
            eps = float(eps)
            if not eps > 0.0:
                raise ConfigurationError(f"{kind.value} epsilon must be > 0, got {eps}")
        object.__setattr__(self, "epsilon", eps)
        if self.node_count is not None and int(self.node_count) < 1:
            raise ConfigurationError("ICF node_count must be >= 1")

    @property
    def name(self) -> str:
        return self.kind.value

    def resolve(self, topology: Topology) -> "ResolvedFilter":
        eps = None
        if self.kind.uses_epsilon:
            dmax = max_degree(topology)
            if self.epsilon == AUTO:
                eps = EPSILON_FACTOR / dmax if dmax else EPSILON_FACTOR
            else:
                eps = float(self.epsilon)
                if dmax and eps >= 1.0 / dmax:
                    warnings.warn(f"{self.name}: epsilon={eps} >= 1/max_degree={1.0 / dmax:.4g}",
                                  RuntimeWarning, stacklevel=2)
        N = None
        if self.kind is FilterKind.ICF:
            N = int(self.node_count) if self.node_count is not None else topology.node_count
        return ResolvedFilter(self.kind, eps, N)


@dataclass(frozen=True)
class ResolvedFilter:
    """FilterSpec with epsilon and N frozen to numbers."""

    kind: FilterKind
    epsilon: float | None = None
    node_count: int | None = None

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class ExchangeMessage:
    sender: int
    S: np.ndarray
    y: np.ndarray
    x_prior: np.ndarray
    P_prior: np.ndarray


def _prior_information(inbox: Mapping[int, ExchangeMessage]) -> dict[int, np.ndarray]:
    out = {}
    for j, msg in inbox.items():
        try:
            out[j] = spd_inv(msg.P_prior, f"prior covariance of node {j}")
        except NumericalDegeneracyError as exc:
            raise exc.with_context(node=j)
    return out


def _check_inbox(own: int, inbox: Mapping[int, ExchangeMessage]) -> list[int]:
    if own not in inbox:
        raise ValueError(f"inbox of node {own} lacks its own message")
    return sorted(inbox)


def ifdkf_update(own: int, inbox: Mapping[int, ExchangeMessage]) -> NodeBelief:
    """Fully distributed update from one message per member of J_i.

    M = (sum S_j + mean_j P_j^-1)^-1,  x = M (sum y_j + mean_j P_j^-1 x_j).
    """
    members = _check_inbox(own, inbox)
    Pinv = _prior_information(inbox)
    c = 1.0 / len(members)
    S_bar = sum(inbox[j].S for j in members)
    y_bar = sum(inbox[j].y for j in members)
    prior_info = sum(Pinv[j] for j in members) * c
    prior_vec = sum(Pinv[j] @ inbox[j].x_prior for j in members) * c
    x, M = information_update(S_bar + prior_info, y_bar + prior_vec)
    me = inbox[own]
    return NodeBelief(me.x_prior, me.P_prior, x, M)


def ifdkf_consensus_form(own: int, inbox: Mapping[int, ExchangeMessage]) -> np.ndarray:
    """Posterior state of `ifdkf_update` written as prior + innovation + consensus."""
    members = _check_inbox(own, inbox)
    Pinv = _prior_information(inbox)
    c = 1.0 / len(members)
    xi = inbox[own].x_prior
    S_bar = sum(inbox[j].S for j in members)
    y_bar = sum(inbox[j].y for j in members)
    M = spd_inv(S_bar + c * sum(Pinv[j] for j in members))
    consensus = sum(Pinv[j] @ (inbox[j].x_prior - xi) for j in members)
    return xi + M @ (y_bar - S_bar @ xi) + c * (M @ consensus)


def naive_fusion_update(own: int, inbox: Mapping[int, ExchangeMessage]) -> NodeBelief:
    """Block-diagonal approximation without the |J_i| correction.

    Counts every neighbor's prior information at full weight; kept for
    comparison against `ifdkf_update`.
    """
    members = _check_inbox(own, inbox)
    Pinv = _prior_information(inbox)
    S_bar = sum(inbox[j].S for j in members)
    y_bar = sum(inbox[j].y for j in members)
    x, M = information_update(S_bar + sum(Pinv.values()),
                              y_bar + sum(Pinv[j] @ inbox[j].x_prior for j in members))
    me = inbox[own]
    return NodeBelief(me.x_prior, me.P_prior, x, M)


def _check_epsilon(epsilon: float) -> float:
    if epsilon is None or epsilon < 0.0:
        raise ConfigurationError(f"consensus step must be >= 0, got {epsilon}")
    return float(epsilon)


def kcf_update(own: int, inbox: Mapping[int, ExchangeMessage], epsilon: float) -> NodeBelief:
    """Kalman consensus filter.

    x = x_i + M (y_bar - S_bar x_i) + gamma * sum_{N_i} (x_j - x_i)
    with M = (P_i^-1 + S_bar)^-1 and gamma = eps P_i / (1 + ||P_i||_F).
    """
    eps = _check_epsilon(epsilon)
    members = _check_inbox(own, inbox)
    me = inbox[own]
    S_bar = sum(inbox[j].S for j in members)
    y_bar = sum(inbox[j].y for j in members)
    try:
        Pinv = spd_inv(me.P_prior, f"prior covariance of node {own}")
    except NumericalDegeneracyError as exc:
        raise exc.with_context(node=own)
    M = spd_inv(S_bar + Pinv)
    gamma = eps * me.P_prior / (1.0 + np.linalg.norm(me.P_prior, "fro"))
    disagreement = sum((inbox[j].x_prior - me.x_prior for j in members if j != own),
                       np.zeros_like(me.x_prior))
    x = me.x_prior + M @ (y_bar - S_bar @ me.x_prior) + gamma @ disagreement
    return NodeBelief(me.x_prior, me.P_prior, x, M)


def gkcf_update(own: int, inbox: Mapping[int, ExchangeMessage], epsilon: float) -> NodeBelief:
    """Generalized Kalman consensus filter.

    One consensus sweep on the prior information pair (P^-1, P^-1 x), then
    a measurement update with the neighborhood's summed (S, y).
    """
    eps = _check_epsilon(epsilon)
    members = _check_inbox(own, inbox)
    Pinv = _prior_information(inbox)
    omega = {j: Pinv[j] @ inbox[j].x_prior for j in members}
    W = Pinv[own] + eps * sum((Pinv[j] - Pinv[own] for j in members if j != own),
                              np.zeros_like(Pinv[own]))
    w = omega[own] + eps * sum((omega[j] - omega[own] for j in members if j != own),
                               np.zeros_like(omega[own]))
    S_bar = sum(inbox[j].S for j in members)
    y_bar = sum(inbox[j].y for j in members)
    x, M = information_update(S_bar + symmetrize(W), y_bar + w)
    me = inbox[own]
    return NodeBelief(me.x_prior, me.P_prior, x, M)


def icf_update(own: int, inbox: Mapping[int, ExchangeMessage], epsilon: float,
               node_count: int) -> NodeBelief:
    """Information weighted consensus filter with a single consensus sweep.

    V_j = P_j^-1 / N + S_j and u_j = P_j^-1 x_j / N + y_j, one sweep of
    V_i <- V_i + eps sum_{N_i} (V_j - V_i) (same for u), then M = (N V_i)^-1
    and x = M N u_i.
    """
    eps = _check_epsilon(epsilon)
    if node_count is None or node_count < 1:
        raise ConfigurationError("ICF requires a node count >= 1")
    members = _check_inbox(own, inbox)
    Pinv = _prior_information(inbox)
    inv_n = 1.0 / node_count
    V = {j: inv_n * Pinv[j] + inbox[j].S for j in members}
    u = {j: inv_n * (Pinv[j] @ inbox[j].x_prior) + inbox[j].y for j in members}
    Vi = V[own] + eps * sum((V[j] - V[own] for j in members if j != own), np.zeros_like(V[own]))
    ui = u[own] + eps * sum((u[j] - u[own] for j in members if j != own), np.zeros_like(u[own]))
    x, M = information_update(node_count * symmetrize(Vi), node_count * ui)
    me = inbox[own]
    return NodeBelief(me.x_prior, me.P_prior, x, M)


def lkf_step(belief: NodeBelief, S: np.ndarray, y: np.ndarray, model: LinearModel) -> NodeBelief:
    """Local Kalman filter: own information only, then predict."""
    return kf_predict(kf_update(belief, S, y), model.A, model.BQBt)


def ckf_step(belief: NodeBelief, pairs: Mapping[int, tuple[np.ndarray, np.ndarray]],
             model: LinearModel) -> tuple[NodeBelief, NodeBelief]:
    """Centralized filter fusing every supplied information pair.

    Returns (posterior, next prior).
    """
    n = model.n
    S = sum((pairs[i][0] for i in sorted(pairs)), np.zeros((n, n)))
    y = sum((pairs[i][1] for i in sorted(pairs)), np.zeros(n))
    post = kf_update(belief, S, y)
    return post, kf_predict(post, model.A, model.BQBt)


@dataclass
class StepResult:
    posteriors: dict[int, NodeBelief]
    priors: dict[int, NodeBelief]
    messages: dict[int, ExchangeMessage] = field(default_factory=dict)


def broadcast(beliefs: Mapping[int, NodeBelief],
              pairs: Mapping[int, tuple[np.ndarray, np.ndarray]],
              topology: Topology) -> dict[int, ExchangeMessage]:
    """Snapshot of every alive node's outgoing message for this tick."""
    return {i: ExchangeMessage(i, pairs[i][0], pairs[i][1], beliefs[i].x_prior, beliefs[i].P_prior)
            for i in topology.nodes}


def step(spec: ResolvedFilter, beliefs: Mapping[int, NodeBelief], topology: Topology,
         pairs: Mapping[int, tuple[np.ndarray, np.ndarray]], model: LinearModel,
         tick: int | None = None) -> StepResult:
    """Advance one filter by one tick.

    `beliefs` holds the current priors (key CKF_NODE for the centralized
    filter); `pairs` maps every alive node to its information pair. Dead
    nodes are skipped and keep their last belief.
    """
    kind = spec.kind
    try:
        if kind is FilterKind.CKF:
            alive_pairs = {i: pairs[i] for i in topology.nodes}
            post, prior = ckf_step(beliefs[CKF_NODE], alive_pairs, model)
            return StepResult({CKF_NODE: post}, {CKF_NODE: prior})

        messages = broadcast(beliefs, pairs, topology)
        posteriors: dict[int, NodeBelief] = {}
        for i in topology.nodes:
            if kind is FilterKind.LKF:
                posteriors[i] = kf_update(beliefs[i], *pairs[i])
                continue
            inbox = {j: messages[j] for j in inclusive_neighborhood(topology, i)}
            try:
                if kind is FilterKind.IFDKF:
                    posteriors[i] = ifdkf_update(i, inbox)
                elif kind is FilterKind.KCF:
                    posteriors[i] = kcf_update(i, inbox, spec.epsilon)
                elif kind is FilterKind.GKCF:
                    posteriors[i] = gkcf_update(i, inbox, spec.epsilon)
                else:
                    posteriors[i] = icf_update(i, inbox, spec.epsilon, spec.node_count)
            except NumericalDegeneracyError as exc:
                raise exc.with_context(node=i)
        priors = {i: kf_predict(b, model.A, model.BQBt) for i, b in posteriors.items()}
        return StepResult(posteriors, priors, messages)
    except NumericalDegeneracyError as exc:
        raise exc.with_context(tick=tick, filter=kind.value)


__all__ = [
    "AUTO", "CKF_NODE", "ExchangeMessage", "FilterKind", "FilterSpec", "ResolvedFilter",
    "StepResult", "broadcast", "ckf_step", "gkcf_update", "icf_update", "ifdkf_consensus_form",
    "ifdkf_update", "kcf_update", "lkf_step", "naive_fusion_update", "step",
]
