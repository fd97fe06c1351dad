"""Non-distributed reference update using true prior cross-covariances.

Only usable on small graphs: it needs the joint prior error covariance of
every node pair, which `JointErrorTracker` propagates exactly for the
IFDKF recursion. Test scaffolding, never used in the distributed loop.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import NumericalDegeneracyError, OracleError
from ..graph import Topology, inclusive_neighborhood
from ..linalg import spd_inv, symmetrize
from ..model import LinearModel
from .estimators import ExchangeMessage
from .kernels import NodeBelief, information_update

MAX_ORACLE_NODES = 4


def _robust_inverse(P: np.ndarray, Hs: np.ndarray) -> np.ndarray:
    try:
        return spd_inv(P, "joint prior covariance", jitter=False)
    except NumericalDegeneracyError:
        pass
    # Rank-deficient joint covariance (fully redundant priors) is fine as long
    # as the stacked identity lies in its range.
    Pp = np.linalg.pinv(symmetrize(P), hermitian=True)
    if np.linalg.norm(P @ Pp @ Hs - Hs) > 1e-8 * max(1.0, np.linalg.norm(Hs)):
        raise OracleError("joint prior covariance is singular") from None
    return symmetrize(Pp)


def exact_joint_update(own: int, inbox: Mapping[int, ExchangeMessage],
                       cross_covariance: Mapping[tuple[int, int], np.ndarray]) -> NodeBelief:
    """Update of node `own` with the full joint prior covariance of J_i.

    `cross_covariance[(j, k)]` is E[err_j err_k^T] for members j, k of the
    inbox; the diagonal blocks default to each sender's P_prior.
    """
    members = sorted(inbox)
    n = inbox[own].x_prior.shape[0]
    blocks = []
    for j in members:
        row = []
        for k in members:
            if j == k:
                row.append(cross_covariance.get((j, j), inbox[j].P_prior))
            elif (j, k) in cross_covariance:
                row.append(cross_covariance[(j, k)])
            elif (k, j) in cross_covariance:
                row.append(cross_covariance[(k, j)].T)
            else:
                raise OracleError(f"missing cross-covariance for nodes {j}, {k}")
        blocks.append(row)
    P_joint = symmetrize(np.block(blocks))
    Hs = np.vstack([np.eye(n)] * len(members))
    Pinv = _robust_inverse(P_joint, Hs)
    x_stack = np.concatenate([inbox[j].x_prior for j in members])
    S_bar = sum(inbox[j].S for j in members)
    y_bar = sum(inbox[j].y for j in members)
    x, M = information_update(S_bar + symmetrize(Hs.T @ Pinv @ Hs), y_bar + Hs.T @ Pinv @ x_stack)
    me = inbox[own]
    return NodeBelief(me.x_prior, me.P_prior, x, M)


class JointErrorTracker:
    """Exact joint error covariance of all nodes under the IFDKF recursion.

    The posterior error of node i is linear in the prior errors and
    measurement noises of J_i,

        e_i = M_i (sum_j H_j^T R_j^-1 v_j + |J_i|^-1 sum_j P_j^-1 e_prior_j),

    and every node's prior error shares the same process noise, so the
    stacked covariance propagates in closed form.
    """

    def __init__(self, model: LinearModel, node_ids, joint_prior: np.ndarray):
        self.model = model
        self.nodes = sorted(node_ids)
        if len(self.nodes) > MAX_ORACLE_NODES:
            raise OracleError(f"oracle limited to {MAX_ORACLE_NODES} nodes")
        n = model.n
        self._index = {i: slice(k * n, (k + 1) * n) for k, i in enumerate(self.nodes)}
        self.prior = symmetrize(np.asarray(joint_prior, dtype=float))
        if self.prior.shape != (n * len(self.nodes),) * 2:
            raise OracleError("joint prior has the wrong shape")
        self.posterior: np.ndarray | None = None

    def block(self, cov: np.ndarray, i: int, j: int) -> np.ndarray:
        return cov[self._index[i], self._index[j]]

    def cross_covariances(self, members) -> dict[tuple[int, int], np.ndarray]:
        return {(j, k): self.block(self.prior, j, k) for j in members for k in members}

    def update(self, topology: Topology, filter_priors: Mapping[int, NodeBelief],
               filter_posteriors: Mapping[int, NodeBelief]) -> np.ndarray:
        """Joint posterior error covariance given the filter's own M_i and P_j."""
        model, n, N = self.model, self.model.n, len(self.nodes)
        G = np.zeros((N * n, N * n))
        sensors = [model.sensor(i) for i in self.nodes]
        offsets = np.cumsum([0] + [s.m for s in sensors])
        F = np.zeros((N * n, offsets[-1]))
        R_all = np.zeros((offsets[-1], offsets[-1]))
        for k, s in enumerate(sensors):
            R_all[offsets[k]:offsets[k + 1], offsets[k]:offsets[k + 1]] = s.R
        for i in self.nodes:
            J = sorted(inclusive_neighborhood(topology, i))
            M = filter_posteriors[i].P_post
            for j in J:
                G[self._index[i], self._index[j]] = M @ spd_inv(filter_priors[j].P_prior) / len(J)
                s = model.sensor(j)
                if s.observes:
                    kj = self.nodes.index(j)
                    F[self._index[i], offsets[kj]:offsets[kj + 1]] = M @ s.H.T @ s._Rinv
        self.posterior = symmetrize(G @ self.prior @ G.T + F @ R_all @ F.T)
        return self.posterior

    def predict(self) -> np.ndarray:
        N = len(self.nodes)
        A_all = np.kron(np.eye(N), self.model.A)
        self.prior = symmetrize(A_all @ self.posterior @ A_all.T
                                + np.kron(np.ones((N, N)), self.model.BQBt))
        return self.prior
