"""Weighted least squares and Kalman update/predict in information form."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from ..errors import ConfigurationError, NumericalDegeneracyError, UnobservableError
from ..linalg import cholesky, spd_inv, symmetrize

_RANK_TOL = np.finfo(float).eps


@dataclass(frozen=True)
class NodeBelief:
    """Prior (x_prior, P_prior) and, once updated, posterior (x_post, P_post)."""

    x_prior: np.ndarray
    P_prior: np.ndarray
    x_post: np.ndarray | None = None
    P_post: np.ndarray | None = None

    @classmethod
    def from_prior(cls, x, P) -> "NodeBelief":
        return cls(np.array(x, dtype=float), symmetrize(np.array(P, dtype=float)))


def wls_estimate(H: np.ndarray, W: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted least squares: P = (H^T W H)^-1, x = P H^T W z.

    Solved by QR on the whitened system L^T H x = L^T z (W = L L^T) rather
    than through the normal equations, which square the condition number.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    z = np.asarray(z, dtype=float)
    try:
        L = cholesky(np.atleast_2d(W), "weight matrix", jitter=False)
    except NumericalDegeneracyError:
        raise ConfigurationError("WLS weight matrix must be positive definite") from None
    Qf, Rf = np.linalg.qr(L.T @ H)
    d = np.abs(np.diag(Rf))
    if H.shape[0] < H.shape[1] or d.min() <= _RANK_TOL * max(H.shape) * d.max():
        raise UnobservableError("H^T W H is singular; state is not observable")
    x = scipy.linalg.solve_triangular(Rf, Qf.T @ (L.T @ z))
    Rinv = scipy.linalg.solve_triangular(Rf, np.eye(Rf.shape[0]))
    return x, symmetrize(Rinv @ Rinv.T)


def information_update(info: np.ndarray, vec: np.ndarray, what: str = "posterior information"
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (x, M) from information matrix `info` and information vector `vec`."""
    M = spd_inv(info, what)
    return M @ vec, M


def kf_update(belief: NodeBelief, S: np.ndarray, y: np.ndarray) -> NodeBelief:
    """M = (S + P^-1)^-1, x_post = M (y + P^-1 x_prior)."""
    Pinv = spd_inv(belief.P_prior, "prior covariance")
    x, M = information_update(S + Pinv, y + Pinv @ belief.x_prior)
    return replace(belief, x_post=x, P_post=M)


def kf_predict(belief: NodeBelief, A: np.ndarray, BQBt: np.ndarray) -> NodeBelief:
    """Next-tick prior from the posterior: (A x_post, A M A^T + B Q B^T)."""
    if belief.x_post is None:
        raise ValueError("kf_predict called before the update of this tick")
    P = symmetrize(A @ belief.P_post @ A.T + BQBt)
    return NodeBelief(A @ belief.x_post, P)
