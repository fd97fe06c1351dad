"""Small dense symmetric positive definite helpers.

Every covariance that leaves this module is re-symmetrized. Factorization
failures get one bounded diagonal jitter before giving up.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NumericalDegeneracyError

JITTER_SCALE = 1e-9


def symmetrize(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def cholesky(X: np.ndarray, what: str = "matrix", jitter: bool = True) -> np.ndarray:
    """Lower Cholesky factor of `X`, with a single jitter retry unless disabled."""
    X = symmetrize(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise NumericalDegeneracyError(f"{what} has non-finite entries")
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        if not jitter:
            raise NumericalDegeneracyError(f"{what} is not positive definite") from None
    n = X.shape[0]
    trace = float(np.trace(X))
    if not np.isfinite(trace) or trace <= 0.0:
        raise NumericalDegeneracyError(f"{what} is not positive definite")
    jittered = X + (JITTER_SCALE * trace / n) * np.eye(n)
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError:
        raise NumericalDegeneracyError(
            f"{what} is not positive definite") from None


def spd_inv(X: np.ndarray, what: str = "matrix", jitter: bool = True) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    L = cholesky(X, what, jitter)
    n = L.shape[0]
    Linv = scipy.linalg.solve_triangular(L, np.eye(n), lower=True)
    return symmetrize(Linv.T @ Linv)


def spd_solve(X: np.ndarray, b: np.ndarray, what: str = "matrix") -> np.ndarray:
    L = cholesky(X, what)
    return scipy.linalg.cho_solve((L, True), b)


def is_spd(X: np.ndarray, tol: float = 0.0) -> bool:
    X = np.asarray(X, dtype=float)
    if not np.allclose(X, X.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(X).max())):
        return False
    return bool(np.linalg.eigvalsh(symmetrize(X)).min() > tol)


def is_psd(X: np.ndarray, tol: float = 1e-12) -> bool:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return True
    scale = max(1.0, float(np.abs(X).max()))
    if not np.allclose(X, X.T, atol=tol * scale):
        return False
    return bool(np.linalg.eigvalsh(symmetrize(X)).min() >= -tol * scale)
