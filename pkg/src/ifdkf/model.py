"""Linear time-invariant target model and per-node linear sensors.

    x[k] = A x[k-1] + B w[k],   w ~ N(0, Q)
    z_i  = H_i x[k] + v_i,      v_i ~ N(0, R_i)

A node that does not observe the target carries an empty sensor (zero
measurement rows) and contributes a zero information pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError
from .linalg import is_psd, spd_inv, symmetrize

# Stream roles for seeded noise. Keyed by role (and node) rather than spawn
# order so that adding a node never perturbs another node's noise.
PROCESS_STREAM = 0
MEASUREMENT_STREAM = 1
PRIOR_STREAM = 2


def _psd_factor(C: np.ndarray) -> np.ndarray:
    """F with F F^T = C for a symmetric PSD C (singular allowed)."""
    if C.size == 0:
        return np.zeros_like(C)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(symmetrize(C))
        return V * np.sqrt(np.clip(w, 0.0, None))


class GaussianSource:
    """Seeded standard-normal stream, or a silent one that always returns 0.

    Copying the source (``copy.deepcopy``) snapshots the generator state, so
    consuming the copy reproduces the original's next draws exactly.
    """

    def __init__(self, rng: np.random.Generator | None):
        self._rng = rng

    @classmethod
    def seeded(cls, seed: int, *key: int) -> "GaussianSource":
        return cls(np.random.default_rng([int(seed), *map(int, key)]))

    @classmethod
    def disabled(cls) -> "GaussianSource":
        return cls(None)

    @property
    def enabled(self) -> bool:
        return self._rng is not None

    def correlated(self, factor: np.ndarray) -> np.ndarray:
        """Draw ``factor @ e`` with e ~ N(0, I)."""
        if self._rng is None:
            return np.zeros(factor.shape[0])
        return factor @ self._rng.standard_normal(factor.shape[1])

    def uniform(self, low: float, high: float, size: int) -> np.ndarray:
        if self._rng is None:
            return np.full(size, 0.5 * (low + high))
        return self._rng.uniform(low, high, size)


@dataclass(frozen=True)
class SensorModel:
    H: np.ndarray
    R: np.ndarray
    S: np.ndarray = field(init=False, repr=False, compare=False)
    _Rinv: np.ndarray = field(init=False, repr=False, compare=False)
    _factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if R.size == 0:
            R = np.zeros((0, 0))
        if H.ndim != 2 or R.shape != (H.shape[0], H.shape[0]):
            raise ConfigurationError(
                f"sensor R must be {H.shape[0]}x{H.shape[0]}, got shape {R.shape}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "R", R)
        m = H.shape[0]
        if m == 0:
            Rinv = np.zeros((0, 0))
        else:
            if not np.allclose(R, R.T):
                raise ConfigurationError("sensor R must be symmetric")
            try:
                Rinv = spd_inv(R, "sensor R", jitter=False)
            except ArithmeticError:
                raise ConfigurationError("sensor R must be positive definite") from None
        object.__setattr__(self, "_Rinv", Rinv)
        object.__setattr__(self, "S", symmetrize(H.T @ Rinv @ H))
        object.__setattr__(self, "_factor", _psd_factor(R))

    @classmethod
    def silent(cls, n: int) -> "SensorModel":
        return cls(np.zeros((0, n)), np.zeros((0, 0)))

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def observes(self) -> bool:
        return self.m > 0


@dataclass(frozen=True)
class Measurement:
    node: int
    z: np.ndarray
    tick: int


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    sensors: Mapping[int, SensorModel]
    BQBt: np.ndarray = field(init=False, repr=False, compare=False)
    _q_factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigurationError(f"model.A must be square, got shape {A.shape}")
        B = np.asarray(self.B, dtype=float)
        if B.size == 0:
            B = np.zeros((n, 0))
        if B.ndim != 2 or B.shape[0] != n:
            raise ConfigurationError(f"model.B must have {n} rows, got shape {B.shape}")
        p = B.shape[1]
        Q = np.asarray(self.Q, dtype=float)
        if Q.size == 0 and p == 0:
            Q = np.zeros((0, 0))
        if Q.shape != (p, p):
            raise ConfigurationError(f"model.Q must be {p}x{p}, got shape {Q.shape}")
        if not is_psd(Q):
            raise ConfigurationError("model.Q must be symmetric positive semidefinite")
        sensors = dict(self.sensors)
        for node, sensor in sensors.items():
            if sensor.n != n:
                raise ConfigurationError(
                    f"model.sensors.{node}.H must have {n} columns, got {sensor.n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "sensors", sensors)
        object.__setattr__(self, "BQBt", symmetrize(B @ Q @ B.T))
        object.__setattr__(self, "_q_factor", _psd_factor(Q))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def sensor(self, node: int) -> SensorModel:
        return self.sensors.get(node) or SensorModel.silent(self.n)

    def observers(self) -> list[int]:
        return sorted(i for i, s in self.sensors.items() if s.observes)


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # shape (K + 1, n); row k is x[k]
    seed: int

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.states[k]


def _check_state(model: LinearModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ConfigurationError(f"state must have shape ({model.n},), got {x.shape}")
    return x


def step_truth(model: LinearModel, x: np.ndarray, noise: GaussianSource) -> np.ndarray:
    x = _check_state(model, x)
    w = noise.correlated(model._q_factor)
    return model.A @ x + model.B @ w


def measure(sensor: SensorModel, x: np.ndarray, noise: GaussianSource,
            node: int = 0, tick: int = 0) -> Measurement | None:
    x = np.asarray(x, dtype=float)
    if x.shape != (sensor.n,):
        raise ConfigurationError(f"state must have shape ({sensor.n},), got {x.shape}")
    if not sensor.observes:
        return None
    v = noise.correlated(sensor._factor)
    return Measurement(node=node, z=sensor.H @ x + v, tick=tick)


def information_pair(sensor: SensorModel, z: Measurement | np.ndarray | None
                     ) -> tuple[np.ndarray, np.ndarray]:
    """(S, y) = (H^T R^-1 H, H^T R^-1 z); zeros for a silent sensor."""
    n = sensor.n
    if not sensor.observes or z is None:
        return np.zeros((n, n)), np.zeros(n)
    zv = z.z if isinstance(z, Measurement) else np.asarray(z, dtype=float)
    return sensor.S.copy(), sensor.H.T @ (sensor._Rinv @ zv)


def simulate_truth(model: LinearModel, x0: np.ndarray, ticks: int, seed: int,
                   noise: GaussianSource | None = None) -> Trajectory:
    """Ground truth x[0..ticks] with process noise from the seed's process stream."""
    src = noise if noise is not None else GaussianSource.seeded(seed, PROCESS_STREAM)
    states = np.empty((ticks + 1, model.n))
    states[0] = _check_state(model, x0)
    for k in range(1, ticks + 1):
        states[k] = step_truth(model, states[k - 1], src)
    return Trajectory(states=states, seed=seed)


# Constant-velocity target in the plane, state (px, py, vx, vy).
TRACKING_A = np.array([[1.0, 0.0, 1.0, 0.0],
                    [0.0, 1.0, 0.0, 1.0],
                    [0.0, 0.0, 1.0, 0.0],
                    [0.0, 0.0, 0.0, 1.0]])
TRACKING_B = np.eye(4)
TRACKING_Q = np.diag([10.0, 10.0, 1.0, 1.0])
POSITION_H = np.array([[1.0, 0.0, 0.0, 0.0],
                       [0.0, 1.0, 0.0, 0.0]])
TRACKING_R = 100.0 * np.eye(2)


def tracking_model(observers, nodes=range(1, 7)) -> LinearModel:
    """Camera-network tracking model; `observers` see the target position."""
    observers = set(observers)
    sensors = {i: (SensorModel(POSITION_H, TRACKING_R) if i in observers
                   else SensorModel.silent(4)) for i in nodes}
    return LinearModel(TRACKING_A, TRACKING_B, TRACKING_Q, sensors)
