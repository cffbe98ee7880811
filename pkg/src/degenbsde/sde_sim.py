"""Forward simulation of the diffusion, its tangent flow, and weight integrals.

One stepping kernel drives everything: it advances a family of paths with
the Euler scheme for ``X``, an exponential (log-Euler) scheme for the
tangent flow ``gradX`` (positive by construction), and left-endpoint
Riemann/Ito accumulators for the occupation integral ``Lambda`` of
``sigma**2`` and the two stochastic sums the weight constructions need:

* ``Lambda_k = sum_{j<k} gamma_j**2 * dt``
* ``S1_k     = sum_{j<k} gamma_j * gradX_j * dW_j``
* ``B_k      = sum_{j<k} Lambda_j * sigma_x_j * gamma_j * gradX_j * dt``

with ``gamma_j = sigma(t_j, X_j)``.  Single-path and batch entry points
consume the same kernel, so a path simulated alone is bit-identical to the
same path inside a batch.

Randomness is counter-based: path ``i`` under seed ``s`` always draws its
increments from the Philox stream keyed ``(s, i)``, independent of batch
layout, chunking, or evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .model import CoefficientModel, ProblemPoint

__all__ = [
    "TimeGrid",
    "PathBundle",
    "BatchPaths",
    "PathState",
    "SimulationError",
    "brownian_increments",
    "simulate_path",
    "simulate_path_with_increments",
    "simulate_batch",
    "path_stream",
]

_MAX_INVALID_FRACTION = 0.01


class SimulationError(RuntimeError):
    """Raised when too many paths produce non-finite values."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 = s_0 < ... < s_n = T`` with ``n = n_steps``."""

    t0: float
    T: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.T > self.t0):
            raise ValueError(f"need T > t0, got t0={self.t0}, T={self.T}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    def times(self) -> np.ndarray:
        """Grid times; the endpoints are exact."""
        return np.linspace(self.t0, self.T, self.n_steps + 1)


class PathState(NamedTuple):
    """State of a path family at grid index ``k`` (time ``t``).

    ``dW`` is the Brownian increment toward index ``k + 1`` (``None`` at
    the terminal node).  Accumulators are the left-endpoint sums over
    ``j < k``, so at ``k = 0`` they are zero.
    """

    k: int
    t: float
    X: np.ndarray
    gradX: np.ndarray
    gamma: np.ndarray
    Lambda: np.ndarray
    S1: np.ndarray
    B: np.ndarray
    dW: Optional[np.ndarray]


@dataclass(frozen=True)
class PathBundle:
    """One simulated path with everything the weight layer consumes.

    Arrays are indexed by grid node (``dW`` by step, length ``n_steps``).
    ``valid`` is False when any stored value is non-finite.
    """

    grid: TimeGrid
    dW: np.ndarray
    X: np.ndarray
    gradX: np.ndarray
    gamma: np.ndarray
    Lambda: np.ndarray
    S1: np.ndarray
    B: np.ndarray
    valid: bool


@dataclass(frozen=True)
class BatchPaths:
    """A batch of paths backed by contiguous (n_paths, n_nodes) arrays.

    Behaves as a sequence of ``PathBundle`` views; no per-path copies are
    made.
    """

    grid: TimeGrid
    dW: np.ndarray
    X: np.ndarray
    gradX: np.ndarray
    gamma: np.ndarray
    Lambda: np.ndarray
    S1: np.ndarray
    B: np.ndarray
    valid: np.ndarray

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i: int) -> PathBundle:
        return PathBundle(
            grid=self.grid, dW=self.dW[i], X=self.X[i], gradX=self.gradX[i],
            gamma=self.gamma[i], Lambda=self.Lambda[i], S1=self.S1[i],
            B=self.B[i], valid=bool(self.valid[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def n_invalid(self) -> int:
        return int(np.count_nonzero(~self.valid))


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not (0 <= seed < 2 ** 64):
        raise ValueError(f"seed must be a 64-bit nonnegative integer, got {seed}")
    return seed


def _increment_matrix(seed: int, path_indices: np.ndarray, n_steps: int,
                      dt: float) -> np.ndarray:
    """Gaussian increments, one Philox stream per (seed, path_index)."""
    seed = _check_seed(seed)
    out = np.empty((path_indices.size, n_steps), dtype=float)
    for row, i in enumerate(path_indices):
        i = int(i)
        if i < 0:
            raise ValueError(f"path_index must be nonnegative, got {i}")
        gen = np.random.Generator(np.random.Philox(key=[seed, i]))
        out[row] = gen.standard_normal(n_steps)
    out *= math.sqrt(dt)
    return out


def brownian_increments(seed: int, path_index: int, n_steps: int,
                        dt: float) -> np.ndarray:
    """Increments of path ``path_index`` under ``seed``: N(0, dt), iid.

    Deterministic in ``(seed, path_index)``; distinct indices give
    independent streams.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    idx = np.asarray([path_index], dtype=np.int64)
    return _increment_matrix(seed, idx, n_steps, dt)[0]


# ---------------------------------------------------------------------------
# stepping kernel
# ---------------------------------------------------------------------------


def _check_compatible(model: CoefficientModel, point: ProblemPoint,
                      grid: TimeGrid) -> None:
    if grid.t0 != point.t0:
        raise ValueError(
            f"grid starts at {grid.t0} but the problem point is at t0={point.t0}"
        )
    if grid.T != model.horizon_T:
        raise ValueError(
            f"grid ends at {grid.T} but the model horizon is {model.horizon_T}"
        )
    if point.t0 >= model.horizon_T:
        raise ValueError(
            f"t0={point.t0} must lie strictly before the horizon {model.horizon_T}"
        )


def _stream_from_increments(model: CoefficientModel, point: ProblemPoint,
                            grid: TimeGrid, dW: np.ndarray) -> Iterator[PathState]:
    """Advance a path family driven by the given increment matrix."""
    n = grid.n_steps
    dt = grid.dt
    times = grid.times()
    shape = (dW.shape[0],)

    X = np.full(shape, point.x0, dtype=float)
    gradX = np.ones(shape, dtype=float)
    Lambda = np.zeros(shape, dtype=float)
    S1 = np.zeros(shape, dtype=float)
    B = np.zeros(shape, dtype=float)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(n):
            t = float(times[k])
            dWk = dW[:, k]
            gamma = np.broadcast_to(
                np.asarray(model.sigma(t, X), dtype=float), shape)
            yield PathState(k, t, X, gradX, gamma, Lambda, S1, B, dWk)

            sx = np.asarray(model.sigma_x(t, X), dtype=float)
            bx = np.asarray(model.b_x(t, X), dtype=float)
            bv = np.asarray(model.b(t, X), dtype=float)

            new_gradX = gradX * np.exp((bx - 0.5 * sx * sx) * dt + sx * dWk)
            S1 = S1 + gamma * gradX * dWk
            B = B + Lambda * sx * gamma * gradX * dt
            Lambda = Lambda + gamma * gamma * dt
            X = X + bv * dt + gamma * dWk
            gradX = new_gradX

        t = float(times[n])
        gamma = np.broadcast_to(np.asarray(model.sigma(t, X), dtype=float), shape)
        yield PathState(n, t, X, gradX, gamma, Lambda, S1, B, None)


def path_stream(model: CoefficientModel, point: ProblemPoint, grid: TimeGrid,
                seed: int, path_indices: Sequence[int]) -> Iterator[PathState]:
    """Yield the per-node state of the paths with the given indices.

    This is the streaming interface the estimators consume; it holds no
    per-node history, only the running state, so memory stays flat in
    ``n_steps``.
    """
    _check_compatible(model, point, grid)
    idx = np.asarray(path_indices, dtype=np.int64)
    dW = _increment_matrix(seed, idx, grid.n_steps, grid.dt)
    yield from _stream_from_increments(model, point, grid, dW)


# ---------------------------------------------------------------------------
# materialized simulations
# ---------------------------------------------------------------------------


def _materialize(model: CoefficientModel, point: ProblemPoint, grid: TimeGrid,
                 dW: np.ndarray) -> BatchPaths:
    n_paths = dW.shape[0]
    n_nodes = grid.n_steps + 1
    X = np.empty((n_paths, n_nodes), dtype=float)
    gradX = np.empty_like(X)
    gamma = np.empty_like(X)
    Lambda = np.empty_like(X)
    S1 = np.empty_like(X)
    B = np.empty_like(X)

    for st in _stream_from_increments(model, point, grid, dW):
        X[:, st.k] = st.X
        gradX[:, st.k] = st.gradX
        gamma[:, st.k] = st.gamma
        Lambda[:, st.k] = st.Lambda
        S1[:, st.k] = st.S1
        B[:, st.k] = st.B

    valid = np.ones(n_paths, dtype=bool)
    for arr in (X, gradX, gamma, Lambda, S1, B):
        valid &= np.isfinite(arr).all(axis=1)
    return BatchPaths(grid=grid, dW=dW, X=X, gradX=gradX, gamma=gamma,
                      Lambda=Lambda, S1=S1, B=B, valid=valid)


def simulate_path(model: CoefficientModel, point: ProblemPoint, grid: TimeGrid,
                  seed: int, path_index: int = 0) -> PathBundle:
    """Simulate a single path (bit-identical to the same index in a batch)."""
    _check_compatible(model, point, grid)
    idx = np.asarray([path_index], dtype=np.int64)
    dW = _increment_matrix(seed, idx, grid.n_steps, grid.dt)
    return _materialize(model, point, grid, dW)[0]


def simulate_path_with_increments(model: CoefficientModel, point: ProblemPoint,
                                  grid: TimeGrid, dW: np.ndarray) -> PathBundle:
    """Simulate one path driven by caller-supplied increments.

    Used for coupling experiments (e.g. strong-error measurement against
    a reference driven by the same noise aggregated to a coarser grid).
    """
    _check_compatible(model, point, grid)
    dW = np.asarray(dW, dtype=float)
    if dW.ndim != 1 or dW.size != grid.n_steps:
        raise ValueError(
            f"expected {grid.n_steps} increments, got shape {dW.shape}"
        )
    return _materialize(model, point, grid, dW[None, :])[0]


def simulate_batch(model: CoefficientModel, point: ProblemPoint, grid: TimeGrid,
                   seed: int, n_paths: int) -> BatchPaths:
    """Simulate paths with indices ``0 .. n_paths - 1`` under ``seed``.

    Raises ``SimulationError`` when more than 1% of paths contain
    non-finite values; otherwise invalid paths are flagged in ``valid``.
    Memory scales with ``n_paths * n_steps``; use ``path_stream`` for
    estimation at large path counts.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    _check_compatible(model, point, grid)
    idx = np.arange(n_paths, dtype=np.int64)
    dW = _increment_matrix(seed, idx, grid.n_steps, grid.dt)
    batch = _materialize(model, point, grid, dW)
    if batch.n_invalid > _MAX_INVALID_FRACTION * n_paths:
        raise SimulationError(
            f"{batch.n_invalid} of {n_paths} paths are non-finite"
        )
    return batch
