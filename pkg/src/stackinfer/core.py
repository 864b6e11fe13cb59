"""Shared domain types: time grids, model parameter sets, targets, and RNG streams.

Everything here is immutable after construction and safe to share across
threads. All floating-point work is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np


class InvalidArgumentError(ValueError):
    """Raised when an operation receives arguments outside its contract."""


class OutOfDomainError(InvalidArgumentError):
    """Raised when a time argument falls outside [0, T]."""


class SolverFailureError(RuntimeError):
    """Raised when a numerical routine cannot produce a finite result."""


class BlowUpError(SolverFailureError):
    """Backward Riccati integration exceeded the blow-up threshold.

    Attributes
    ----------
    blow_up_time : float
        Grid time at which the solution norm first exceeded the threshold.
    """

    def __init__(self, message: str, blow_up_time: float):
        super().__init__(message)
        self.blow_up_time = blow_up_time


class PolicyEvaluationError(RuntimeError):
    """Raised when a control policy returns a non-finite value."""


class DegeneratePathError(RuntimeError):
    """Raised when a single path's precision integral is below the floor."""


class DegenerateEnsembleError(RuntimeError):
    """Raised when every path in an ensemble is degenerate."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_n = T with spacing h = T/n."""

    horizon: float
    n_steps: int
    nodes: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon <= 0.0:
            raise InvalidArgumentError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise InvalidArgumentError(f"n_steps must be >= 1, got {self.n_steps}")
        nodes = np.linspace(0.0, self.horizon, self.n_steps + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return self.horizon / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1


def build_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Build the uniform time grid shared by every solver and simulator."""
    return TimeGrid(horizon=float(horizon), n_steps=int(n_steps))


@dataclass(frozen=True)
class Sinusoid:
    """Reference trajectory amplitude * sin(omega * t + phase)."""

    amplitude: float
    omega: float
    phase: float = 0.0

    def values(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)


@dataclass(frozen=True)
class Tabulated:
    """Reference trajectory given by node values, linearly interpolated."""

    grid: TimeGrid
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.shape != (self.grid.n_nodes,):
            raise InvalidArgumentError(
                f"table must have {self.grid.n_nodes} values, got shape {table.shape}"
            )
        if not np.all(np.isfinite(table)):
            raise InvalidArgumentError("table values must be finite")
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def values(self, t):
        return np.interp(np.asarray(t, dtype=float), self.grid.nodes, self.table)


TargetTrajectory = Union[Sinusoid, Tabulated]


def eval_target(target: TargetTrajectory, t, horizon: float):
    """Evaluate the reference trajectory at time(s) t in [0, T]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-12) or np.any(t_arr > horizon + 1e-12):
        raise OutOfDomainError(f"t={t} outside [0, {horizon}]")
    out = target.values(t_arr)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


@dataclass(frozen=True)
class FollowerModel:
    """Follower dynamics/cost coefficients, including the hidden dilation factor.

    ``dilation`` (the factor the follower applies to the leader's trajectory
    when tracking) is ground truth: it drives simulation and scores
    estimators, and is never read by the leader-side solvers.
    """

    a_drift: float
    b_control: float
    sigma: float
    x0: float
    q_track: float
    r_control: float
    entropy_weight: float
    dilation: float

    def __post_init__(self):
        # sigma = 0 and q_track = 0 are admitted as degenerate test limits
        # (noiseless follower, source-free value coefficient).
        if self.sigma < 0:
            raise InvalidArgumentError("sigma must be >= 0")
        if self.q_track < 0:
            raise InvalidArgumentError("q_track must be >= 0")
        if self.r_control <= 0 or self.entropy_weight <= 0:
            raise InvalidArgumentError("r_control and entropy_weight must be > 0")

    @property
    def gain_sq_over_r(self) -> float:
        """b_control**2 / r_control, the drift gain applied to the bias term."""
        return self.b_control**2 / self.r_control

    @property
    def noise_to_signal(self) -> float:
        """sigma**2 * r_control**2 / b_control**4, the estimator variance scale."""
        return self.sigma**2 * self.r_control**2 / self.b_control**4


@dataclass(frozen=True)
class LeaderModel:
    """Leader dynamics/cost coefficients and the inference intensity."""

    a_drift: float
    b_control: float
    sigma: float
    x0: float
    q_track: float
    r_control: float
    q_terminal: float
    inference_weight: float
    target: TargetTrajectory

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidArgumentError("sigma must be >= 0")
        if self.q_track <= 0 or self.r_control <= 0 or self.q_terminal <= 0:
            raise InvalidArgumentError("q_track, r_control, q_terminal must be > 0")
        if self.inference_weight < 0:
            raise InvalidArgumentError("inference_weight must be >= 0")

    def target_at(self, t, horizon: float):
        return eval_target(self.target, t, horizon)


@dataclass(frozen=True)
class Trajectory:
    """A real-valued sample path on a grid (one value per node)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise InvalidArgumentError(
                f"expected {self.grid.n_nodes} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("trajectory values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def cumtrapz(values, grid: TimeGrid) -> np.ndarray:
    """Cumulative trapezoidal integral of node values along the grid.

    out[0] = 0 and out[j] approximates the integral of ``values`` over
    [0, t_j]. Exact for piecewise-linear integrands.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != grid.n_nodes:
        raise InvalidArgumentError(
            f"expected {grid.n_nodes} values on last axis, got shape {v.shape}"
        )
    h = grid.h
    inner = np.cumsum((v[..., 1:] + v[..., :-1]) * (0.5 * h), axis=-1)
    zero = np.zeros(v.shape[:-1] + (1,))
    return np.concatenate([zero, inner], axis=-1)


def trapz(values, grid: TimeGrid) -> float:
    """Trapezoidal integral over the whole grid (scalar per path)."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != grid.n_nodes:
        raise InvalidArgumentError(
            f"expected {grid.n_nodes} values on last axis, got shape {v.shape}"
        )
    h = grid.h
    out = np.sum((v[..., 1:] + v[..., :-1]) * (0.5 * h), axis=-1)
    return float(out) if out.ndim == 0 else out


# Stream-key namespaces so leader noise, follower noise and optimizer draws
# never collide for the same master seed.
STREAM_LEADER = 0
STREAM_FOLLOWER = 1
STREAM_OPTIMIZER = 2
STREAM_INIT = 3


@dataclass(frozen=True)
class RngContract:
    """Deterministic per-path random streams derived from one master seed.

    ``stream(*key)`` depends only on (master_seed, key), never on draw order
    or thread count, so path i always sees the same Gaussian increments.
    """

    master_seed: int

    def stream(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=tuple(key))
        return np.random.Generator(np.random.PCG64(ss))

    def normals(self, n: int, *key: int) -> np.ndarray:
        """n i.i.d. standard normal draws for the stream addressed by key."""
        return self.stream(*key).standard_normal(n)

    def normal_matrix(self, n_paths: int, n: int, namespace: int, offset: int = 0) -> np.ndarray:
        """Stack per-path increment rows (path i -> stream (namespace, offset+i))."""
        out = np.empty((n_paths, n))
        for i in range(n_paths):
            out[i] = self.normals(n, namespace, offset + i)
        return out
