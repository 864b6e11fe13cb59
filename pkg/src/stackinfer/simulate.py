"""Forward simulation of both agents and evaluation of every cost functional.

Leader paths carry two auxiliary integrals alongside the state: the
weighted running integral of the state and its decayed second integral.
Both are advanced by the trapezoid rule inside the Euler loop so that
path-dependent policies can read them online, and so that the precision
integral of the score function satisfies its quadratic expansion in the
auxiliary states exactly at the discrete level.

Batch variants are vectorized across paths; each path's increments come
from its own counter-derived stream, so results are independent of batch
partitioning and thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateEnsembleError,
    FollowerModel,
    InvalidArgumentError,
    LeaderModel,
    PolicyEvaluationError,
    RngContract,
    STREAM_FOLLOWER,
    STREAM_LEADER,
    TimeGrid,
    Trajectory,
    cumtrapz,
    trapz,
)
from .riccati import DerivedCoefficients, FollowerRiccati

PRECISION_FLOOR = 1e-14


@dataclass(frozen=True)
class AugmentedLeaderPath:
    """One leader path with auxiliary integrals, controls and driving noise."""

    grid: TimeGrid
    x: np.ndarray
    aux: np.ndarray  # weighted running integral of the state (one per node)
    aux2: np.ndarray  # decayed second integral (one per node)
    controls: np.ndarray  # one per node; the terminal value never enters the dynamics
    brownian: np.ndarray  # Brownian increments, one per step
    stream_key: tuple

    def trajectory(self) -> Trajectory:
        return Trajectory(grid=self.grid, values=self.x)


@dataclass(frozen=True)
class FollowerPath:
    """One follower path under the optimal response, with driving noise."""

    grid: TimeGrid
    x: np.ndarray
    brownian: np.ndarray
    stream_key: tuple
    mode: str


@dataclass(frozen=True)
class GProfile:
    """Score-function profile g along one leader path and its precision.

    ``precision`` is the integral of g^2 over [0, T]; it scales the Fisher
    information and inversely scales the estimator's conditional variance.
    """

    grid: TimeGrid
    g: np.ndarray
    precision: float


@dataclass(frozen=True)
class LeaderEnsemble:
    """Batch of leader paths (rows are paths, columns grid nodes)."""

    grid: TimeGrid
    x: np.ndarray
    aux: np.ndarray
    aux2: np.ndarray
    controls: np.ndarray
    shocks: np.ndarray  # standard-normal draws, (n_paths, n_steps)


@dataclass(frozen=True)
class ObjectiveEstimate:
    """Monte Carlo estimates of the leader's objectives over an ensemble."""

    j_primary: float
    j_var: float
    j_info: float
    mean_fisher: float
    mean_precision: float
    n_paths: int
    n_degenerate: int
    se_primary: float
    se_info: float
    se_var: float


def _check_grid(grid: TimeGrid, other: TimeGrid, what: str):
    if other != grid:
        raise InvalidArgumentError(f"{what} lives on a different grid")


def simulate_leader_batch(
    leader: LeaderModel,
    coeffs: DerivedCoefficients,
    policy,
    grid: TimeGrid,
    shocks: np.ndarray,
) -> LeaderEnsemble:
    """Euler-Maruyama batch of leader paths under ``policy``.

    ``shocks`` holds standard-normal draws, one row per path. The policy's
    session is stepped once per node in order; sessions may be stateful
    (recurrent policies), so rows of a batch advance together.
    """
    _check_grid(grid, coeffs.grid, "coefficients")
    shocks = np.asarray(shocks, dtype=float)
    if shocks.ndim != 2 or shocks.shape[1] != grid.n_steps:
        raise InvalidArgumentError(
            f"shocks must be (n_paths, {grid.n_steps}), got {shocks.shape}"
        )
    n_paths = shocks.shape[0]
    n = grid.n_steps
    h = grid.h
    sqrt_h = math.sqrt(h)
    a_l, b_l, sig = leader.a_drift, leader.b_control, leader.sigma
    w, d = coeffs.weight, coeffs.decay

    x = np.empty((n_paths, n + 1))
    aux = np.empty((n_paths, n + 1))
    aux2 = np.empty((n_paths, n + 1))
    controls = np.empty((n_paths, n + 1))
    x[:, 0] = leader.x0
    aux[:, 0] = 0.0
    aux2[:, 0] = 0.0

    session = policy.session(n_paths)
    for j in range(n):
        u = np.asarray(session.controls(j, x[:, : j + 1], aux[:, j], aux2[:, j]), dtype=float)
        if not np.all(np.isfinite(u)):
            raise PolicyEvaluationError(f"policy returned a non-finite control at node {j}")
        controls[:, j] = u
        x[:, j + 1] = x[:, j] + (a_l * x[:, j] + b_l * u) * h + sig * sqrt_h * shocks[:, j]
        aux[:, j + 1] = aux[:, j] - 0.5 * h * (w[j] * x[:, j] + w[j + 1] * x[:, j + 1])
        aux2[:, j + 1] = aux2[:, j] + 0.5 * h * (d[j] * aux[:, j] + d[j + 1] * aux[:, j + 1])
    u = np.asarray(session.controls(n, x, aux[:, n], aux2[:, n]), dtype=float)
    if not np.all(np.isfinite(u)):
        raise PolicyEvaluationError(f"policy returned a non-finite control at node {n}")
    controls[:, n] = u

    return LeaderEnsemble(grid=grid, x=x, aux=aux, aux2=aux2, controls=controls, shocks=shocks)


def simulate_leader(
    leader: LeaderModel,
    coeffs: DerivedCoefficients,
    policy,
    grid: TimeGrid,
    rng: RngContract,
    path_index: int = 0,
) -> AugmentedLeaderPath:
    """Simulate one leader path from its contract-derived stream."""
    shocks = rng.normals(grid.n_steps, STREAM_LEADER, path_index)[None, :]
    ens = simulate_leader_batch(leader, coeffs, policy, grid, shocks)
    return AugmentedLeaderPath(
        grid=grid,
        x=ens.x[0],
        aux=ens.aux[0],
        aux2=ens.aux2[0],
        controls=ens.controls[0],
        brownian=math.sqrt(grid.h) * shocks[0],
        stream_key=(rng.master_seed, STREAM_LEADER, path_index),
    )


def _exact_transition_tables(
    model: FollowerModel, fr: FollowerRiccati, b: np.ndarray, grid: TimeGrid, sub_nodes: int
):
    """Per-step transition factor, drift integral, and noise variance.

    The optimally controlled follower is a linear SDE, so over one step
    x(t+h) = x(t) * exp(int f) - (b^2/r) * int exp(int_u f) b_u du + Gaussian
    noise whose variance is sigma^2 * int exp(2 int_u f) du. The step
    integrals are evaluated by trapezoid on ``sub_nodes`` sub-intervals with
    f and b interpolated linearly.
    """
    h_sub = grid.h / sub_nodes
    # Sub-grid inside each step by fractional position; rows are steps.
    frac = np.linspace(0.0, 1.0, sub_nodes + 1)[None, :]
    f, gain = fr.f, model.gain_sq_over_r
    f_sub = f[:-1, None] + (f[1:] - f[:-1])[:, None] * frac
    b_sub = b[:-1, None] + (b[1:] - b[:-1])[:, None] * frac
    # phi[j, l] = integral of f from sub-node l to the right edge of step j.
    seg = 0.5 * h_sub * (f_sub[:, :-1] + f_sub[:, 1:])
    phi = np.concatenate(
        [np.cumsum(seg[:, ::-1], axis=1)[:, ::-1], np.zeros((seg.shape[0], 1))], axis=1
    )
    e_phi = np.exp(phi)
    e_step = e_phi[:, 0]
    drift_step = gain * np.trapezoid(e_phi * b_sub, dx=h_sub, axis=1)
    var_step = np.trapezoid(e_phi * e_phi, dx=h_sub, axis=1)
    return e_step, drift_step, var_step


def simulate_follower_batch(
    model: FollowerModel,
    fr: FollowerRiccati,
    b: np.ndarray,
    grid: TimeGrid,
    shocks: np.ndarray,
    mode: str = "euler",
    sub_nodes: int = 16,
) -> np.ndarray:
    """Batch of follower paths under the optimal response (rows are paths).

    ``euler`` steps the drift f*x - (b_F^2/r_F)*b explicitly; ``exact``
    samples the Gaussian one-step transition of the linear SDE, with step
    integrals from sub-quadrature.
    """
    _check_grid(grid, fr.grid, "follower Riccati")
    b = np.asarray(b, dtype=float)
    if b.shape != (grid.n_nodes,):
        raise InvalidArgumentError(f"b must have {grid.n_nodes} values, got {b.shape}")
    shocks = np.asarray(shocks, dtype=float)
    if shocks.ndim != 2 or shocks.shape[1] != grid.n_steps:
        raise InvalidArgumentError(
            f"shocks must be (n_paths, {grid.n_steps}), got {shocks.shape}"
        )
    if mode not in ("euler", "exact"):
        raise InvalidArgumentError(f"unknown simulation mode {mode!r}")

    n_paths, n = shocks.shape
    h = grid.h
    x = np.empty((n_paths, n + 1))
    x[:, 0] = model.x0
    sig = model.sigma
    if mode == "euler":
        sqrt_h = math.sqrt(h)
        f, gain = fr.f, model.gain_sq_over_r
        for j in range(n):
            drift = f[j] * x[:, j] - gain * b[j]
            x[:, j + 1] = x[:, j] + drift * h + sig * sqrt_h * shocks[:, j]
    else:
        e_step, drift_step, var_step = _exact_transition_tables(model, fr, b, grid, sub_nodes)
        noise_scale = sig * np.sqrt(var_step)
        for j in range(n):
            x[:, j + 1] = x[:, j] * e_step[j] - drift_step[j] + noise_scale[j] * shocks[:, j]
    return x


def simulate_follower(
    model: FollowerModel,
    fr: FollowerRiccati,
    b: np.ndarray,
    grid: TimeGrid,
    rng: RngContract,
    path_index: int = 0,
    mode: str = "euler",
    sub_nodes: int = 16,
) -> FollowerPath:
    """Simulate one follower path from its contract-derived stream."""
    shocks = rng.normals(grid.n_steps, STREAM_FOLLOWER, path_index)[None, :]
    x = simulate_follower_batch(model, fr, b, grid, shocks, mode=mode, sub_nodes=sub_nodes)
    return FollowerPath(
        grid=grid,
        x=x[0],
        brownian=math.sqrt(grid.h) * shocks[0],
        stream_key=(rng.master_seed, STREAM_FOLLOWER, path_index),
        mode=mode,
    )


def compute_g_batch(
    fr: FollowerRiccati, model: FollowerModel, x_leader: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Score profile g and precision integral for each leader path row.

    g(t) = -q_track * exp(-cum_f(t)) * int_t^T exp(cum_f(s)) x_L(s) ds, with
    the tail integral realized through the cumulative forward integral so
    the same trapezoid weights underlie g, the auxiliary path integrals and
    the precision, keeping their algebraic identities exact on the grid.
    """
    grid = fr.grid
    x = np.atleast_2d(np.asarray(x_leader, dtype=float))
    if x.shape[1] != grid.n_nodes:
        raise InvalidArgumentError(f"x_leader must have {grid.n_nodes} columns")
    growth = np.exp(fr.cum_f)
    cw = cumtrapz(growth[None, :] * x, grid)
    g = -model.q_track * np.exp(-fr.cum_f)[None, :] * (cw[:, -1:] - cw)
    precision = trapz(g * g, grid)
    return g, np.atleast_1d(precision)


def compute_g(fr: FollowerRiccati, model: FollowerModel, x_leader: Trajectory) -> GProfile:
    """Score profile for a single leader trajectory."""
    _check_grid(fr.grid, x_leader.grid, "leader trajectory")
    g, precision = compute_g_batch(fr, model, x_leader.values[None, :])
    return GProfile(grid=fr.grid, g=g[0], precision=float(precision[0]))


def primary_cost_batch(leader: LeaderModel, grid: TimeGrid, x: np.ndarray, controls: np.ndarray):
    """Realized tracking-plus-effort cost per path row."""
    target = leader.target_at(grid.nodes, grid.horizon)
    run = 0.5 * leader.q_track * (x - target[None, :]) ** 2
    run += 0.5 * leader.r_control * controls**2
    cost = trapz(run, grid)
    cost = cost + 0.5 * leader.q_terminal * (x[:, -1] - target[-1]) ** 2
    return np.atleast_1d(cost)


def evaluate_primary_cost(leader: LeaderModel, path: AugmentedLeaderPath) -> float:
    """Realized tracking-plus-effort cost of one leader path."""
    return float(primary_cost_batch(leader, path.grid, path.x[None, :], path.controls[None, :])[0])


def evaluate_follower_cost(
    model: FollowerModel,
    fpath: FollowerPath,
    x_leader: Trajectory,
    fr: FollowerRiccati,
    b: np.ndarray,
) -> float:
    """Realized follower cost along one path under its optimal policy.

    The control second moment and the entropy term use the closed Gaussian
    forms of the optimal policy (mean -(b_F/r_F)(2 a x + b), variance
    entropy_weight/r_F), so only the state path is random.
    """
    grid = fpath.grid
    _check_grid(grid, x_leader.grid, "leader trajectory")
    x = fpath.x
    lam, r = model.entropy_weight, model.r_control
    mean = -(model.b_control / r) * (2.0 * fr.a * x + b)
    track = 0.5 * model.q_track * (x - model.dilation * x_leader.values) ** 2
    effort = 0.5 * r * (mean**2 + lam / r)
    neg_entropy = -0.5 * math.log(2.0 * math.pi * math.e * lam / r)
    integrand = track + effort + lam * neg_entropy
    return float(trapz(integrand, grid))


def precision_from_aux(
    coeffs: DerivedCoefficients, aux: np.ndarray, aux2: np.ndarray
) -> np.ndarray:
    """Precision integral from the auxiliary states (quadratic expansion).

    int g^2 = aux_T^2 * int decay - 2 aux_T aux2_T + int decay * aux^2,
    exact on the grid because every integral shares the trapezoid weights.
    """
    grid = coeffs.grid
    aux = np.atleast_2d(aux)
    aux2 = np.atleast_2d(aux2)
    tail = trapz(coeffs.decay[None, :] * aux * aux, grid)
    return aux[:, -1] ** 2 * coeffs.decay_l1 - 2.0 * aux[:, -1] * aux2[:, -1] + tail


def estimate_objectives(
    leader: LeaderModel,
    follower: FollowerModel,
    coeffs: DerivedCoefficients,
    fr: FollowerRiccati,
    policy,
    grid: TimeGrid,
    n_paths: int,
    rng: RngContract,
    path_offset: int = 0,
    precision_floor: float = PRECISION_FLOOR,
) -> ObjectiveEstimate:
    """Monte Carlo estimates of the primary, variance and information objectives.

    Paths whose precision integral falls below ``precision_floor`` are
    excluded from the reciprocal (variance) average and counted in
    ``n_degenerate``; the information objective keeps every path.
    """
    if n_paths < 1:
        raise InvalidArgumentError("n_paths must be >= 1")
    shocks = rng.normal_matrix(n_paths, grid.n_steps, STREAM_LEADER, path_offset)
    ens = simulate_leader_batch(leader, coeffs, policy, grid, shocks)
    _, precision = compute_g_batch(fr, follower, ens.x)
    j_p = primary_cost_batch(leader, grid, ens.x, ens.controls)

    lam = leader.inference_weight
    if follower.sigma == 0.0:
        if lam > 0.0:
            raise InvalidArgumentError(
                "information objectives are undefined for a noiseless follower"
            )
        info_scale = 0.0
        mean_fisher = math.inf
    else:
        info_scale = lam / follower.noise_to_signal
        mean_fisher = float(np.mean(precision)) / follower.noise_to_signal

    good = precision > precision_floor
    n_degenerate = int(np.sum(~good))
    if n_degenerate == n_paths:
        raise DegenerateEnsembleError(
            f"all {n_paths} paths have precision below {precision_floor}"
        )

    j_info_paths = -info_scale * precision + j_p
    var_scale = lam * follower.noise_to_signal
    j_var_paths = var_scale / precision[good] + j_p[good]

    def mean_se(v):
        m = float(np.mean(v))
        se = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        return m, se

    jp_mean, jp_se = mean_se(j_p)
    ji_mean, ji_se = mean_se(j_info_paths)
    jv_mean, jv_se = mean_se(j_var_paths)
    return ObjectiveEstimate(
        j_primary=jp_mean,
        j_var=jv_mean,
        j_info=ji_mean,
        mean_fisher=mean_fisher,
        mean_precision=float(np.mean(precision)),
        n_paths=n_paths,
        n_degenerate=n_degenerate,
        se_primary=jp_se,
        se_info=ji_se,
        se_var=jv_se,
    )
