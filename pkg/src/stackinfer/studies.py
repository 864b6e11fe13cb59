"""The experiment studies behind the command line.

Each study builds its models from a validated configuration, runs the
corresponding numerical experiment, and returns a ``StudyResult`` holding a
scalar summary plus CSV tables. Path-level work is distributed over a thread
pool in contiguous path-index chunks; since every path draws from its own
index-keyed stream and results land in preallocated slots, output is
identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .core import (
    BlowUpError,
    RngContract,
    STREAM_FOLLOWER,
    STREAM_LEADER,
    TimeGrid,
    Trajectory,
    build_grid,
    trapz,
)
from .infer import (
    DiscreteObservations,
    MultiPeriodState,
    mle_continuous,
    mle_continuous_batch,
    mle_discrete_joint,
    multi_period_update,
    realized_variance_proxy,
    stopping_rule,
)
from .policy import (
    OptimizerConfig,
    RecurrentConfig,
    RecurrentPolicy,
    RiccatiPolicy,
    optimize_policy,
)
from .riccati import (
    compute_coefficients,
    horizon_bound,
    solve_follower_a,
    solve_follower_bc,
    solve_leader_system,
)
from .simulate import (
    FollowerPath,
    compute_g,
    compute_g_batch,
    primary_cost_batch,
    simulate_follower_batch,
    simulate_leader_batch,
)


@dataclass(frozen=True)
class StudyResult:
    """Summary scalars plus named CSV tables for one study run."""

    name: str
    summary: dict
    tables: dict  # table name -> (header list, row list)
    provenance: dict


def _provenance(cfg: ExperimentConfig) -> dict:
    return {
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "bit_exact": cfg.bit_exact,
        "version": __version__,
    }


def _chunks(n: int, threads: int):
    size = max(1, math.ceil(n / max(1, threads)))
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _run_chunked(n_paths: int, threads: int, work):
    """Run work(lo, hi) over contiguous path ranges, possibly in parallel."""
    spans = _chunks(n_paths, threads)
    if threads <= 1 or len(spans) == 1:
        for lo, hi in spans:
            work(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(work, lo, hi) for lo, hi in spans]
        for fut in futures:
            fut.result()


def _leader_stats(leader, follower, coeffs, fr, policy, grid, n_paths, rng, threads,
                  keep_paths: int = 0):
    """Per-path precision, primary cost and control effort for an ensemble."""
    precision = np.empty(n_paths)
    j_primary = np.empty(n_paths)
    effort = np.empty(n_paths)
    kept = {}

    def work(lo, hi):
        shocks = rng.normal_matrix(hi - lo, grid.n_steps, STREAM_LEADER, lo)
        ens = simulate_leader_batch(leader, coeffs, policy, grid, shocks)
        _, prec = compute_g_batch(fr, follower, ens.x)
        precision[lo:hi] = prec
        j_primary[lo:hi] = primary_cost_batch(leader, grid, ens.x, ens.controls)
        effort[lo:hi] = trapz(ens.controls**2, grid)
        for i in range(lo, min(hi, keep_paths)):
            kept[i] = (ens.x[i - lo].copy(), ens.controls[i - lo].copy())

    _run_chunked(n_paths, threads, work)
    return precision, j_primary, effort, kept


def _follower_mhats(follower, fr, gp, b, grid, n_replays, rng, threads, chunk_cap=5000):
    """Dilation estimates over follower replays on one fixed leader path."""
    m_hats = np.empty(n_replays)

    def work(lo, hi):
        for start in range(lo, hi, chunk_cap):
            stop = min(start + chunk_cap, hi)
            shocks = rng.normal_matrix(stop - start, grid.n_steps, STREAM_FOLLOWER, start)
            xs = simulate_follower_batch(follower, fr, b, grid, shocks)
            m_hats[start:stop] = mle_continuous_batch(xs, gp, fr, follower)

    _run_chunked(n_replays, threads, work)
    return m_hats


def _fixed_leader_path(follower, lm, coeffs, fr, grid, rng, path_index=0):
    lr = solve_leader_system(lm, follower, coeffs)
    policy = RiccatiPolicy(lm, lr)
    shocks = rng.normal_matrix(1, grid.n_steps, STREAM_LEADER, path_index)
    ens = simulate_leader_batch(lm, coeffs, policy, grid, shocks)
    return Trajectory(grid=grid, values=ens.x[0]), lr


def run_tradeoff_sweep(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Sweep the tracking-to-inference weight ratio; report mean Fisher information.

    The ratio is q_track / inference_weight: the inference weight stays at
    its configured value and q_track is set to ratio * inference_weight.
    """
    lam = cfg.leader["inference_weight"]
    if lam <= 0:
        raise ConfigError("config.leader.inference_weight: tradeoff-sweep needs > 0")
    grid = cfg.build_grid()
    follower = cfg.build_follower()
    fr = solve_follower_a(follower, grid)
    coeffs = compute_coefficients(fr, follower)
    rng = RngContract(cfg.master_seed)
    n_paths = cfg.study.get("n_paths", 10_000)

    rows = []
    traj_rows = []
    for ratio in cfg.study["ratios"]:
        lm = cfg.build_leader(grid, q_track=ratio * lam)
        lr = solve_leader_system(lm, follower, coeffs)
        policy = RiccatiPolicy(lm, lr)
        precision, j_p, _, kept = _leader_stats(
            lm, follower, coeffs, fr, policy, grid, n_paths, rng, threads, keep_paths=1
        )
        mean_fisher = float(np.mean(precision)) / follower.noise_to_signal
        rows.append(
            [ratio, lam, ratio * lam, mean_fisher, float(np.mean(j_p)), n_paths, cfg.master_seed]
        )
        x_path, controls = kept[0]
        b, _ = solve_follower_bc(fr, follower, Trajectory(grid=grid, values=x_path))
        fshocks = rng.normal_matrix(1, grid.n_steps, STREAM_FOLLOWER, 0)
        xf = simulate_follower_batch(follower, fr, b, grid, fshocks)[0]
        target = lm.target_at(grid.nodes, grid.horizon)
        for j in range(grid.n_nodes):
            traj_rows.append(
                [ratio, j, grid.nodes[j], x_path[j], controls[j], xf[j], target[j]]
            )

    fishers = [r[3] for r in rows]
    summary = {
        "ratios": list(cfg.study["ratios"]),
        "mean_fisher": fishers,
        "strictly_decreasing": bool(all(a > b for a, b in zip(fishers, fishers[1:]))),
        "n_paths": n_paths,
    }
    return StudyResult(
        name="tradeoff-sweep",
        summary=summary,
        tables={
            "sweep": (
                ["ratio", "inference_weight", "q_track", "mean_fisher",
                 "mean_primary_cost", "n_paths", "seed"],
                rows,
            ),
            "trajectories": (
                ["ratio", "node", "time", "x_leader", "control", "x_follower", "target"],
                traj_rows,
            ),
        },
        provenance=_provenance(cfg),
    )


def run_estimator_study(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Conditional bias and variance of the dilation estimate per inference weight.

    One leader path per weight (common leader noise across weights), then
    follower replays with common noise indices.
    """
    grid = cfg.build_grid()
    follower = cfg.build_follower()
    fr = solve_follower_a(follower, grid)
    coeffs = compute_coefficients(fr, follower)
    rng = RngContract(cfg.master_seed)
    n_replays = cfg.study.get("n_replays", 10_000)
    path_index = cfg.study.get("path_seed_index", 0)

    rows = []
    curve_rows = []
    checkpoints = np.unique(
        np.round(np.logspace(1, math.log10(n_replays), 20)).astype(int)
    )
    for lam in cfg.study["inference_weights"]:
        lm = cfg.build_leader(grid, inference_weight=lam)
        x_leader, _ = _fixed_leader_path(follower, lm, coeffs, fr, grid, rng, path_index)
        gp = compute_g(fr, follower, x_leader)
        b, _ = solve_follower_bc(fr, follower, x_leader)
        m_hats = _follower_mhats(follower, fr, gp, b, grid, n_replays, rng, threads)
        bias = float(np.mean(m_hats)) - follower.dilation
        se = float(np.std(m_hats, ddof=1) / math.sqrt(n_replays))
        sample_var = float(np.var(m_hats, ddof=1))
        formula_var = follower.noise_to_signal / gp.precision
        rows.append(
            [lam, gp.precision, bias, se, sample_var, formula_var, n_replays, cfg.master_seed]
        )
        running = np.cumsum(m_hats) / np.arange(1, n_replays + 1)
        for n_used in checkpoints:
            curve_rows.append([lam, int(n_used), running[n_used - 1] - follower.dilation])

    summary = {
        "inference_weights": list(cfg.study["inference_weights"]),
        "conditional_variance": [r[5] for r in rows],
        "n_replays": n_replays,
    }
    return StudyResult(
        name="estimator-study",
        summary=summary,
        tables={
            "estimator": (
                ["inference_weight", "precision", "cond_bias", "bias_se",
                 "sample_cond_var", "formula_cond_var", "n_replays", "seed"],
                rows,
            ),
            "bias_curve": (["inference_weight", "n_replays_used", "running_bias"], curve_rows),
        },
        provenance=_provenance(cfg),
    )


def run_episodes(
    leader_model,
    follower_model,
    fr,
    coeffs,
    grid: TimeGrid,
    n_episodes: int,
    rng: RngContract,
    follower_mode: str = "euler",
) -> list[tuple[MultiPeriodState, float, float]]:
    """Consecutive episodes with chained initial states and fresh noise.

    Both agents keep their within-episode strategies; episode i draws leader
    and follower noise from the index-i streams, so different intensities
    compared at the same master seed share every Brownian increment. Returns
    the aggregate state plus the terminal states after each episode.
    """
    lr = solve_leader_system(leader_model, follower_model, coeffs)
    lm, fm = leader_model, follower_model
    state = MultiPeriodState.empty()
    out = []
    for ep in range(n_episodes):
        policy = RiccatiPolicy(lm, lr)
        shocks = rng.normal_matrix(1, grid.n_steps, STREAM_LEADER, ep)
        ens = simulate_leader_batch(lm, coeffs, policy, grid, shocks)
        x_leader = Trajectory(grid=grid, values=ens.x[0])
        gp = compute_g(fr, follower_model, x_leader)
        b, _ = solve_follower_bc(fr, fm, x_leader)
        fshocks = rng.normal_matrix(1, grid.n_steps, STREAM_FOLLOWER, ep)
        xf = simulate_follower_batch(fm, fr, b, grid, fshocks, mode=follower_mode)[0]
        fpath = FollowerPath(
            grid=grid,
            x=xf,
            brownian=math.sqrt(grid.h) * fshocks[0],
            stream_key=(rng.master_seed, STREAM_FOLLOWER, ep),
            mode=follower_mode,
        )
        report = mle_continuous(fpath, gp, fr, fm)
        state = multi_period_update(state, report)
        lm = replace(lm, x0=float(ens.x[0, -1]))
        fm = replace(fm, x0=float(xf[-1]))
        out.append((state, float(ens.x[0, -1]), float(xf[-1])))
    return out


def run_multi_period(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Aggregate estimation error and variance proxy over consecutive episodes."""
    grid = cfg.build_grid()
    follower = cfg.build_follower()
    fr = solve_follower_a(follower, grid)
    coeffs = compute_coefficients(fr, follower)
    n_episodes = cfg.study["n_episodes"]
    threshold = cfg.study.get("variance_threshold")

    rows = []
    final_errors = {}
    stop_at = {}
    for lam in cfg.study["inference_weights"]:
        lm = cfg.build_leader(grid, inference_weight=lam)
        rng = RngContract(cfg.master_seed)
        history = run_episodes(lm, follower, fr, coeffs, grid, n_episodes, rng)
        for ep, (state, _, _) in enumerate(history, start=1):
            err = abs(state.m_bar - follower.dilation)
            proxy = realized_variance_proxy(state, follower)
            stopped = (
                stopping_rule(state, threshold, follower) if threshold is not None else False
            )
            if stopped and lam not in stop_at:
                stop_at[lam] = ep
            m_hat_ep, prec_ep = state.history[-1]
            rows.append([lam, ep, m_hat_ep, prec_ep, state.m_bar, err, proxy, stopped])
        final_errors[str(lam)] = abs(history[-1][0].m_bar - follower.dilation)

    summary = {
        "inference_weights": list(cfg.study["inference_weights"]),
        "n_episodes": n_episodes,
        "final_abs_error": final_errors,
        "stopped_at": {str(k): v for k, v in stop_at.items()},
    }
    return StudyResult(
        name="multi-period",
        summary=summary,
        tables={
            "episodes": (
                ["inference_weight", "episode", "m_hat", "precision", "m_bar",
                 "abs_error", "variance_proxy", "stopped"],
                rows,
            )
        },
        provenance=_provenance(cfg),
    )


def run_discrete_convergence(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Discrete-observation estimates against the continuous one on a fine path."""
    follower = cfg.build_follower()
    fine_exp = cfg.study.get("fine_exponent", 14)
    levels = cfg.study.get("levels", list(range(4, 11)))
    n_reps = cfg.study.get("n_sigma_replications", 100)
    if max(levels) >= fine_exp:
        raise ConfigError("config.study.levels: levels must be below fine_exponent")

    grid = build_grid(cfg.grid["horizon"], 2**fine_exp)
    fr = solve_follower_a(follower, grid)
    coeffs = compute_coefficients(fr, follower)
    lm = cfg.build_leader(grid)
    rng = RngContract(cfg.master_seed)
    x_leader, _ = _fixed_leader_path(follower, lm, coeffs, fr, grid, rng)
    gp = compute_g(fr, follower, x_leader)
    b, _ = solve_follower_bc(fr, follower, x_leader)

    fshocks = rng.normal_matrix(1, grid.n_steps, STREAM_FOLLOWER, 0)
    xf = simulate_follower_batch(follower, fr, b, grid, fshocks, mode="exact")[0]
    fpath = FollowerPath(
        grid=grid,
        x=xf,
        brownian=math.sqrt(grid.h) * fshocks[0],
        stream_key=(rng.master_seed, STREAM_FOLLOWER, 0),
        mode="exact",
    )
    m_cont = mle_continuous(fpath, gp, fr, follower).m_hat

    rows = []
    for k in sorted(levels):
        stride = 2 ** (fine_exp - k)
        idx = np.arange(0, grid.n_nodes, stride)
        obs = DiscreteObservations(times=grid.nodes[idx], values=xf[idx])
        est = mle_discrete_joint(obs, fr, gp, follower)
        rows.append(
            [k, len(idx) - 1, obs.mesh, est.m_hat, m_cont, abs(est.m_hat - m_cont),
             est.sigma2_hat]
        )

    # Noise-level consistency at the finest level over fresh follower paths.
    k_fin = max(levels)
    stride = 2 ** (fine_exp - k_fin)
    idx = np.arange(0, grid.n_nodes, stride)
    sigma2 = np.empty(n_reps)

    def work(lo, hi):
        shocks = rng.normal_matrix(hi - lo, grid.n_steps, STREAM_FOLLOWER, 1 + lo)
        xs = simulate_follower_batch(follower, fr, b, grid, shocks, mode="exact")
        for i in range(lo, hi):
            obs = DiscreteObservations(times=grid.nodes[idx], values=xs[i - lo, idx])
            sigma2[i] = mle_discrete_joint(obs, fr, gp, follower).sigma2_hat

    _run_chunked(n_reps, threads, work)

    summary = {
        "m_hat_continuous": m_cont,
        "abs_diff_by_level": {str(r[0]): r[5] for r in rows},
        "sigma2_mean_finest": float(np.mean(sigma2)),
        "sigma2_sd_finest": float(np.std(sigma2, ddof=1)),
        "n_sigma_replications": n_reps,
    }
    return StudyResult(
        name="discrete-convergence",
        summary=summary,
        tables={
            "levels": (
                ["level", "n_obs", "mesh", "m_hat_discrete", "m_hat_continuous",
                 "abs_diff", "sigma2_hat"],
                rows,
            )
        },
        provenance=_provenance(cfg),
    )


def _optimizer_config(cfg: ExperimentConfig, overrides: dict, objective: str) -> OptimizerConfig:
    base = dict(
        objective=objective,
        batch_size=256,
        budget=3000,
        master_seed=cfg.master_seed,
    )
    base.update(overrides)
    return OptimizerConfig(**base)


def run_benchmark_compare(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Fit the recurrent policy and compare it with the semi-explicit law.

    Both policies are evaluated on the same Brownian draws; the summary
    reports the information objective of each and their relative gap.
    """
    grid = cfg.build_grid()
    follower = cfg.build_follower()
    fr = solve_follower_a(follower, grid)
    coeffs = compute_coefficients(fr, follower)
    lm = cfg.build_leader(grid)
    lr = solve_leader_system(lm, follower, coeffs)
    riccati = RiccatiPolicy(lm, lr)
    rng = RngContract(cfg.master_seed)
    n_eval = cfg.study.get("n_eval_paths", 8192)
    n_display = cfg.study.get("n_display_paths", 5)

    policy_file = cfg.study.get("policy_file")
    if policy_file is not None:
        recurrent = load_policy_file(policy_file, grid)
    else:
        opt_cfg = _optimizer_config(cfg, cfg.study.get("optimizer", {}), "fisher")
        recurrent = optimize_policy(opt_cfg, lm, follower, coeffs, fr, grid).policy

    lam = lm.inference_weight
    scale = lam / follower.noise_to_signal

    def eval_policy(policy):
        precision, j_p, _, kept = _leader_stats(
            lm, follower, coeffs, fr, policy, grid, n_eval, rng, threads,
            keep_paths=n_display,
        )
        values = -scale * precision + j_p
        return values, kept

    vals_r, kept_r = eval_policy(riccati)
    vals_n, kept_n = eval_policy(recurrent)
    diff = vals_n - vals_r
    j_r, j_n = float(np.mean(vals_r)), float(np.mean(vals_n))
    summary = {
        "j_info_riccati": j_r,
        "j_info_recurrent": j_n,
        "rel_gap": (j_n - j_r) / abs(j_r),
        "diff_se": float(np.std(diff, ddof=1) / math.sqrt(n_eval)),
        "n_eval_paths": n_eval,
        # Parameters ride along in the summary so the fitted policy can be
        # reloaded with load_policy_file on the same architecture.
        "policy": {
            "architecture": {
                "window": recurrent.config.window,
                "decay": recurrent.config.decay,
                "hidden_width": recurrent.config.hidden_width,
                "out_width": recurrent.config.out_width,
            },
            "theta": [float(v) for v in recurrent.theta],
        },
    }
    traj_rows = []
    for i in range(n_display):
        xr, ur = kept_r[i]
        xn, un = kept_n[i]
        for j in range(grid.n_nodes):
            traj_rows.append([i, j, grid.nodes[j], xr[j], ur[j], xn[j], un[j]])
    return StudyResult(
        name="benchmark-compare",
        summary=summary,
        tables={
            "trajectories": (
                ["path", "node", "time", "x_riccati", "u_riccati",
                 "x_recurrent", "u_recurrent"],
                traj_rows,
            )
        },
        provenance=_provenance(cfg),
    )


def run_objective_compare(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Variance-minimizing recurrent policy vs information-maximizing law per pair."""
    grid = cfg.build_grid()
    follower = cfg.build_follower()
    fr = solve_follower_a(follower, grid)
    coeffs = compute_coefficients(fr, follower)
    rng = RngContract(cfg.master_seed)
    n_paths = cfg.study.get("n_paths", 10_000)
    overrides = cfg.study.get("optimizer", {})

    rows = []
    for lam_var, lam_info in cfg.study["pairs"]:
        lm_info = cfg.build_leader(grid, inference_weight=lam_info)
        lr = solve_leader_system(lm_info, follower, coeffs)
        prec_i, jp_i, eff_i, _ = _leader_stats(
            lm_info, follower, coeffs, fr, RiccatiPolicy(lm_info, lr), grid,
            n_paths, rng, threads,
        )
        lm_var = cfg.build_leader(grid, inference_weight=lam_var)
        opt_cfg = _optimizer_config(cfg, overrides, "variance")
        trained = optimize_policy(opt_cfg, lm_var, follower, coeffs, fr, grid).policy
        prec_v, jp_v, eff_v, _ = _leader_stats(
            lm_var, follower, coeffs, fr, trained, grid, n_paths, rng, threads
        )
        nts = follower.noise_to_signal
        rows.append(
            [lam_var, lam_info,
             float(np.mean(prec_v)) / nts, float(np.mean(prec_i)) / nts,
             float(np.mean(eff_v)), float(np.mean(eff_i)),
             float(np.mean(jp_v)), float(np.mean(jp_i)),
             n_paths, cfg.master_seed]
        )

    summary = {
        "pairs": [list(p) for p in cfg.study["pairs"]],
        "fisher_variance_policy": [r[2] for r in rows],
        "fisher_info_policy": [r[3] for r in rows],
    }
    return StudyResult(
        name="objective-compare",
        summary=summary,
        tables={
            "pairs": (
                ["lambda_variance", "lambda_info", "fi_variance_policy", "fi_info_policy",
                 "effort_variance_policy", "effort_info_policy",
                 "jp_variance_policy", "jp_info_policy", "n_paths", "seed"],
                rows,
            )
        },
        provenance=_provenance(cfg),
    )


def run_wellposedness(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Existence-horizon constants and the observed blow-up time, if any."""
    grid = cfg.build_grid()
    follower = cfg.build_follower()
    fr = solve_follower_a(follower, grid)
    coeffs = compute_coefficients(fr, follower)
    lm = cfg.build_leader(grid)
    bound = horizon_bound(lm, follower, coeffs)
    blow_up_time = None
    solved = True
    try:
        solve_leader_system(lm, follower, coeffs)
    except BlowUpError as exc:
        solved = False
        blow_up_time = exc.blow_up_time
    summary = {
        "q": bound.q,
        "beta": bound.beta,
        "y0": bound.y0,
        "t_max": bound.t_max,
        "horizon": grid.horizon,
        "solved_on_horizon": solved,
        "blow_up_time": blow_up_time,
    }
    return StudyResult(
        name="wellposedness",
        summary=summary,
        tables={
            "bound": (
                ["q", "beta", "y0", "t_max", "horizon", "solved_on_horizon", "blow_up_time"],
                [[bound.q, bound.beta, bound.y0, bound.t_max, grid.horizon, solved,
                  "" if blow_up_time is None else blow_up_time]],
            )
        },
        provenance=_provenance(cfg),
    )


def save_policy_file(path: str, policy: RecurrentPolicy):
    """Serialize fitted policy parameters with their architecture."""
    import json

    doc = {
        "architecture": {
            "window": policy.config.window,
            "decay": policy.config.decay,
            "hidden_width": policy.config.hidden_width,
            "out_width": policy.config.out_width,
        },
        "theta": [float(v) for v in policy.theta],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_policy_file(path: str, grid: TimeGrid) -> RecurrentPolicy:
    """Reload a serialized policy onto a grid.

    Accepts either a bare policy document or a benchmark-compare summary
    carrying one under summary.policy.
    """
    import json

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "theta" not in doc and "summary" in doc:
        doc = doc["summary"]["policy"]
    arch = doc["architecture"]
    config = RecurrentConfig(
        window=arch["window"],
        decay=arch["decay"],
        hidden_width=arch["hidden_width"],
        out_width=arch["out_width"],
    )
    return RecurrentPolicy(grid=grid, theta=np.asarray(doc["theta"]), config=config)


STUDY_RUNNERS = {
    "tradeoff-sweep": run_tradeoff_sweep,
    "estimator-study": run_estimator_study,
    "multi-period": run_multi_period,
    "discrete-convergence": run_discrete_convergence,
    "benchmark-compare": run_benchmark_compare,
    "objective-compare": run_objective_compare,
    "wellposedness": run_wellposedness,
}


def run_study(cfg: ExperimentConfig, threads: int = 1) -> StudyResult:
    """Dispatch a validated configuration to its study runner."""
    runner = STUDY_RUNNERS[cfg.study_name]
    return runner(cfg, threads=threads)
