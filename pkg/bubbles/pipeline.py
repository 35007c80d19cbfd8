"""Run orchestration: constructions, pairs, Cauchy sets and seed sweeps."""

from __future__ import annotations

import asyncio
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

import bubbles
from bubbles import config
from bubbles.batch import RunPool
from bubbles.data import (
    read_checkpoints,
    write_checkpoints,
    write_csv,
    write_paths,
    write_summary,
    write_yaml,
)
from bubbles.diagnostics import (
    DiagnosticsRow,
    MorawetzWeight,
    difference_functional,
    energy,
    energy_rate,
    energy_rate_agreement,
    fit_blowup_rate,
    fit_power_law,
    fit_window_mask,
    generalized_energy,
    localized_mass,
    mass,
    mass_quantization,
    momentum,
    monotonicity_check,
    sigma_distance,
)
from bubbles.errors import ConfigError, InsufficientDataError, NoiseRangeError, ResolutionError
from bubbles.evolution import (
    COMPLETED,
    DIVERGED,
    RESOLUTION_STOP,
    StepController,
    Trajectory,
    construct_approximant,
    evolve,
)
from bubbles.ground_state import LinearizedOps, reference_profiles
from bubbles.modulation import (
    Decomposition,
    basin_radius,
    fit_overlap_decay,
    interaction_overlap,
    make_localizers,
    mod_vector,
    renormalize_remainder,
    scal,
    track,
)
from bubbles.noise import NoiseModel, build_noise_model, drift_paths, gauge, sample_brownian
from bubbles.profiles import sum_profiles, target_sum
from bubbles.runconfig import RunConfig, classify_case, from_dict, validate
from bubbles.uniqueness import (
    CauchyMember,
    PairRun,
    cauchy_check,
    contraction_report,
    difference_series,
    field_perturbation,
    jitter_params,
)

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """Outcome of one run and where it was written.

    :ivar run_dir: Run directory
    :ivar status: completed, resolution-stop or diverged
    :ivar exit_code: Process exit code for the CLI
    :ivar summary: Key/value summary as written to summary.txt
    :ivar children: Child records of a sweep
    """

    run_dir: str
    status: str
    exit_code: int
    summary: dict[str, Any] = field(default_factory=dict)
    children: list[RunRecord] = field(default_factory=list)


class RunContext:
    """Grid, profiles, bubbles and noise shared by the stages of a run."""

    def __init__(self, cfg: RunConfig, seed: int | None = None):
        self.cfg = cfg
        self.grid = cfg.make_grid()
        self.q, self.rho = reference_profiles(cfg.dim, cfg.profile_cache)
        self.bubbles = cfg.bubble_set()
        self.model = self._noise_model(seed)

    def _noise_model(self, seed: int | None) -> NoiseModel:
        noise = self.cfg.noise
        if noise is None:
            return NoiseModel.none(self.grid)
        t_max = self.cfg.T
        if noise.path == "drift":
            paths = drift_paths(noise.rates, t_max, noise.dt_noise)
        else:
            paths = sample_brownian(noise.seed if seed is None else seed, t_max, noise.dt_noise, noise.modes)
        anchors = np.array([b.anchor for b in self.cfg.bubbles], dtype=float)
        try:
            return build_noise_model(
                self.grid, anchors, noise.nu_star, paths, envelope=noise.envelope, amplitude=noise.amplitude
            )
        except NoiseRangeError as exc:
            raise ConfigError("noise.envelope", str(exc)) from exc

    @cached_property
    def ops(self) -> LinearizedOps:
        return LinearizedOps.build(self.grid, self.q, self.rho)

    @cached_property
    def q_mass(self) -> float:
        return mass(self.ops.q)

    def controller(self, t_n: float) -> StepController:
        c = self.cfg.controller
        return StepController(
            dt_base=c.dt_base,
            c_dt=c.c_dt,
            dt_min=c.dt_min,
            checkpoints=self.cfg.checkpoint_times(t_n),
            u_cap=c.u_cap,
        )

    def scale_hint(self, t: float) -> float:
        return min(target.omega for target in self.bubbles) * (self.cfg.T - t)


# ---------------------------------------------------------------------------
# Trajectories (top-level so worker processes can run them)
# ---------------------------------------------------------------------------


@dataclass
class MemberJob:
    """One trajectory of a pair, Cauchy set or sweep."""

    config: dict[str, Any]
    t_n: float
    perturbation: str | None = None
    size: float = 0.0
    seed: int | None = None


def evolve_member(job: MemberJob) -> Trajectory:
    """Initial data at t_n (optionally perturbed), integrated back to t_end."""
    cfg = from_dict(job.config)
    ctx = RunContext(cfg, seed=job.seed)
    controller = ctx.controller(job.t_n)
    if job.perturbation is None:
        return construct_approximant(
            job.t_n, ctx.bubbles.targets, cfg.T, ctx.q, ctx.model, controller, cfg.t_end, ctx.grid
        )
    params = ctx.bubbles.params_at(cfg.T, job.t_n)
    if job.perturbation == "params":
        params = jitter_params(params, job.size)
    u0 = sum_profiles(params, ctx.q, ctx.grid)
    if job.perturbation == "field":
        u0 = u0 + field_perturbation(u0, job.size, center=params[0].anchor)
    return evolve(u0, job.t_n, cfg.t_end, ctx.model, controller, scale_hint=ctx.scale_hint)


def run_child(cfg_data: dict[str, Any]) -> RunRecord:
    """Run a sweep child in a worker process."""
    return run(from_dict(cfg_data))


async def _gather(workers: int, fn, items: list[Any]) -> list[Any]:
    async with RunPool(workers=workers) as pool:
        return await pool.map(fn, items)


def _parallel(workers: int, fn, items: list[Any]) -> list[Any]:
    return asyncio.run(_gather(workers, fn, items))


# ---------------------------------------------------------------------------
# Diagnostics of a trajectory
# ---------------------------------------------------------------------------


@dataclass
class Analysis:
    rows: list[DiagnosticsRow]
    decompositions: list[Decomposition] | None
    summary: dict[str, Any]


def _params_rows(times, decs: list[Decomposition], rows: list[DiagnosticsRow], dim: int) -> list[dict]:
    out = []
    for t, dec, row in zip(times, decs, rows):
        entry: dict[str, Any] = {"t": t}
        for j, p in enumerate(dec.params, start=1):
            entry[f"lam_{j}"] = p.lam
            for a in range(dim):
                entry[f"alpha_{j}_{a + 1}"] = p.alpha[a]
            for a in range(dim):
                entry[f"beta_{j}_{a + 1}"] = p.beta[a]
            entry[f"gamma_{j}"] = p.gamma
            entry[f"theta_{j}"] = p.theta
            entry[f"scal_{j}"] = row.scal[j - 1] if row.scal else None
        entry["mod"] = row.mod
        entry["converged"] = dec.converged
        out.append(entry)
    return out


def load_reference(run_dir: str) -> Trajectory:
    """Checkpoints of an earlier run directory as a trajectory."""
    times, fields = read_checkpoints(os.path.join(run_dir, config.CHECKPOINT_DIR))
    traj = Trajectory()
    for t, u in zip(times, fields):
        traj.record(t, u)
    return traj


def analyze(cfg: RunConfig, ctx: RunContext, traj: Trajectory) -> Analysis:
    """Per-checkpoint diagnostics plus fits over the resolved window."""
    toggles = cfg.diagnostics
    times = np.asarray(traj.times)
    k = len(ctx.bubbles)
    localizers = make_localizers(ctx.bubbles, ctx.grid)
    nu_star = cfg.noise.nu_star if cfg.noise else None
    summary: dict[str, Any] = {}

    logger.info("  [2/4] Decomposing %d checkpoints", len(times))
    decs = None
    mod = None
    if toggles.decompose:
        initial = ctx.bubbles.params_at(cfg.T, times[0])
        decs = track(traj.fields, initial, ctx.q, ctx.rho)
        summary["decompositions_converged"] = sum(d.converged for d in decs)
        if len(times) >= 3:
            mod = mod_vector(times, [d.params for d in decs], cfg.T, nu_star)
    weight = MorawetzWeight() if toggles.morawetz and decs else None
    if decs:
        lams = np.array([[p.lam for p in d.params] for d in decs])
    else:
        lams = np.array([[t.omega * (cfg.T - s) for t in ctx.bubbles] for s in times])
    reference = None
    if cfg.reference is not None:
        reference = PairRun(load_reference(cfg.reference), traj).base
        logger.info("  Comparing against reference run %s", cfg.reference)

    rows = []
    for i, (t, u) in enumerate(zip(times, traj.fields)):
        row = DiagnosticsRow(
            t=float(t),
            mass=mass(u),
            energy=energy(u),
            momentum=tuple(momentum(u)),
            localized=tuple(localized_mass(u, localizers)),
            quantization=mass_quantization(u, k, ctx.q_mass),
        )
        if toggles.energy_rate and ctx.model.active:
            row.energy_rate = energy_rate(u, ctx.model, t)
        try:
            distance = sigma_distance(u, target_sum(ctx.bubbles, cfg.T, t, ctx.q, ctx.grid))
            row.distance_l2 = distance["l2"]
            row.distance_h1 = distance["h1"]
            row.distance_sigma = distance["sigma"]
        except ResolutionError:
            pass
        if reference is not None:
            row.D = difference_functional(u - reference.fields[i], localizers, lams[i])
        if decs:
            dec = decs[i]
            row.lams = tuple(float(lam) for lam in lams[i])
            row.rate_ratios = tuple(p.lam / (p.omega * (cfg.T - t)) for p in dec.params)
            row.scal = tuple(
                scal(renormalize_remainder(dec.remainder, phi, p), ctx.ops.q, ctx.ops.rho).value
                for p, phi in zip(dec.params, localizers.phi)
            )
            if mod is not None:
                row.mod = float(mod.total[i])
            if weight is not None:
                row.I = generalized_energy(dec, localizers, weight, ctx.q)
        rows.append(row)

    logger.info("  [3/4] Fitting rates and conservation")
    masses = np.array([r.mass for r in rows])
    energies = np.array([r.energy for r in rows])
    span = max(abs(times[-1] - times[0]), 1e-300)
    summary["mass_drift_per_time"] = float(np.max(np.abs(masses - masses[0])) / span)
    summary["energy_drift_per_time"] = float(np.max(np.abs(energies - energies[0])) / span)
    summary["mass_quantization"] = rows[-1].quantization
    rates = [r.energy_rate for r in rows]
    if len(times) >= 3 and all(r is not None for r in rates):
        summary["energy_rate_agreement"] = energy_rate_agreement(times, energies, rates)
    if reference is not None:
        summary["D_max"] = float(max(r.D for r in rows))

    mask = fit_window_mask(lams.min(axis=1), ctx.grid.h)
    summary["fit_window_points"] = int(mask.sum())
    if mask.sum() >= config.MIN_FIT_POINTS:
        r_norms = None
        if decs:
            r_norms = np.array([mass(d.remainder) ** 0.5 for d in decs])[mask]
        fit = fit_blowup_rate(times[mask], lams[mask], r_norms, T=cfg.T)
        summary["T_est"] = fit.T_est
        summary["omega_est"] = list(fit.omega_est)
        summary["rate_fit_residual"] = fit.residual
        if fit.remainder_law is not None:
            summary["remainder_exponent"] = fit.remainder_law.exponent
        ratios = np.array([r.rate_ratios for r in rows]) if decs else None
        if ratios is not None and ratios.size:
            summary["rate_ratio_min"] = float(ratios[mask].min())
            summary["rate_ratio_max"] = float(ratios[mask].max())

    h1_dist = [r.distance_h1 for r in rows]
    if all(v is not None for v in h1_dist):
        law = fit_power_law(cfg.T - times, h1_dist)
        if law is not None:
            summary["distance_exponent"] = law.exponent
    if nu_star is not None:
        summary["predicted_distance_exponent"] = 0.5 * (nu_star - 5)
    scal_values = [max(r.scal) for r in rows if r.scal]
    if scal_values:
        summary["scal_max"] = float(max(scal_values))
    if mod is not None and mod.ratio is not None:
        summary["mod_bound_ratio_max"] = float(np.max(mod.ratio))

    if toggles.overlaps and k >= 2:
        params_at = [d.params for d in decs] if decs else [ctx.bubbles.params_at(cfg.T, s) for s in times]
        overlaps = []
        for params in params_at:
            matrix = interaction_overlap(params, ctx.q, ctx.grid)
            overlaps.append(float(np.max(matrix[~np.eye(k, dtype=bool)])))
        try:
            decay = fit_overlap_decay(lams.min(axis=1), overlaps)
            summary["overlap_slope"] = decay.slope
            summary["overlap_r2"] = decay.r2
        except InsufficientDataError as exc:
            logger.warning("Skipping overlap fit: %s", exc)

    if toggles.basin and decs:
        exact = ctx.bubbles.params_at(cfg.T, times[0])
        summary["basin_radius"] = basin_radius(traj.fields[0], exact, ctx.q, ctx.rho)

    if weight is not None:
        for A in config.MORAWETZ_A_SWEEP:
            summary[f"I_A{A:g}"] = generalized_energy(decs[-1], localizers, MorawetzWeight(A), ctx.q)
        if nu_star is not None and len(times) >= 4:
            report = monotonicity_check(times, [r.I for r in rows], cfg.T, kappa=nu_star - 3)
            summary["monotonicity_fraction"] = report.fraction
    return Analysis(rows=rows, decompositions=decs, summary=summary)


# ---------------------------------------------------------------------------
# Run kinds
# ---------------------------------------------------------------------------


def _status_code(status: str, fit_points: int) -> int:
    if status == DIVERGED:
        return config.EXIT_DIVERGED
    if status == RESOLUTION_STOP and fit_points < config.MIN_FIT_POINTS:
        return config.EXIT_RESOLUTION
    return config.EXIT_OK


def _header(cfg: RunConfig) -> dict[str, Any]:
    return {
        "kind": cfg.kind,
        "version": bubbles.__version__,
        "dim": cfg.dim,
        "bubbles": len(cfg.bubbles),
        "case": classify_case(cfg),
    }


def run_construct(cfg: RunConfig) -> RunRecord:
    """Backward construction from the sum of pseudo-conformal solutions at t_n."""
    ctx = RunContext(cfg)
    logger.info("  [1/4] Constructing from t_n=%.6g back to t=%.6g", cfg.t_n, cfg.t_end)
    traj = construct_approximant(
        cfg.t_n, ctx.bubbles.targets, cfg.T, ctx.q, ctx.model, ctx.controller(cfg.t_n), cfg.t_end, ctx.grid
    )
    summary = _header(cfg)
    summary.update({"status": traj.status, "steps": traj.steps, "checkpoints": len(traj)})
    analysis = analyze(cfg, ctx, traj)
    summary.update(analysis.summary)

    logger.info("  [4/4] Writing run directory %s", cfg.out_dir)
    write_checkpoints(cfg.out_dir, traj.times, traj.fields)
    if cfg.diagnostics.physical_checkpoints and ctx.model.active:
        physical = [gauge(u, ctx.model, t, "to_X") for t, u in zip(traj.times, traj.fields)]
        write_checkpoints(cfg.out_dir, traj.times, physical, subdir=config.PHYSICAL_DIR)
    if ctx.model.active:
        write_paths(os.path.join(cfg.out_dir, config.PATHS_FILE), ctx.model.paths)
    write_csv(os.path.join(cfg.out_dir, config.DIAGNOSTICS_FILE), [r.flat() for r in analysis.rows])
    if analysis.decompositions:
        write_csv(
            os.path.join(cfg.out_dir, config.PARAMS_FILE),
            _params_rows(traj.times, analysis.decompositions, analysis.rows, cfg.dim),
        )
    code = _status_code(traj.status, summary.get("fit_window_points", 0))
    summary["exit_code"] = code
    return RunRecord(cfg.out_dir, traj.status, code, summary)


def run_pair(cfg: RunConfig) -> RunRecord:
    """Base and perturbed constructions and their difference functionals."""
    ctx = RunContext(cfg)
    data = cfg.to_dict()
    jobs = [
        MemberJob(data, cfg.t_n),
        MemberJob(data, cfg.t_n, perturbation=cfg.pair.perturbation, size=cfg.pair.size),
    ]
    logger.info("  [1/4] Evolving pair (%s perturbation, size %.3g)", cfg.pair.perturbation, cfg.pair.size)
    base, perturbed = _parallel(cfg.workers, evolve_member, jobs)
    summary = _header(cfg)
    status = base.status if base.status != COMPLETED else perturbed.status
    summary["status"] = status
    if status != COMPLETED:
        code = config.EXIT_DIVERGED if DIVERGED in (base.status, perturbed.status) else config.EXIT_RESOLUTION
        summary["exit_code"] = code
        return RunRecord(cfg.out_dir, status, code, summary)

    pair = PairRun(base, perturbed)
    logger.info("  [2/4] Decomposing base trajectory")
    decs = track(base.fields, ctx.bubbles.params_at(cfg.T, base.times[0]), ctx.q, ctx.rho)
    localizers = make_localizers(ctx.bubbles, ctx.grid)
    logger.info("  [3/4] Difference functionals")
    series = difference_series(pair, decs, localizers, ctx.ops.q, ctx.ops.rho)
    contraction = contraction_report(series)
    summary.update(
        {
            "D_max": float(series.D.max()),
            "contraction_constant": contraction.constant,
            "contraction_slack": contraction.slack,
            "contraction_passed": contraction.passed,
        }
    )
    logger.info("  [4/4] Writing run directory %s", cfg.out_dir)
    k = len(ctx.bubbles)
    columns = ["t", "D"] + [f"scal_{j + 1}" for j in range(k)]
    rows = [
        dict(zip(columns, [t, d] + list(s))) for t, d, s in zip(series.times, series.D, series.scal)
    ]
    write_csv(os.path.join(cfg.out_dir, config.PAIR_FILE), rows, columns)
    summary["exit_code"] = config.EXIT_OK
    return RunRecord(cfg.out_dir, status, config.EXIT_OK, summary)


def run_cauchy(cfg: RunConfig) -> RunRecord:
    """Approximants from increasing t_n compared at t_end."""
    data = cfg.to_dict()
    seed = cfg.noise.seed if cfg.noise else None
    jobs = [MemberJob(data, t_n, seed=seed) for t_n in cfg.t_n_values]
    logger.info("  [1/4] Evolving %d approximants", len(jobs))
    trajectories = _parallel(cfg.workers, evolve_member, jobs)
    summary = _header(cfg)
    statuses = [t.status for t in trajectories]
    if any(s != COMPLETED for s in statuses):
        status = DIVERGED if DIVERGED in statuses else RESOLUTION_STOP
        code = config.EXIT_DIVERGED if status == DIVERGED else config.EXIT_RESOLUTION
        logger.warning("Cauchy set incomplete: member statuses %s", ", ".join(statuses))
        summary.update({"status": status, "member_status": statuses, "exit_code": code})
        return RunRecord(cfg.out_dir, status, code, summary)
    logger.info("  [2/4] Pairwise distances")
    members = [CauchyMember(t_n, traj, seed) for t_n, traj in zip(cfg.t_n_values, trajectories)]
    report = cauchy_check(members)
    summary.update(
        {
            "status": COMPLETED,
            "t_n": list(report.t_ns),
            "successive_l2": list(report.successive),
            "decreasing": report.decreasing,
            "shared_checkpoints": len(report.shared_times),
        }
    )
    logger.info("  [4/4] Writing run directory %s", cfg.out_dir)
    columns = ["t", "t_n_i", "t_n_j", "l2", "h1"]
    rows = []
    n = len(report.t_ns)
    for k, t in enumerate(report.shared_times):
        for i in range(n):
            for j in range(i + 1, n):
                values = [t, report.t_ns[i], report.t_ns[j], report.shared_l2[k, i, j], report.shared_h1[k, i, j]]
                rows.append(dict(zip(columns, values)))
    write_csv(os.path.join(cfg.out_dir, config.CAUCHY_FILE), rows, columns)
    summary["exit_code"] = config.EXIT_OK
    return RunRecord(cfg.out_dir, COMPLETED, config.EXIT_OK, summary)


def run_sweep(cfg: RunConfig) -> RunRecord:
    """One construction per seed, each in its own child directory."""
    children = []
    for seed in cfg.sweep.seeds:
        child = cfg.with_overrides(seed=seed, out_dir=os.path.join(cfg.out_dir, f"seed-{seed}"))
        child.kind = "construct"
        child.sweep = None
        child.workers = 1
        children.append(child.to_dict())
    logger.info("  [1/2] Sweeping %d seeds", len(children))
    records = _parallel(cfg.workers, run_child, children)
    summary = _header(cfg)
    summary["seeds"] = list(cfg.sweep.seeds)
    summary["children"] = [os.path.basename(r.run_dir) for r in records]
    summary["child_status"] = [r.status for r in records]
    code = max((r.exit_code for r in records), default=config.EXIT_OK)
    status = COMPLETED if code == config.EXIT_OK else "failed"
    summary.update({"status": status, "exit_code": code})
    logger.info("  [2/2] %d of %d children completed", sum(r.exit_code == 0 for r in records), len(records))
    return RunRecord(cfg.out_dir, status, code, summary, children=records)


_RUNNERS = {
    "construct": run_construct,
    "pair": run_pair,
    "cauchy": run_cauchy,
    "sweep": run_sweep,
}


def run(cfg: RunConfig) -> RunRecord:
    """Validate, run and persist one experiment.

    Writes config.yaml before running and summary.txt after; run.log captures
    the package log for the duration of the run.

    :raises ConfigError: If the config fails validation
    """
    validate(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_yaml(
        os.path.join(cfg.out_dir, config.CONFIG_FILE),
        cfg.to_dict(),
        header=f"# Effective {cfg.kind} config, multibubble {bubbles.__version__}\n",
    )
    handler = logging.FileHandler(os.path.join(cfg.out_dir, config.LOG_FILE), mode="w")
    handler.setFormatter(logging.Formatter("%(levelname).1s %(name)s %(message)s"))
    package_logger = logging.getLogger("bubbles")
    package_logger.addHandler(handler)
    try:
        logger.info("Run %s (%s) -> %s", cfg.kind, classify_case(cfg), cfg.out_dir)
        record = _RUNNERS[cfg.kind](cfg)
        write_summary(os.path.join(cfg.out_dir, config.SUMMARY_FILE), record.summary)
        logger.info("Run finished: status %s, exit code %d", record.status, record.exit_code)
        return record
    finally:
        package_logger.removeHandler(handler)
        handler.close()
