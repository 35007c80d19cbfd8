"""Split-step integration of the gauged equation, forward and backward in time."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from bubbles import config
from bubbles.errors import ResolutionError
from bubbles.ground_state import RadialProfile, exponent
from bubbles.noise import NoiseModel
from bubbles.profiles import BubbleTarget, sum_profiles
from bubbles.spectral import Field, Grid

logger = logging.getLogger(__name__)

COMPLETED = "completed"
RESOLUTION_STOP = "resolution-stop"
DIVERGED = "diverged"


@dataclass
class StepController:
    """Step-size rule dt = min(dt_base, c_dt * lam_min^2), clipped to checkpoints.

    :ivar dt_base: Largest step
    :ivar c_dt: Factor in front of lam_min^2, at most 0.5
    :ivar dt_min: Smallest step taken
    :ivar checkpoints: Times at which the field is stored
    :ivar u_cap: Sup-norm above which a step counts as diverged
    """

    dt_base: float
    c_dt: float = config.C_DT_DEFAULT
    dt_min: float = config.DT_MIN_DEFAULT
    checkpoints: tuple[float, ...] = ()
    u_cap: float = config.U_CAP_DEFAULT
    clamped: bool = field(default=False, init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0 < self.c_dt <= config.C_DT_MAX:
            raise ValueError(f"c_dt must lie in (0, {config.C_DT_MAX}], got {self.c_dt}")
        if not self.dt_base > 0:
            raise ValueError(f"dt_base must be positive, got {self.dt_base}")
        self.checkpoints = tuple(float(t) for t in self.checkpoints)

    def step_size(self, lam_min: float | None = None) -> float:
        dt = self.dt_base
        if lam_min is not None:
            dt = min(dt, self.c_dt * lam_min**2)
        if dt >= self.dt_min:
            return dt
        # warn once per controller; the step now exceeds c_dt * lam_min^2
        if not self.clamped:
            logger.warning(
                "Step %.3g raised to dt_min=%.3g at scale %s, above the c_dt * lam^2 cap",
                dt,
                self.dt_min,
                "n/a" if lam_min is None else f"{lam_min:.4g}",
            )
            self.clamped = True
        return self.dt_min


@dataclass
class Trajectory:
    """Stored checkpoints of one run.

    :ivar times: Checkpoint times, monotone in the direction of integration
    :ivar fields: Field at each checkpoint
    :ivar masses: Squared L2 norm at each checkpoint
    :ivar status: completed, resolution-stop or diverged
    :ivar steps: Number of steps taken
    :ivar stop_scale: Scale that triggered a resolution stop
    """

    times: list[float] = field(default_factory=list)
    fields: list[Field] = field(default_factory=list)
    masses: list[float] = field(default_factory=list)
    status: str = COMPLETED
    steps: int = 0
    stop_scale: float | None = None

    def record(self, t: float, u: Field) -> None:
        self.times.append(float(t))
        self.fields.append(u.copy())
        self.masses.append(float(u.grid.cell * np.sum(np.abs(u.values) ** 2)))

    @property
    def final(self) -> Field:
        return self.fields[-1]

    def __len__(self) -> int:
        return len(self.times)

    def mass_drift(self) -> float:
        if not self.masses:
            return 0.0
        return float(max(abs(m - self.masses[0]) for m in self.masses))


def _nonlinear(values: np.ndarray, dt: float, power: float) -> np.ndarray:
    # |u| is constant along this flow, so the update is exact
    return values * np.exp(1j * dt * np.abs(values) ** power)


def linear_step(u: Field, t: float, dt: float, model: NoiseModel) -> Field:
    """Exact flow of i u_t + e^{-W} Delta (e^{W} u) = 0 with W frozen at t + dt/2."""
    grid = u.grid
    propagator = np.exp(-1j * grid.k2 * dt)
    if not model.active:
        return Field(grid, np.fft.ifftn(propagator * np.fft.fftn(u.values)))
    phase = np.exp(model.W(t + 0.5 * dt))
    conjugated = np.fft.ifftn(propagator * np.fft.fftn(phase * u.values))
    return Field(grid, conjugated / phase)


def step(u: Field, t: float, dt: float, model: NoiseModel, u_cap: float | None = None) -> Field:
    """One Strang step: half nonlinear, full linear, half nonlinear.

    Negative dt integrates backward. On overflow, non-finite values or a sup
    norm above u_cap the returned field is flagged as diverged.
    """
    power = exponent(u.grid.dim)
    with np.errstate(over="ignore", invalid="ignore"):
        half = _nonlinear(u.values, 0.5 * dt, power)
        if not np.all(np.isfinite(half)):
            return Field(u.grid, half, diverged=True)
        lin = linear_step(Field(u.grid, half), t, dt, model).values
        out = _nonlinear(lin, 0.5 * dt, power)
    finite = np.all(np.isfinite(out))
    if not finite or (u_cap is not None and np.max(np.abs(out)) > u_cap):
        return Field(u.grid, out, diverged=True)
    return Field(u.grid, out)


def _marks(t0: float, t1: float, checkpoints: Iterable[float]) -> list[float]:
    direction = np.sign(t1 - t0)
    inner_marks = [c for c in checkpoints if direction * (c - t0) > 0 and direction * (t1 - c) > 0]
    return sorted(set(inner_marks), key=lambda c: direction * c) + [t1]


def evolve(
    u0: Field,
    t0: float,
    t1: float,
    model: NoiseModel,
    controller: StepController,
    scale_hint: Callable[[float], float] | None = None,
) -> Trajectory:
    """Integrate from t0 to t1, storing checkpoints.

    :param u0: Initial field at t0
    :param t0: Start time
    :param t1: End time, before or after t0
    :param model: Noise model (NoiseModel.none for the deterministic equation)
    :param controller: Step-size rule and checkpoint times
    :param scale_hint: Smallest bubble scale as a function of time, or None
    :return: Trajectory; status tells whether t1 was reached
    """
    if t0 == t1:
        raise ValueError("evolve needs t0 != t1")
    direction = 1.0 if t1 > t0 else -1.0
    floor = u0.grid.resolution_floor
    traj = Trajectory()
    traj.record(t0, u0)
    u, t = u0, t0
    logger.info("Evolving from t=%.6g to t=%.6g", t0, t1)
    for mark in _marks(t0, t1, controller.checkpoints):
        while direction * (mark - t) > 0:
            lam = None
            if scale_hint is not None:
                lam = scale_hint(t)
                if lam < floor:
                    logger.warning("Resolution stop at t=%.6g: scale %.4g below %.4g", t, lam, floor)
                    traj.status = RESOLUTION_STOP
                    traj.stop_scale = lam
                    return traj
            dt = controller.step_size(lam)
            last = dt >= abs(mark - t)
            dt = direction * min(dt, abs(mark - t))
            u = step(u, t, dt, model, controller.u_cap)
            traj.steps += 1
            t = mark if last else t + dt
            if u.diverged:
                logger.warning("Diverged at t=%.6g after %d steps", t, traj.steps)
                traj.status = DIVERGED
                return traj
            if traj.steps % config.PROGRESS_EVERY == 0:
                logger.debug("t=%.6g after %d steps", t, traj.steps)
        traj.record(t, u)
    logger.info("Reached t=%.6g in %d steps, %d checkpoints", t, traj.steps, len(traj))
    return traj


def construct_approximant(
    t_n: float,
    targets: Sequence[BubbleTarget],
    T: float,
    q: RadialProfile,
    model: NoiseModel,
    controller: StepController,
    t_end: float,
    grid: Grid,
) -> Trajectory:
    """Start from the sum of pseudo-conformal solutions at t_n and integrate back to t_end.

    :raises ResolutionError: If a bubble is under-resolved at t_n
    """
    for target in targets:
        scale = target.omega * (T - t_n)
        if scale < grid.resolution_floor:
            raise ResolutionError(scale, grid.resolution_floor)
    u0 = sum_profiles([target.params_at(T, t_n) for target in targets], q, grid)
    omega_min = min(target.omega for target in targets)

    def scale_hint(t: float) -> float:
        return omega_min * (T - t)

    return evolve(u0, t_n, t_end, model, controller, scale_hint=scale_hint)
