"""Pairs of nearby solutions: difference functionals, Cauchy sets and contraction."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from bubbles import config
from bubbles.diagnostics import difference_functional
from bubbles.errors import (
    ConfigMismatchError,
    DivergenceError,
    InsufficientDataError,
    MisalignedRunsError,
    ResolutionError,
)
from bubbles.evolution import COMPLETED, DIVERGED, Trajectory
from bubbles.modulation import Decomposition, Localizers, renormalize_remainder, scal
from bubbles.profiles import BubbleParams
from bubbles.spectral import Field, Grid, norms

logger = logging.getLogger(__name__)


@dataclass
class PairRun:
    """A base trajectory and a perturbed one sharing grid and checkpoints."""

    base: Trajectory
    perturbed: Trajectory

    def __post_init__(self) -> None:
        if not self.base.fields or not self.perturbed.fields:
            raise MisalignedRunsError("Pair members need at least one checkpoint")
        if self.base.fields[0].grid != self.perturbed.fields[0].grid:
            raise MisalignedRunsError("Pair members live on different grids")
        if len(self.base) != len(self.perturbed) or not np.allclose(
            self.base.times, self.perturbed.times, rtol=0.0, atol=1e-12
        ):
            raise MisalignedRunsError(
                f"Checkpoint times differ ({len(self.base)} vs {len(self.perturbed)} checkpoints)"
            )

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.base.times)

    def differences(self) -> list[Field]:
        return [v - u for u, v in zip(self.base.fields, self.perturbed.fields)]


def renormalized_difference(w: Field, phi: np.ndarray, params: BubbleParams) -> Field:
    """e_j: the renormalized w Phi_j with the phase exp(i(beta.y - gamma|y|^2/4)) removed."""
    eps = renormalize_remainder(w, phi, params)
    grid = w.grid
    phase = sum(b * ya for b, ya in zip(params.beta, grid.coords)) - 0.25 * params.gamma * grid.r2
    return Field(grid, np.exp(-1j * phase) * eps.values)


@dataclass
class DifferenceSeries:
    """D(t) and Scal_j(t) of a pair.

    :ivar times: Checkpoint times
    :ivar D: Difference functional per checkpoint
    :ivar scal: Array (n_times, K)
    :ivar lams: Array (n_times, K) of base scales
    """

    times: np.ndarray
    D: np.ndarray
    scal: np.ndarray
    lams: np.ndarray


def difference_series(
    pair: PairRun,
    decompositions: Sequence[Decomposition],
    localizers: Localizers,
    q: Field,
    rho: Field,
) -> DifferenceSeries:
    """D and the per-bubble Scal of w = v - u at every checkpoint.

    :param pair: Aligned pair of trajectories
    :param decompositions: Decomposition of the base field per checkpoint
    :param localizers: Partition of unity for the bubbles
    :param q: Ground state on the grid
    :param rho: rho on the grid
    :raises MisalignedRunsError: If the decompositions do not match the checkpoints
    """
    if len(decompositions) != len(pair.base):
        raise MisalignedRunsError(
            f"{len(decompositions)} decompositions for {len(pair.base)} checkpoints"
        )
    d_values, scal_rows, lam_rows = [], [], []
    for w, dec in zip(pair.differences(), decompositions):
        lams = [p.lam for p in dec.params]
        d_values.append(difference_functional(w, localizers, lams))
        scal_rows.append(
            [
                scal(renormalize_remainder(w, phi, p), q, rho).value
                for p, phi in zip(dec.params, localizers.phi)
            ]
        )
        lam_rows.append(lams)
    return DifferenceSeries(
        times=pair.times,
        D=np.array(d_values),
        scal=np.array(scal_rows),
        lams=np.array(lam_rows),
    )


@dataclass
class ContractionReport:
    """sup D against the Scal-driven bound.

    :ivar constant: Median of lhs / rhs
    :ivar slack: Largest lhs / (constant * rhs)
    """

    lhs: np.ndarray
    rhs: np.ndarray
    constant: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.slack <= config.CONTRACTION_SLACK


def contraction_report(series: DifferenceSeries) -> ContractionReport:
    """Compare sup_{s >= t} D(s) with sup_{s >= t} sum_j Scal_j / lam_j^2 plus the boundary value of D.

    :raises InsufficientDataError: If the bound vanishes everywhere
    """
    order = np.argsort(series.times)
    D = series.D[order]
    forcing = np.sum(series.scal[order] / series.lams[order] ** 2, axis=1)
    boundary = D[-1]
    lhs = np.maximum.accumulate(D[::-1])[::-1]
    rhs = np.maximum.accumulate(forcing[::-1])[::-1] + boundary
    keep = rhs > 0
    if not np.any(keep):
        raise InsufficientDataError("Contraction bound is zero at every checkpoint")
    ratios = lhs[keep] / rhs[keep]
    constant = float(np.median(ratios))
    slack = float(np.max(ratios) / constant) if constant > 0 else 0.0
    logger.info("Contraction constant %.4g, slack %.3g", constant, slack)
    return ContractionReport(lhs=lhs, rhs=rhs, constant=constant, slack=slack)


# ---------------------------------------------------------------------------
# Cauchy sets
# ---------------------------------------------------------------------------


@dataclass
class CauchyMember:
    """One approximant of a Cauchy set."""

    t_n: float
    trajectory: Trajectory
    seed: int | None = None


@dataclass
class CauchyReport:
    """Pairwise distances of approximants at the common end time.

    :ivar t_ns: Start times, ascending
    :ivar l2: Distance matrix in L2
    :ivar h1: Distance matrix in the gradient seminorm
    :ivar successive: Distances between consecutive t_n
    :ivar shared_times: Checkpoint times every member recorded, end time last
    :ivar shared_l2: L2 distance matrix at each shared time
    :ivar shared_h1: Gradient-seminorm distance matrix at each shared time
    """

    t_ns: np.ndarray
    l2: np.ndarray
    h1: np.ndarray
    successive: np.ndarray
    shared_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    shared_l2: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 0)))
    shared_h1: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 0)))

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.successive) < 0))


def _shared_times(members: Sequence[CauchyMember], tol: float = 1e-12) -> list[float]:
    first = members[0].trajectory.times
    return [t for t in first if all(_index_of(m.trajectory, t, tol) is not None for m in members[1:])]


def _index_of(traj: Trajectory, t: float, tol: float) -> int | None:
    for i, s in enumerate(traj.times):
        if abs(s - t) <= tol:
            return i
    return None


def _distances(fields: Sequence[Field]) -> tuple[np.ndarray, np.ndarray]:
    n = len(fields)
    l2 = np.zeros((n, n))
    h1 = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            diff = norms(fields[i] - fields[j], p=())
            l2[i, j] = l2[j, i] = diff.l2
            h1[i, j] = h1[j, i] = diff.h1
    return l2, h1


def _check_finished(member: CauchyMember) -> None:
    traj = member.trajectory
    if traj.status == COMPLETED:
        return
    if traj.status == DIVERGED:
        raise DivergenceError(f"Run from t_n={member.t_n} diverged at t={traj.times[-1]:.6g}")
    floor = traj.final.grid.resolution_floor
    raise ResolutionError(floor if traj.stop_scale is None else traj.stop_scale, floor)


def cauchy_check(members: Sequence[CauchyMember]) -> CauchyReport:
    """Distances between approximants started at increasing t_n.

    Compared at the common end time and at every other checkpoint all
    members recorded.

    :raises InsufficientDataError: With fewer than three members
    :raises ConfigMismatchError: If seeds, grids or end times differ
    :raises DivergenceError: If a member diverged
    :raises ResolutionError: If a member stopped on the resolution floor
    """
    if len(members) < 3:
        raise InsufficientDataError(f"Cauchy check needs at least 3 runs, got {len(members)}")
    members = sorted(members, key=lambda m: m.t_n)
    seeds = {m.seed for m in members}
    if len(seeds) > 1:
        raise ConfigMismatchError(f"Cauchy members use different noise seeds: {sorted(map(str, seeds))}")
    grid: Grid = members[0].trajectory.final.grid
    end = members[0].trajectory.times[-1]
    for m in members:
        _check_finished(m)
        if m.trajectory.final.grid != grid:
            raise ConfigMismatchError("Cauchy members live on different grids")
        if abs(m.trajectory.times[-1] - end) > 1e-12:
            raise ConfigMismatchError("Cauchy members end at different times")
    n = len(members)
    l2, h1 = _distances([m.trajectory.final for m in members])
    successive = np.array([l2[i, i + 1] for i in range(n - 1)])

    shared = _shared_times(members)
    shared_l2 = np.zeros((len(shared), n, n))
    shared_h1 = np.zeros((len(shared), n, n))
    for k, t in enumerate(shared):
        fields = [m.trajectory.fields[_index_of(m.trajectory, t, 1e-12)] for m in members]
        shared_l2[k], shared_h1[k] = _distances(fields)

    report = CauchyReport(
        t_ns=np.array([m.t_n for m in members]),
        l2=l2,
        h1=h1,
        successive=successive,
        shared_times=np.array(shared),
        shared_l2=shared_l2,
        shared_h1=shared_h1,
    )
    logger.info(
        "Cauchy distances %s at %d shared checkpoints (decreasing: %s)",
        np.array2string(successive, precision=3),
        len(shared),
        report.decreasing,
    )
    return report


# ---------------------------------------------------------------------------
# Perturbations of the data at t_n
# ---------------------------------------------------------------------------


def jitter_params(params: Sequence[BubbleParams], size: float) -> list[BubbleParams]:
    """Relative change of lam and theta by size."""
    out = []
    for p in params:
        v = p.as_vector()
        v[0] *= 1.0 + size
        v[-1] *= 1.0 + size
        out.append(p.with_vector(v))
    return out


def field_perturbation(u: Field, size: float, center: np.ndarray | None = None) -> Field:
    """Smooth Gaussian bump with L2 norm size * ||u||."""
    grid = u.grid
    center = np.zeros(grid.dim) if center is None else center
    bump = np.exp(-sum(xa**2 for xa in grid.shifted(center))).astype(complex)
    bump_field = Field(grid, bump)
    scale = size * norms(u, p=()).l2 / norms(bump_field, p=()).l2
    return scale * bump_field
