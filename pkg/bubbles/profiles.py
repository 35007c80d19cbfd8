"""Modulated bubbles, pseudo-conformal solutions and symmetry transforms."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from bubbles import config
from bubbles.errors import ResolutionError, SeparationError, TimeRangeError, TruncationError
from bubbles.ground_state import RadialProfile
from bubbles.spectral import Field, Grid, gradient, resample, scaling_generator

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class BubbleParams:
    """Modulation parameters of one bubble plus its fixed target.

    :ivar lam: Scale, positive
    :ivar alpha: Center
    :ivar beta: Velocity
    :ivar gamma: Conformal rate
    :ivar theta: Phase
    :ivar omega: Target scale rate
    :ivar anchor: Target blow-up point
    :ivar vartheta: Target phase offset
    """

    lam: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: float = 0.0
    theta: float = 0.0
    omega: float = 1.0
    anchor: np.ndarray | None = None
    vartheta: float = 0.0

    def __post_init__(self) -> None:
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        self.beta = np.broadcast_to(np.asarray(self.beta, dtype=float), self.alpha.shape).copy()
        self.anchor = (
            self.alpha.copy() if self.anchor is None else np.atleast_1d(np.asarray(self.anchor, dtype=float))
        )
        if not self.lam > 0:
            raise ValueError(f"Bubble scale must be positive, got {self.lam}")

    @property
    def dim(self) -> int:
        return self.alpha.size

    def as_vector(self) -> np.ndarray:
        """[lam, alpha, beta, gamma, theta], length 2d + 3."""
        return np.concatenate([[self.lam], self.alpha, self.beta, [self.gamma, self.theta]])

    def with_vector(self, vector: np.ndarray) -> BubbleParams:
        d = self.dim
        vector = np.asarray(vector, dtype=float)
        return BubbleParams(
            lam=float(vector[0]),
            alpha=vector[1 : 1 + d],
            beta=vector[1 + d : 1 + 2 * d],
            gamma=float(vector[1 + 2 * d]),
            theta=float(vector[2 + 2 * d]),
            omega=self.omega,
            anchor=self.anchor,
            vartheta=self.vartheta,
        )

    @classmethod
    def pseudo_conformal(
        cls, omega: float, anchor: np.ndarray, vartheta: float, T: float, t: float
    ) -> BubbleParams:
        """Parameters of the exact pseudo-conformal solution at time t."""
        if t >= T:
            raise TimeRangeError(f"t = {t} must be before the blow-up time {T}")
        tau = T - t
        anchor = np.atleast_1d(np.asarray(anchor, dtype=float))
        return cls(
            lam=omega * tau,
            alpha=anchor,
            beta=np.zeros_like(anchor),
            gamma=omega**2 * tau,
            theta=1.0 / (omega**2 * tau) + vartheta,
            omega=omega,
            anchor=anchor,
            vartheta=vartheta,
        )


@dataclass(frozen=True)
class BubbleTarget:
    """Target triple of one bubble: rate, blow-up point, phase."""

    omega: float
    anchor: tuple[float, ...]
    vartheta: float = 0.0

    def params_at(self, T: float, t: float) -> BubbleParams:
        return BubbleParams.pseudo_conformal(self.omega, np.asarray(self.anchor), self.vartheta, T, t)


@dataclass
class BubbleSet:
    """Bubbles ordered along the separating direction v1.

    :ivar targets: Targets sorted by projection on v1
    :ivar dim: Spatial dimension
    :ivar rotation: Orthogonal matrix whose first row is v1
    :ivar sigma: One twelfth of the smallest projected anchor gap
    """

    targets: list[BubbleTarget]
    dim: int
    rotation: np.ndarray = field(repr=False)
    sigma: float

    @property
    def direction(self) -> np.ndarray:
        return self.rotation[0]

    @property
    def projections(self) -> np.ndarray:
        return np.array([np.dot(self.direction, t.anchor) for t in self.targets])

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self) -> Iterator[BubbleTarget]:
        return iter(self.targets)

    def params_at(self, T: float, t: float) -> list[BubbleParams]:
        return [target.params_at(T, t) for target in self.targets]

    @classmethod
    def from_targets(cls, targets: Sequence[BubbleTarget], dim: int) -> BubbleSet:
        """Choose v1, order the bubbles along it and compute sigma.

        :raises SeparationError: If two anchors coincide or cannot be separated
        """
        anchors = np.array([np.asarray(t.anchor, dtype=float) for t in targets]).reshape(-1, dim)
        for i in range(len(anchors)):
            for j in range(i):
                if np.allclose(anchors[i], anchors[j]):
                    raise SeparationError(f"Anchors {i} and {j} coincide at {anchors[i]}")
        if dim == 1:
            rotation = np.eye(1)
        else:
            rotation = _best_rotation(anchors)
        proj = anchors @ rotation[0] if len(anchors) else np.empty(0)
        order = np.argsort(proj, kind="stable")
        gaps = np.diff(proj[order])
        if len(targets) < 2:
            sigma = np.inf
        else:
            sigma = config.SEPARATION_FRACTION * float(gaps.min())
            if sigma <= 0:
                raise SeparationError("Anchors have equal projections on every direction")
        logger.debug("BubbleSet K=%d, v1=%s, sigma=%.4g", len(targets), rotation[0], sigma)
        return cls(targets=[targets[i] for i in order], dim=dim, rotation=rotation, sigma=sigma)


def _best_rotation(anchors: np.ndarray) -> np.ndarray:
    """Rotation maximizing the smallest gap of anchor projections on its first row."""
    if len(anchors) < 2:
        return np.eye(2)
    angles = np.linspace(0.0, np.pi, config.ANCHOR_SCAN_ANGLES, endpoint=False)
    best, best_gap = 0.0, -1.0
    for a in angles:
        proj = np.sort(anchors @ np.array([np.cos(a), np.sin(a)]))
        gap = np.diff(proj).min()
        if gap > best_gap + 1e-12:
            best, best_gap = a, gap
    c, s = np.cos(best), np.sin(best)
    return np.array([[c, s], [-s, c]])


def _check_resolvable(lam: float, grid: Grid) -> None:
    if lam < grid.resolution_floor:
        raise ResolutionError(lam, grid.resolution_floor)


def _modulated(params: BubbleParams, profile: RadialProfile, grid: Grid) -> Field:
    _check_resolvable(params.lam, grid)
    y = [xa / params.lam for xa in grid.shifted(params.alpha)]
    y2 = sum(ya**2 for ya in y)
    phase = sum(b * ya for b, ya in zip(params.beta, y)) - 0.25 * params.gamma * y2 + params.theta
    values = params.lam ** (-0.5 * grid.dim) * profile(np.sqrt(y2)) * np.exp(1j * phase)
    return Field(grid, values)


def bubble(params: BubbleParams, q: RadialProfile, grid: Grid) -> Field:
    """U = lam^{-d/2} Q(y) exp(i(beta.y - gamma|y|^2/4 + theta)), y = (x - alpha)/lam.

    :raises ResolutionError: If lam is below 4h
    """
    return _modulated(params, q, grid)


def varrho_profile(params: BubbleParams, rho: RadialProfile, grid: Grid) -> Field:
    """The bubble construction applied to rho."""
    return _modulated(params, rho, grid)


def sum_profiles(params: Iterable[BubbleParams], q: RadialProfile, grid: Grid) -> Field:
    """Superposition of bubbles; the zero field for an empty set."""
    total = grid.zeros()
    for p in params:
        total = total + bubble(p, q, grid)
    return total


def pseudo_conformal_S(
    omega: float,
    anchor: np.ndarray,
    vartheta: float,
    T: float,
    t: float,
    q: RadialProfile,
    grid: Grid,
) -> Field:
    """Pseudo-conformal blow-up solution at time t.

    :raises TimeRangeError: If t >= T
    :raises ResolutionError: If omega (T - t) is below 4h
    """
    return bubble(BubbleParams.pseudo_conformal(omega, anchor, vartheta, T, t), q, grid)


def target_sum(bubbles: BubbleSet, T: float, t: float, q: RadialProfile, grid: Grid) -> Field:
    """Sum of the pseudo-conformal solutions of every target."""
    return sum_profiles(bubbles.params_at(T, t), q, grid)


def parameter_derivatives(params: BubbleParams, u: Field) -> list[Field]:
    """Derivatives of a bubble field with respect to (lam, alpha, beta, gamma, theta).

    :param params: Parameters the bubble u was built from
    :param u: The bubble field
    :return: 2d + 3 fields in as_vector order
    """
    grid = u.grid
    y = [xa / params.lam for xa in grid.shifted(params.alpha)]
    y2 = sum(ya**2 for ya in y)
    out = [-(1.0 / params.lam) * scaling_generator(u, params.alpha)]
    out += [-g for g in gradient(u)]
    out += [Field(grid, 1j * ya * u.values) for ya in y]
    out.append(Field(grid, -0.25j * y2 * u.values))
    out.append(Field(grid, 1j * u.values))
    return out


def pc_transform(f: Field, t: float) -> Field:
    """P_t f(x) = |t|^{-d/2} f(x/|t|) exp(-i|x|^2/(4t)).

    P_{-1/t} undoes P_t.

    :raises TimeRangeError: If t == 0
    :raises TruncationError: If mass leaves the box or the chirp is not resolved
    """
    if t == 0:
        raise TimeRangeError("The pseudo-conformal transform needs t != 0")
    grid = f.grid
    s = abs(t)
    chirp_k = grid.extent / (2.0 * s)
    if chirp_k >= np.pi / grid.h:
        raise TruncationError(
            0.0, f"Chirp wavenumber {chirp_k:.4g} exceeds the grid limit {np.pi / grid.h:.4g}"
        )
    mod2 = np.abs(f.values) ** 2
    total = float(np.sum(mod2))
    inside = np.ones(grid.shape, dtype=bool)
    for xa in grid.coords:
        inside &= np.abs(xa) < grid.extent / s
    lost = float(np.sum(mod2[~inside]) / total) if total > 0 else 0.0
    if lost > config.TRUNCATION_TOL:
        raise TruncationError(lost)
    stretched = resample(f, np.zeros(grid.dim), 1.0 / s)
    values = s ** (-0.5 * grid.dim) * stretched.values * np.exp(-1j * grid.r2 / (4.0 * t))
    return Field(grid, values)
