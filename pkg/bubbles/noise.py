"""Conservative noise: flat spatial weights, driving paths, coefficients and the gauge."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import signal

from bubbles import config
from bubbles.errors import NoiseRangeError
from bubbles.spectral import Field, Grid

logger = logging.getLogger(__name__)


@dataclass
class FlatWeight:
    """phi(x) = factor * G(x/s) * exp(-|x/s - center|^2) with G a polynomial.

    :ivar coeffs: Coefficients of G in the scaled variable, one array axis per dimension
    :ivar envelope: Envelope scale s
    :ivar center: Gaussian center in scaled units
    :ivar factor: Overall amplitude
    """

    coeffs: np.ndarray
    envelope: float
    center: np.ndarray
    factor: float = 1.0

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    def __call__(self, *x: np.ndarray) -> np.ndarray:
        xi = [np.asarray(xa, dtype=float) / self.envelope for xa in x]
        if self.dim == 1:
            poly = P.polyval(xi[0], self.coeffs)
        else:
            poly = P.polyval2d(xi[0], xi[1], self.coeffs)
        gauss = np.exp(-sum((xa - c) ** 2 for xa, c in zip(xi, self.center)))
        return self.factor * poly * gauss

    def derivative(self, axis: int) -> FlatWeight:
        """Partial derivative along one axis, again of the same form."""
        shift = [(1, 0) if a == axis else (0, 0) for a in range(self.dim)]
        extend = [(0, 1) if a == axis else (0, 0) for a in range(self.dim)]
        # d/dxi_a [G e^{-|xi - c|^2}] = (dG - 2 (xi_a - c_a) G) e^{-|xi - c|^2}
        times_xi = np.pad(self.coeffs, shift)
        new = -2.0 * (times_xi - self.center[axis] * np.pad(self.coeffs, extend))
        der = P.polyder(self.coeffs, axis=axis)
        new[tuple(slice(0, s) for s in der.shape)] += der
        return FlatWeight(new, self.envelope, self.center, self.factor / self.envelope)

    def partial(self, orders: Sequence[int]) -> FlatWeight:
        out = self
        for axis, n in enumerate(orders):
            for _ in range(n):
                out = out.derivative(axis)
        return out


def _vanishing_factor(anchors: np.ndarray, nu_star: int, envelope: float) -> np.ndarray:
    """Coefficients of a polynomial vanishing to order nu_star + 1 at every anchor."""
    dim = anchors.shape[1]
    coeffs = np.ones((1,) * dim)
    for a in anchors / envelope:
        if dim == 1:
            factor = P.polypow([-a[0], 1.0], nu_star + 1)
        else:
            # |xi - a|^2 raised to the smallest even-total power >= nu_star + 1
            m = math.ceil((nu_star + 1) / 2)
            square = np.zeros((3, 3))
            square[0, 0] = a[0] ** 2 + a[1] ** 2
            square[1, 0], square[2, 0] = -2.0 * a[0], 1.0
            square[0, 1], square[0, 2] = -2.0 * a[1], 1.0
            factor = np.ones((1, 1))
            for _ in range(m):
                factor = signal.convolve(factor, square)
        coeffs = signal.convolve(coeffs, factor)
    return coeffs


def mode_centers(n_modes: int, dim: int) -> list[np.ndarray]:
    """Gaussian centers of the modes, spread along the first axis in scaled units."""
    return [
        np.array([0.5 * (k - 0.5 * (n_modes - 1))] + [0.0] * (dim - 1)) for k in range(n_modes)
    ]


def multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    return [nu for nu in itertools.product(range(order + 1), repeat=dim) if sum(nu) <= order]


def make_flat_weights(
    anchors: np.ndarray,
    nu_star: int,
    grid: Grid,
    envelope: float | None = None,
    n_modes: int = 1,
    amplitude: float = 1.0,
) -> list[FlatWeight]:
    """Build weights vanishing to order nu_star at every anchor.

    :param anchors: Array of shape (K, d)
    :param nu_star: Flatness order
    :param grid: Grid used for normalization and the boundary decay check
    :param envelope: Gaussian scale, defaults to L/8
    :param n_modes: Number of weights
    :param amplitude: Sup norm of each weight on the grid
    :return: List of FlatWeight
    :raises NoiseRangeError: If the weights are not negligible at the box boundary
    """
    anchors = np.asarray(anchors, dtype=float).reshape(-1, grid.dim)
    if nu_star < config.MIN_FLATNESS:
        logger.warning(
            "Flatness order %d is below %d; blow-up results are not expected to hold",
            nu_star,
            config.MIN_FLATNESS,
        )
    envelope = envelope or config.ENVELOPE_FRACTION * grid.extent
    poly = _vanishing_factor(anchors, nu_star, envelope)
    weights = []
    for center in mode_centers(n_modes, grid.dim):
        weight = FlatWeight(poly, envelope, center)
        peak = float(np.max(np.abs(weight(*grid.coords))))
        weight.factor = amplitude / peak if peak > 0 else 0.0
        check_boundary_decay(weight, grid, nu_star)
        weights.append(weight)
    logger.debug("Built %d flat weights, nu*=%d, envelope %.3g", n_modes, nu_star, envelope)
    return weights


def check_boundary_decay(weight: FlatWeight, grid: Grid, order: int) -> float:
    """Largest <x>^2 |d^nu phi| over the box boundary for |nu| <= order.

    :raises NoiseRangeError: If it exceeds the decay tolerance
    """
    edge = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        index = [slice(None)] * grid.dim
        index[axis] = 0
        edge[tuple(index)] = True
    x = [xa[edge] for xa in grid.coords]
    bracket = 1.0 + sum(xa**2 for xa in x)
    worst = max(
        float(np.max(bracket * np.abs(weight.partial(nu)(*x)))) for nu in multi_indices(grid.dim, order)
    )
    if worst > config.DECAY_BOUNDARY_TOL:
        raise NoiseRangeError(
            f"Noise weight does not decay at the box boundary ({worst:.3e}); "
            "move anchors inward or shrink the envelope"
        )
    return worst


def flatness_residual(weight: FlatWeight, anchors: np.ndarray, order: int) -> float:
    """Largest |d^nu phi(x_j)| over anchors and |nu| <= order."""
    anchors = np.asarray(anchors, dtype=float).reshape(-1, weight.dim)
    worst = 0.0
    for nu in multi_indices(weight.dim, order):
        der = weight.partial(nu)
        values = der(*anchors.T)
        worst = max(worst, float(np.max(np.abs(values))))
    return worst


def flatness_slope(weight: FlatWeight, anchor: np.ndarray, radii: np.ndarray, samples: int = 64) -> float:
    """Slope of log sup_{|x - anchor| <= r} |phi| against log r."""
    anchor = np.asarray(anchor, dtype=float)
    sups = []
    for r in radii:
        if weight.dim == 1:
            x = (anchor[0] + r * np.linspace(-1.0, 1.0, 2 * samples + 1),)
        else:
            angle = np.linspace(0.0, 2.0 * np.pi, 4 * samples, endpoint=False)
            x = (anchor[0] + r * np.cos(angle), anchor[1] + r * np.sin(angle))
        sups.append(np.max(np.abs(weight(*x))))
    slope, _ = np.polyfit(np.log(radii), np.log(sups), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Driving paths
# ---------------------------------------------------------------------------


@dataclass
class NoisePaths:
    """Piecewise-linear paths B_k on a uniform time mesh.

    :ivar times: Mesh starting at 0
    :ivar values: Array (len(times), n_modes)
    :ivar kind: "brownian" or "drift"
    """

    times: np.ndarray
    values: np.ndarray
    kind: str = "brownian"

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Interpolated path values at t.

        :raises NoiseRangeError: If t lies outside the mesh
        """
        lo, hi = self.times[0], self.times[-1]
        if t < lo - config.NOISE_TIME_SLACK or t > hi + config.NOISE_TIME_SLACK:
            raise NoiseRangeError(f"t = {t} outside the noise path range [{lo}, {hi}]")
        return np.array([np.interp(t, self.times, self.values[:, k]) for k in range(self.n_modes)])


def _time_mesh(t_max: float, dt_noise: float) -> np.ndarray:
    if not dt_noise > 0:
        raise NoiseRangeError(f"dt_noise must be positive, got {dt_noise}")
    steps = max(1, math.ceil(t_max / dt_noise - 1e-9))
    return dt_noise * np.arange(steps + 1)


def sample_brownian(seed: int, t_max: float, dt_noise: float, n_modes: int) -> NoisePaths:
    """Seeded Brownian paths with B(0) = 0 and increments of variance dt_noise."""
    times = _time_mesh(t_max, dt_noise)
    rng = np.random.default_rng(seed)
    increments = rng.standard_normal((times.size - 1, n_modes)) * np.sqrt(dt_noise)
    values = np.vstack([np.zeros((1, n_modes)), np.cumsum(increments, axis=0)])
    return NoisePaths(times=times, values=values, kind="brownian")


def drift_paths(rates: Sequence[float], t_max: float, dt_noise: float) -> NoisePaths:
    """Deterministic paths B_k(t) = rate_k t."""
    times = _time_mesh(t_max, dt_noise)
    values = np.outer(times, np.asarray(rates, dtype=float))
    return NoisePaths(times=times, values=values, kind="drift")


# ---------------------------------------------------------------------------
# Model and coefficients
# ---------------------------------------------------------------------------


@dataclass
class Coefficients:
    """b = 2 grad W (per axis) and c = sum_j (d_j W)^2 + Delta W at a fixed time."""

    b: tuple[Field, ...]
    c: Field


@dataclass(eq=False)
class NoiseModel:
    """Weights sampled on a grid together with their paths.

    :ivar grid: Grid the weights are sampled on
    :ivar weights: Spatial weights phi_k
    :ivar paths: Driving paths, None for the deterministic equation
    :ivar nu_star: Flatness order of the weights
    """

    grid: Grid
    weights: list[FlatWeight] = field(default_factory=list)
    paths: NoisePaths | None = None
    nu_star: int = 0

    @classmethod
    def none(cls, grid: Grid) -> NoiseModel:
        return cls(grid=grid)

    @property
    def active(self) -> bool:
        return bool(self.weights) and self.paths is not None

    def _sample(self, orders: Sequence[int]) -> np.ndarray:
        if not self.weights:
            return np.zeros((0,) + self.grid.shape)
        return np.stack([w.partial(orders)(*self.grid.coords) for w in self.weights])

    @cached_property
    def phi(self) -> np.ndarray:
        return self._sample((0,) * self.grid.dim)

    @cached_property
    def grad_phi(self) -> list[np.ndarray]:
        return [self._sample(tuple(int(a == b) for b in range(self.grid.dim))) for a in range(self.grid.dim)]

    @cached_property
    def hessian_phi(self) -> list[list[np.ndarray]]:
        d = self.grid.dim
        out = [[None] * d for _ in range(d)]
        for a in range(d):
            for b in range(a, d):
                orders = [0] * d
                orders[a] += 1
                orders[b] += 1
                out[a][b] = out[b][a] = self._sample(orders)
        return out

    @cached_property
    def lap_phi(self) -> np.ndarray:
        return sum(self.hessian_phi[a][a] for a in range(self.grid.dim))

    @cached_property
    def bilap_phi(self) -> np.ndarray:
        if self.grid.dim == 1:
            return self._sample((4,))
        return self._sample((4, 0)) + 2.0 * self._sample((2, 2)) + self._sample((0, 4))

    def path_values(self, t: float) -> np.ndarray:
        if not self.active:
            return np.zeros(len(self.weights))
        return self.paths.at(t)

    def _combine(self, samples: np.ndarray, t: float) -> np.ndarray:
        if not self.active:
            return np.zeros(self.grid.shape)
        return np.tensordot(self.path_values(t), samples, axes=(0, 0))

    def W(self, t: float) -> np.ndarray:
        """Purely imaginary phase i sum_k phi_k B_k(t)."""
        return 1j * self._combine(self.phi, t)

    def grad_W(self, t: float) -> list[np.ndarray]:
        return [1j * self._combine(g, t) for g in self.grad_phi]

    def hessian_W(self, t: float) -> list[list[np.ndarray]]:
        return [[1j * self._combine(h, t) for h in row] for row in self.hessian_phi]


def coefficients_at(model: NoiseModel, t: float) -> Coefficients:
    """Lower-order coefficients of the gauged equation at time t.

    :raises NoiseRangeError: If t is outside the path range
    """
    grid = model.grid
    grads = model.grad_W(t)
    b = tuple(Field(grid, 2.0 * g) for g in grads)
    c = sum(g**2 for g in grads) + 1j * model._combine(model.lap_phi, t)
    return Coefficients(b=b, c=Field(grid, c))


def gauge(f: Field, model: NoiseModel, t: float, direction: str = "to_u") -> Field:
    """u = e^{-W} X (to_u) or X = e^{W} u (to_X).

    :raises NoiseRangeError: If t is outside the path range
    """
    if direction not in ("to_u", "to_X"):
        raise ValueError(f"direction must be 'to_u' or 'to_X', got {direction!r}")
    if not model.active:
        return f.copy()
    sign = -1.0 if direction == "to_u" else 1.0
    return Field(f.grid, np.exp(sign * model.W(t)) * f.values)


def build_noise_model(
    grid: Grid,
    anchors: np.ndarray,
    nu_star: int,
    paths: NoisePaths,
    envelope: float | None = None,
    amplitude: float = 1.0,
) -> NoiseModel:
    """Weights for every path mode, assembled into a NoiseModel."""
    weights = make_flat_weights(
        anchors, nu_star, grid, envelope=envelope, n_modes=paths.n_modes, amplitude=amplitude
    )
    return NoiseModel(grid=grid, weights=weights, paths=paths, nu_star=nu_star)
