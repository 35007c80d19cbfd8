"""Periodic grids, spectral derivatives, quadrature and norms."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from bubbles import config
from bubbles.errors import GridError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh on [-L, L)^d.

    :ivar dim: Spatial dimension (1 or 2)
    :ivar extent: Half-width L of the box per axis
    :ivar points: Number of nodes N per axis (power of two)
    """

    dim: int
    extent: float
    points: int

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def cell(self) -> float:
        """Quadrature weight h^d."""
        return self.h**self.dim

    @property
    def resolution_floor(self) -> float:
        return config.RESOLUTION_FACTOR * self.h

    @cached_property
    def axis(self) -> np.ndarray:
        # h * (j - N/2) equals -L + h j and keeps x -> -x an exact index map
        return self.h * (np.arange(self.points) - self.points // 2)

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.h)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis_wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def r2(self) -> np.ndarray:
        return sum(x**2 for x in self.coords)

    @cached_property
    def r(self) -> np.ndarray:
        return np.sqrt(self.r2)

    @cached_property
    def _derivative_multipliers(self) -> tuple[np.ndarray, ...]:
        # Nyquist mode dropped so first derivatives of real data stay real
        out = []
        for k in self.wavenumbers:
            ik = 1j * k
            ik[np.isclose(np.abs(k), np.pi / self.h)] = 0.0
            out.append(ik)
        return tuple(out)

    def shifted(self, center: np.ndarray) -> tuple[np.ndarray, ...]:
        """Coordinates x - center per axis."""
        center = np.broadcast_to(np.asarray(center, dtype=float), (self.dim,))
        return tuple(x - c for x, c in zip(self.coords, center))

    def zeros(self) -> Field:
        return Field(self, np.zeros(self.shape, dtype=complex))

    def reflect(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Return values(x) with x_axis -> -x_axis."""
        return np.roll(np.flip(values, axis=axis), 1, axis=axis)

    def symmetrize(self, values: np.ndarray) -> np.ndarray:
        """Project onto functions even in every axis (and symmetric in x1 <-> x2)."""
        out = values
        for axis in range(self.dim):
            out = 0.5 * (out + self.reflect(out, axis))
        if self.dim == 2:
            out = 0.5 * (out + out.T)
        return out


@dataclass(eq=False)
class Field:
    """Complex samples on a grid.

    :ivar grid: Grid the values live on
    :ivar values: Complex array of shape grid.shape
    :ivar diverged: Set when the values are allowed to be non-finite
    """

    grid: Grid
    values: np.ndarray
    diverged: bool = False

    __array_ufunc__ = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"Field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not self.diverged and not np.all(np.isfinite(self.values)):
            raise GridError("Field has non-finite entries but is not flagged as diverged")

    def _check(self, other: Field) -> None:
        if other.grid != self.grid:
            raise GridError("Fields live on different grids")

    def _operand(self, other):
        if isinstance(other, Field):
            self._check(other)
            return other.values
        return other

    def __add__(self, other) -> Field:
        return Field(self.grid, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other) -> Field:
        return Field(self.grid, self.values - self._operand(other))

    def __rsub__(self, other) -> Field:
        return Field(self.grid, self._operand(other) - self.values)

    def __mul__(self, other) -> Field:
        return Field(self.grid, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> Field:
        return Field(self.grid, self.values / self._operand(other))

    def __neg__(self) -> Field:
        return Field(self.grid, -self.values)

    def conj(self) -> Field:
        return Field(self.grid, np.conj(self.values))

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def copy(self) -> Field:
        return Field(self.grid, self.values.copy(), self.diverged)


@dataclass
class Norms:
    """Norms of a field.

    :ivar l2: L2 norm
    :ivar h1: Seminorm of the gradient, computed spectrally
    :ivar sigma: Weighted norm of |x| f
    :ivar lp: L^p norms keyed by p
    """

    l2: float
    h1: float
    sigma: float
    lp: dict[float, float] = field(default_factory=dict)


def make_grid(dim: int, extent: float, points: int) -> Grid:
    """Build a periodic grid.

    :param dim: Spatial dimension, 1 or 2
    :param extent: Half-width L of the box
    :param points: Nodes per axis, a power of two >= 8
    :return: Grid instance
    :raises GridError: If any parameter is out of range
    """
    if dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {dim}")
    points = int(points)
    if points < config.MIN_POINTS or points & (points - 1):
        raise GridError(f"points must be a power of two >= {config.MIN_POINTS}, got {points}")
    if not extent > 0:
        raise GridError(f"extent must be positive, got {extent}")
    return Grid(dim=dim, extent=float(extent), points=points)


def _fft(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values)


def _ifft(values: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(values)


def laplacian(f: Field) -> Field:
    """Spectral Laplacian."""
    return Field(f.grid, _ifft(-f.grid.k2 * _fft(f.values)))


def gradient(f: Field) -> tuple[Field, ...]:
    """Spectral gradient, one field per axis."""
    spectrum = _fft(f.values)
    return tuple(Field(f.grid, _ifft(ik * spectrum)) for ik in f.grid._derivative_multipliers)


def derivative(f: Field, axis: int, order: int = 1) -> Field:
    """Spectral partial derivative of the given order along one axis."""
    mult = f.grid._derivative_multipliers[axis] if order % 2 else 1j * f.grid.wavenumbers[axis]
    return Field(f.grid, _ifft(mult**order * _fft(f.values)))


def scaling_generator(f: Field, center: np.ndarray | None = None) -> Field:
    """Apply d/2 + (x - center) . grad."""
    grid = f.grid
    center = np.zeros(grid.dim) if center is None else center
    out = 0.5 * grid.dim * f.values
    for xa, ga in zip(grid.shifted(center), gradient(f)):
        out = out + xa * ga.values
    return Field(grid, out)


def inner(f: Field, g: Field) -> complex:
    """Quadrature of f * conj(g) over the box.

    :raises GridError: If the fields live on different grids
    """
    if f.grid != g.grid:
        raise GridError("Inner product of fields on different grids")
    return complex(f.grid.cell * np.vdot(g.values, f.values))


def spectral_inner(f: Field, g: Field) -> complex:
    """Inner product computed from Fourier coefficients (Parseval)."""
    if f.grid != g.grid:
        raise GridError("Inner product of fields on different grids")
    n_total = f.grid.points**f.grid.dim
    return complex(f.grid.cell / n_total * np.vdot(_fft(g.values), _fft(f.values)))


def norms(f: Field, p: tuple[float, ...] = (4.0,)) -> Norms:
    """Compute L2, gradient, weighted and L^p norms."""
    grid = f.grid
    n_total = grid.points**grid.dim
    spectrum = _fft(f.values)
    mod2 = np.abs(f.values) ** 2
    h1_sq = grid.cell / n_total * float(np.sum(grid.k2 * np.abs(spectrum) ** 2))
    lp = {
        float(q): float((grid.cell * np.sum(np.abs(f.values) ** q)) ** (1.0 / q)) for q in p
    }
    return Norms(
        l2=float(np.sqrt(grid.cell * np.sum(mod2))),
        h1=float(np.sqrt(max(h1_sq, 0.0))),
        sigma=float(np.sqrt(grid.cell * np.sum(grid.r2 * mod2))),
        lp=lp,
    )


def resample(f: Field, center: np.ndarray, scale: float, zero_outside: bool = True) -> Field:
    """Evaluate the trigonometric interpolant of f at center + scale * x.

    Points falling outside the box are set to zero unless zero_outside is False,
    in which case the periodic extension is used.

    :param f: Field to sample
    :param center: Shift per axis
    :param scale: Dilation factor
    :return: Field on the same grid
    """
    grid = f.grid
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    k = grid.axis_wavenumbers.copy()
    k[grid.points // 2] = 0.0
    spectrum = _fft(f.values)
    if grid.points % 2 == 0:
        nyquist = [slice(None)] * grid.dim
        for axis in range(grid.dim):
            idx = list(nyquist)
            idx[axis] = grid.points // 2
            spectrum[tuple(idx)] = 0.0
    out = spectrum
    for axis in range(grid.dim):
        targets = center[axis] + scale * grid.axis
        matrix = np.exp(1j * np.outer(targets - grid.axis[0], k)) / grid.points
        if zero_outside:
            inside = (targets >= -grid.extent) & (targets < grid.extent)
            matrix[~inside] = 0.0
        out = np.moveaxis(np.tensordot(matrix, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
    return Field(grid, out)
