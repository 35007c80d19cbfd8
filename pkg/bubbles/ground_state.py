"""Ground state Q, the auxiliary profile rho, and the linearized operators L+ and L-.

Q solves Delta Q - Q + Q^{1+4/d} = 0 and is found by shooting on Q(0). rho solves
L+ rho = -|x|^2 Q in the radial class. On a spectral grid both profiles are
polished so the discrete equations hold to solver tolerance.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse, special
from scipy.integrate import solve_ivp
from scipy.interpolate import BSpline, make_interp_spline
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, minres, onenormest, splu

from bubbles import config
from bubbles.errors import (
    ConditioningError,
    DegenerateProfileError,
    GridError,
    ShootingError,
)
from bubbles.spectral import Field, Grid, gradient, inner, laplacian, scaling_generator

logger = logging.getLogger(__name__)

_CACHE_HEADER = struct.Struct("<IdI")


def exponent(dim: int) -> float:
    """Nonlinearity power 4/d."""
    return 4.0 / dim


def smoothstep5(s: np.ndarray) -> np.ndarray:
    """Quintic smoothstep clipped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def _tail_shape(dim: int, r: np.ndarray, r_ref: float) -> np.ndarray:
    """Ratio T(r)/T(r_ref) of the decaying free solution."""
    r = np.asarray(r, dtype=float)
    if dim == 1:
        return np.exp(-(r - r_ref))
    return special.k0e(r) / special.k0e(r_ref) * np.exp(-(r - r_ref))


@dataclass
class RadialProfile:
    """Radial samples with a smooth even interpolant.

    :ivar dim: Spatial dimension the profile belongs to
    :ivar radii: Nonnegative increasing mesh, starting at 0
    :ivar values: Samples on the mesh
    :ivar name: Label used in logs
    """

    dim: int
    radii: np.ndarray
    values: np.ndarray
    name: str = "Q"
    _spline: BSpline = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.radii.shape != self.values.shape or self.radii.size < 8:
            raise DegenerateProfileError("Radial profile needs matching radii and values")
        # Mirror through r = 0 so the interpolant is even
        start = 1 if self.radii[0] == 0.0 else 0
        xs = np.concatenate([-self.radii[start:][::-1], self.radii])
        ys = np.concatenate([self.values[start:][::-1], self.values])
        self._spline = make_interp_spline(xs, ys, k=config.PROFILE_SPLINE_DEGREE)

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inside = r <= self.r_max
        out[inside] = self._spline(r[inside])
        out[~inside] = self.values[-1] * _tail_shape(self.dim, r[~inside], self.r_max)
        return out

    def derivative(self, r: np.ndarray, order: int = 1) -> np.ndarray:
        """Derivative of the interpolant on [0, r_max]."""
        return self._spline.derivative(order)(np.asarray(r, dtype=float))

    def decay_rate(self, r_min: float = config.DECAY_FIT_FROM) -> float:
        """Fitted exponential decay rate of |value| beyond r_min."""
        mask = (self.radii >= r_min) & (self.radii <= 0.6 * self.r_max)
        mask &= np.abs(self.values) > 0
        if mask.sum() < 2:
            raise DegenerateProfileError(f"No samples of {self.name} beyond r = {r_min}")
        slope, _ = np.polyfit(self.radii[mask], np.log(np.abs(self.values[mask])), 1)
        return float(-slope)

    def mass(self) -> float:
        """Integral of value^2 over R^d, by radial quadrature."""
        surface = 2.0 if self.dim == 1 else 2.0 * np.pi * self.radii
        return float(np.trapezoid(surface * self.values**2, self.radii))


def ode_residual(profile: RadialProfile) -> np.ndarray:
    """Pointwise residual of Q'' + (d-1)Q'/r - Q + Q^{1+4/d} on the mesh."""
    d = profile.dim
    r = profile.radii
    q = profile.values
    d1 = profile.derivative(r, 1)
    d2 = profile.derivative(r, 2)
    lap = np.empty_like(r)
    pos = r > 0
    lap[pos] = d2[pos] + (d - 1) * d1[pos] / r[pos]
    lap[~pos] = d * d2[~pos]
    return lap - q + np.abs(q) ** exponent(d) * q


# ---------------------------------------------------------------------------
# Shooting for Q
# ---------------------------------------------------------------------------


def _series_start(q0: float, dim: int, r0: float) -> tuple[float, float]:
    p = 1.0 + exponent(dim)
    a = (q0 - q0**p) / (2.0 * dim)
    b = a * (1.0 - p * q0 ** (p - 1.0)) / (4.0 * dim + 8.0)
    return q0 + a * r0**2 + b * r0**4, 2.0 * a * r0 + 4.0 * b * r0**3


def _radial_rhs(dim: int):
    s = exponent(dim)

    def rhs(r, y):
        q, dq = y
        return [dq, q - np.abs(q) ** s * q - (dim - 1) * dq / r]

    return rhs


def _events(level: float | None = None):
    def crosses_zero(r, y):
        return y[0]

    crosses_zero.terminal = True
    crosses_zero.direction = -1

    def turns_up(r, y):
        return y[1]

    turns_up.terminal = True
    turns_up.direction = 1

    events = [crosses_zero, turns_up]
    if level is not None:

        def reaches_level(r, y):
            return y[0] - level

        reaches_level.terminal = True
        reaches_level.direction = -1
        events.append(reaches_level)
    return events


def _integrate(q0: float, dim: int, level: float | None = None, dense: bool = False):
    r0 = config.SHOOT_R0
    y0 = _series_start(q0, dim, r0)
    return solve_ivp(
        _radial_rhs(dim),
        (r0, config.SHOOT_R_MAX),
        y0,
        method="DOP853",
        rtol=config.SHOOT_RTOL,
        atol=config.SHOOT_ATOL,
        events=_events(level),
        dense_output=dense,
    )


def _classify(q0: float, dim: int) -> int:
    """+1 if the trajectory crosses zero (q0 too large), -1 if it turns up."""
    if q0 <= 1.0:
        return -1
    sol = _integrate(q0, dim)
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def shoot_central_value(dim: int, bracket: tuple[float, float] | None = None) -> float:
    """Bisect on Q(0) between undershooting and overshooting trajectories.

    :param dim: Spatial dimension
    :param bracket: Optional (low, high) bracket for Q(0)
    :return: Largest undershooting Q(0) found
    :raises ShootingError: If the bracket does not straddle the ground state
    """
    lo, hi = bracket or config.SHOOT_BRACKETS[dim]
    if _classify(lo, dim) != -1 or _classify(hi, dim) != 1:
        raise ShootingError("Shooting bracket does not straddle the ground state", (lo, hi))
    iterations = 0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        kind = _classify(mid, dim)
        iterations += 1
        if kind > 0:
            hi = mid
        elif kind < 0:
            lo = mid
        else:
            lo = mid
            break
    logger.debug("Shooting d=%d converged to Q(0)=%.16f in %d steps", dim, lo, iterations)
    return lo


def solve_ground_state(
    dim: int,
    points: int = config.PROFILE_POINTS,
    r_max: float = config.PROFILE_R_MAX,
    cache_dir: str | None = None,
) -> RadialProfile:
    """Compute the ground state on a graded radial mesh.

    :param dim: Spatial dimension, 1 or 2
    :param points: Number of mesh points
    :param r_max: Outer radius of the mesh
    :param cache_dir: Directory for the binary profile cache, or None
    :return: RadialProfile of Q
    :raises ShootingError: On bracketing failure or if Q does not decay
    """
    if dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {dim}")
    cache_path = None
    if cache_dir:
        cache_path = _cache_path(cache_dir, "Q", dim, points, r_max)
        if os.path.exists(cache_path):
            logger.debug("Loading cached ground state from %s", cache_path)
            return load_profile(cache_path, name="Q")

    q0 = shoot_central_value(dim)
    level = config.SHOOT_MATCH_LEVEL * q0
    sol = _integrate(q0, dim, level=level, dense=True)
    if not sol.t_events[2].size:
        raise ShootingError(
            f"Ground state does not decay to {level:.1e} before r = {config.SHOOT_R_MAX}",
            (q0, q0),
        )
    r_match = float(sol.t_events[2][0])
    q_match = float(sol.y_events[2][0][0])

    s = np.linspace(0.0, 1.0, points)
    grading = config.PROFILE_GRADING
    radii = r_max * np.sinh(grading * s) / np.sinh(grading)

    values = np.empty_like(radii)
    near = radii < config.SHOOT_R0
    values[near] = [_series_start(q0, dim, r)[0] for r in radii[near]]
    ode = (~near) & (radii <= r_match)
    values[ode] = sol.sol(radii[ode])[0]
    far = radii > r_match
    values[far] = q_match * _tail_shape(dim, radii[far], r_match)

    # Blend the integrated solution into the free tail over the last two units
    blend = (radii > r_match - 2.0) & (radii <= r_match)
    weight = smoothstep5((radii[blend] - (r_match - 2.0)) / 2.0)
    tail = q_match * _tail_shape(dim, radii[blend], r_match)
    values[blend] = (1.0 - weight) * values[blend] + weight * tail

    profile = RadialProfile(dim=dim, radii=radii, values=values, name="Q")
    logger.info(
        "Ground state d=%d: Q(0)=%.12f, match at r=%.2f, decay rate %.4f",
        dim,
        q0,
        r_match,
        profile.decay_rate(),
    )
    if cache_path:
        save_profile(cache_path, profile)
    return profile


# ---------------------------------------------------------------------------
# Radial solve for rho
# ---------------------------------------------------------------------------


def _rho_system(q: RadialProfile, n: int, r_max: float):
    d = q.dim
    dr = r_max / n
    r = dr * np.arange(n)
    pot = (1.0 + exponent(d)) * np.abs(q(r)) ** exponent(d)
    upper = np.empty(n)
    lower = np.empty(n)
    diag = 2.0 / dr**2 + 1.0 - pot
    upper[1:] = -1.0 / dr**2 - (d - 1) / (2.0 * r[1:] * dr)
    lower[1:] = -1.0 / dr**2 + (d - 1) / (2.0 * r[1:] * dr)
    # Origin row: Laplacian of a radial function is d * rho''(0)
    diag[0] = 2.0 * d / dr**2 + 1.0 - pot[0]
    upper[0] = -2.0 * d / dr**2
    lower[0] = 0.0
    rhs = -(r**2) * q(r)
    return r, diag, upper, lower, rhs


def _solve_rho_mesh(q: RadialProfile, n: int, r_max: float, check: bool) -> tuple[np.ndarray, np.ndarray]:
    r, diag, upper, lower, rhs = _rho_system(q, n, r_max)
    banded = np.zeros((3, n))
    banded[0, 1:] = upper[:-1]
    banded[1] = diag
    banded[2, :-1] = lower[1:]
    if check:
        matrix = sparse.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], format="csc")
        lu = splu(matrix)
        inverse = LinearOperator(
            (n, n),
            matvec=lu.solve,
            rmatvec=lambda b: lu.solve(b, trans="T"),
            dtype=float,
        )
        estimate = float(sparse.linalg.norm(matrix, 1) * onenormest(inverse))
        logger.debug("rho system n=%d condition estimate %.3e", n, estimate)
        if estimate > config.RHO_CONDITION_LIMIT:
            raise ConditioningError("Radial L+ solve", estimate)
    return r, solve_banded((1, 1), banded, rhs)


def solve_rho(
    q: RadialProfile,
    points: int = config.RHO_POINTS,
    r_max: float | None = None,
) -> RadialProfile:
    """Solve L+ rho = -|x|^2 Q among radial functions.

    Second-order finite differences on n and 2n points, combined by Richardson
    extrapolation. Dirichlet condition at r_max.

    :param q: Ground state profile
    :param points: Coarse mesh size
    :param r_max: Outer radius (defaults to the Q mesh radius)
    :return: RadialProfile of rho
    :raises ConditioningError: If the radial system is near singular
    """
    r_max = q.r_max if r_max is None else r_max
    r, coarse = _solve_rho_mesh(q, points, r_max, check=True)
    _, fine = _solve_rho_mesh(q, 2 * points, r_max, check=False)
    values = (4.0 * fine[::2] - coarse) / 3.0
    radii = np.append(r, r_max)
    values = np.append(values, 0.0)
    profile = RadialProfile(dim=q.dim, radii=radii, values=values, name="rho")
    logger.info("rho d=%d: rho(0)=%.10f, decay rate %.4f", q.dim, values[0], profile.decay_rate())
    return profile


# ---------------------------------------------------------------------------
# Profile cache
# ---------------------------------------------------------------------------


def _cache_path(cache_dir: str, name: str, dim: int, points: int, r_max: float) -> str:
    key = f"{name}-{dim}-{points}-{r_max!r}-{config.PROFILE_GRADING!r}"
    digest = hashlib.sha1(key.encode()).hexdigest()[:12]
    return os.path.join(
        cache_dir, f"{name.lower()}-d{dim}-{digest}.v{config.PROFILE_CACHE_VERSION}.bin"
    )


def save_profile(path: str, profile: RadialProfile) -> None:
    """Write a profile as header {dim, r_max, n} then radii and values (<f8)."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as f:
        f.write(_CACHE_HEADER.pack(profile.dim, profile.r_max, profile.radii.size))
        f.write(profile.radii.astype("<f8").tobytes())
        f.write(profile.values.astype("<f8").tobytes())


def load_profile(path: str, name: str = "Q") -> RadialProfile:
    """Read a profile written by save_profile."""
    with open(path, "rb") as f:
        dim, _, n = _CACHE_HEADER.unpack(f.read(_CACHE_HEADER.size))
        radii = np.frombuffer(f.read(8 * n), dtype="<f8").astype(float)
        values = np.frombuffer(f.read(8 * n), dtype="<f8").astype(float)
    return RadialProfile(dim=dim, radii=radii, values=values, name=name)


@functools.lru_cache(maxsize=4)
def reference_profiles(dim: int, cache_dir: str | None = None) -> tuple[RadialProfile, RadialProfile]:
    """Q and rho for a dimension, computed once per process."""
    q = solve_ground_state(dim, cache_dir=cache_dir)
    return q, solve_rho(q)


# ---------------------------------------------------------------------------
# Linearized operators on a grid
# ---------------------------------------------------------------------------


def _real_laplacian(grid: Grid, v: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(-grid.k2 * np.fft.fftn(v)).real


def _real_operator(grid: Grid, potential: np.ndarray) -> LinearOperator:
    """-Delta + potential acting on real flattened arrays."""
    size = potential.size

    def matvec(x):
        v = np.reshape(x, grid.shape)
        return (-_real_laplacian(grid, v) + potential * v).ravel()

    return LinearOperator((size, size), matvec=matvec, rmatvec=matvec, dtype=float)


def _helmholtz_preconditioner(grid: Grid) -> LinearOperator:
    size = grid.points**grid.dim
    symbol = 1.0 / (1.0 + grid.k2)

    def matvec(x):
        v = np.reshape(x, grid.shape)
        return np.fft.ifftn(symbol * np.fft.fftn(v)).real.ravel()

    return LinearOperator((size, size), matvec=matvec, dtype=float)


def _refined_solve(grid: Grid, potential: np.ndarray, rhs: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """MINRES with iterative refinement, kept in the symmetric subspace."""
    op = _real_operator(grid, potential)
    pre = _helmholtz_preconditioner(grid)
    x = grid.symmetrize(x0)
    b_norm = np.linalg.norm(rhs)
    for _ in range(4):
        residual = rhs - np.reshape(op.matvec(x.ravel()), grid.shape)
        if np.linalg.norm(residual) <= config.GRID_POLISH_RTOL * max(b_norm, 1e-300):
            break
        delta, info = minres(op, residual.ravel(), M=pre, rtol=1e-13, maxiter=4000)
        if info > 0:
            logger.debug("MINRES stopped after %d iterations", info)
        x = grid.symmetrize(x + np.reshape(delta, grid.shape))
    return x


def polish_ground_state(grid: Grid, q0: np.ndarray) -> np.ndarray:
    """Newton iteration for -Delta q + q - |q|^{4/d} q = 0 on the grid."""
    s = exponent(grid.dim)
    q = grid.symmetrize(np.asarray(q0, dtype=float))
    for it in range(config.GRID_POLISH_NEWTON):
        residual = -_real_laplacian(grid, q) + q - np.abs(q) ** s * q
        size = np.linalg.norm(residual) / np.linalg.norm(q)
        logger.debug("Ground-state polish iteration %d: residual %.3e", it, size)
        if size <= config.GRID_POLISH_RTOL:
            break
        potential = 1.0 - (1.0 + s) * np.abs(q) ** s
        q = q + _refined_solve(grid, potential, -residual, np.zeros_like(q))
    return q


@dataclass
class LinearizedOps:
    """L+ and L- around the ground state sampled on a grid.

    :ivar grid: Grid the operators act on
    :ivar q: Ground state on the grid
    :ivar rho: rho on the grid
    """

    grid: Grid
    q: Field
    rho: Field

    @property
    def potential_plus(self) -> np.ndarray:
        s = exponent(self.grid.dim)
        return (1.0 + s) * np.abs(self.q.values) ** s

    @property
    def potential_minus(self) -> np.ndarray:
        return np.abs(self.q.values) ** exponent(self.grid.dim)

    @classmethod
    def build(
        cls,
        grid: Grid,
        q: RadialProfile,
        rho: RadialProfile,
        polish: bool = True,
    ) -> LinearizedOps:
        """Sample the profiles on a grid, optionally polishing them.

        :param grid: Target grid
        :param q: Ground state profile
        :param rho: rho profile
        :param polish: Solve the discrete equations for Q and rho on the grid
        :return: LinearizedOps instance
        """
        if q.dim != grid.dim:
            raise GridError(f"Profile dimension {q.dim} does not match grid {grid.dim}")
        q_vals = q(grid.r)
        rho_vals = rho(grid.r)
        if polish:
            q_vals = polish_ground_state(grid, q_vals)
            s = exponent(grid.dim)
            potential = 1.0 - (1.0 + s) * np.abs(q_vals) ** s
            rho_vals = _refined_solve(grid, potential, -grid.r2 * q_vals, rho_vals)
        return cls(grid=grid, q=Field(grid, q_vals), rho=Field(grid, rho_vals))


def apply_L(f: Field, which: str, ops: LinearizedOps) -> Field:
    """Apply L+ (which='plus') or L- (which='minus').

    :raises GridError: If f is not on the operators' grid
    """
    if f.grid != ops.grid:
        raise GridError("Field and operators live on different grids")
    if which == "plus":
        potential = ops.potential_plus
    elif which == "minus":
        potential = ops.potential_minus
    else:
        raise ValueError(f"which must be 'plus' or 'minus', got {which!r}")
    return Field(f.grid, -laplacian(f).values + f.values - potential * f.values)


def _l2(f: Field) -> float:
    return float(np.sqrt(f.grid.cell * np.sum(np.abs(f.values) ** 2)))


def kernel_report(
    ops: LinearizedOps,
    q: Field | None = None,
    rho: Field | None = None,
) -> dict[str, float]:
    """L2 residuals of the six generalized-kernel identities.

    :param ops: Operators (their Q defines L+ and L-)
    :param q: Ground state field to test (defaults to ops.q)
    :param rho: rho field to test (defaults to ops.rho)
    :return: Residual per identity
    :raises DegenerateProfileError: If Q vanishes
    """
    q = ops.q if q is None else q
    rho = ops.rho if rho is None else rho
    if _l2(q) == 0.0:
        raise DegenerateProfileError("Kernel identities need a nonzero ground state")
    grid = ops.grid
    grad_q = gradient(q)
    lam_q = scaling_generator(q)
    x2q = Field(grid, grid.r2 * q.values)

    def vector_norm(fields):
        return float(np.sqrt(sum(_l2(f) ** 2 for f in fields)))

    return {
        "L+ grad Q": vector_norm([apply_L(g, "plus", ops) for g in grad_q]),
        "L+ Lambda Q + 2Q": _l2(apply_L(lam_q, "plus", ops) + 2.0 * q),
        "L+ rho + |x|^2 Q": _l2(apply_L(rho, "plus", ops) + x2q),
        "L- Q": _l2(apply_L(q, "minus", ops)),
        "L- xQ + 2 grad Q": vector_norm(
            [
                apply_L(Field(grid, xa * q.values), "minus", ops) + 2.0 * g
                for xa, g in zip(grid.coords, grad_q)
            ]
        ),
        "L- |x|^2 Q + 4 Lambda Q": _l2(apply_L(x2q, "minus", ops) + 4.0 * lam_q),
    }


def self_adjointness_gap(f: Field, g: Field, which: str, ops: LinearizedOps) -> float:
    """|<Lf, g> - <f, Lg>| relative to ||f|| ||g||."""
    gap = inner(apply_L(f, which, ops), g) - inner(f, apply_L(g, which, ops))
    return float(abs(gap) / (_l2(f) * _l2(g)))


# ---------------------------------------------------------------------------
# Sampled coercivity
# ---------------------------------------------------------------------------


@dataclass
class CoercivityReport:
    """Outcome of the sampled coercivity test.

    :ivar constant: Smallest observed ratio of the quadratic form to the H1 norm
    :ivar ratios: Ratio per sample
    """

    constant: float
    ratios: np.ndarray

    @property
    def coercive(self) -> bool:
        return self.constant > 0.0


def _random_smooth(grid: Grid, rng: np.random.Generator, width: float, k_cut: float) -> np.ndarray:
    spectrum = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    spectrum[grid.k2 > k_cut**2] = 0.0
    smooth = np.fft.ifftn(spectrum).real
    smooth /= np.max(np.abs(smooth)) or 1.0
    return smooth * np.exp(-grid.r2 / (2.0 * width**2))


def _project_out(vectors: list[np.ndarray], f: np.ndarray) -> np.ndarray:
    basis = np.stack([v.ravel() for v in vectors], axis=1)
    coeffs, *_ = np.linalg.lstsq(basis, f.ravel(), rcond=None)
    return f - np.reshape(basis @ coeffs, f.shape)


def orthogonality_directions(ops: LinearizedOps) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Directions removed from the real and imaginary parts in the coercivity test."""
    grid = ops.grid
    q = ops.q.real
    real_dirs = [q] + [xa * q for xa in grid.coords] + [grid.r2 * q]
    imag_dirs = [g.real for g in gradient(ops.q)]
    imag_dirs += [scaling_generator(ops.q).real, ops.rho.real]
    return real_dirs, imag_dirs


def sample_coercivity(
    ops: LinearizedOps,
    samples: int = 200,
    seed: int = 0,
    width: float = 2.0,
    k_cut: float = 3.0,
    weight: np.ndarray | None = None,
) -> CoercivityReport:
    """Sample (L+ f1, f1) + (L- f2, f2) over ||f||_H1^2 on constrained random fields.

    With a weight (such as phi_A), gradient terms and the norm are localized by it.
    """
    grid = ops.grid
    rng = np.random.default_rng(seed)
    real_dirs, imag_dirs = orthogonality_directions(ops)
    w = np.ones(grid.shape) if weight is None else weight
    ratios = np.empty(samples)
    for n in range(samples):
        f1 = _project_out(real_dirs, _random_smooth(grid, rng, width, k_cut))
        f2 = _project_out(imag_dirs, _random_smooth(grid, rng, width, k_cut))
        f = Field(grid, f1 + 1j * f2)
        grad_sq = sum(np.abs(g.values) ** 2 for g in gradient(f))
        mod_sq = np.abs(f.values) ** 2
        form = np.sum(w * grad_sq + mod_sq - ops.potential_plus * f1**2 - ops.potential_minus * f2**2)
        norm = np.sum(w * (grad_sq + mod_sq))
        ratios[n] = form / norm
    report = CoercivityReport(constant=float(ratios.min()), ratios=ratios)
    logger.debug("Coercivity over %d samples: c = %.4e", samples, report.constant)
    return report
