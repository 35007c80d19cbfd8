"""Conservation laws, energy variation, generalized energies and rate fits."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import nnls

from bubbles import config
from bubbles.errors import InsufficientDataError
from bubbles.ground_state import RadialProfile, exponent, smoothstep5
from bubbles.modulation import Decomposition, Localizers
from bubbles.noise import NoiseModel
from bubbles.profiles import sum_profiles
from bubbles.spectral import Field, gradient, laplacian, norms

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Conserved quantities
# ---------------------------------------------------------------------------


def mass(u: Field) -> float:
    return float(u.grid.cell * np.sum(np.abs(u.values) ** 2))


def potential_energy(u: Field) -> float:
    """Integral of (d/(2d+4)) |u|^{2+4/d}."""
    d = u.grid.dim
    return float(d / (2.0 * d + 4.0) * u.grid.cell * np.sum(np.abs(u.values) ** (2.0 + exponent(d))))


def energy(u: Field) -> float:
    """E = 1/2 ||grad u||^2 - (d/(2d+4)) ||u||_{2+4/d}^{2+4/d}."""
    return 0.5 * norms(u, p=()).h1 ** 2 - potential_energy(u)


def momentum(u: Field) -> np.ndarray:
    """Im of the integral of grad u times conj(u), one entry per axis."""
    return np.array([u.grid.cell * np.sum(g.values * np.conj(u.values)).imag for g in gradient(u)])


def localized_mass(u: Field, localizers: Localizers) -> np.ndarray:
    """Integral of |u|^2 Phi_j for every bubble."""
    mod2 = np.abs(u.values) ** 2
    return np.array([u.grid.cell * np.sum(mod2 * phi) for phi in localizers.phi])


def mass_quantization(u: Field, bubbles: int, q_mass: float) -> float:
    """||u||^2 / (K ||Q||^2)."""
    return mass(u) / (bubbles * q_mass)


# ---------------------------------------------------------------------------
# Energy variation under noise
# ---------------------------------------------------------------------------


def energy_rate(u: Field, model: NoiseModel, t: float) -> float:
    """dE/dt from the noise-weight formula (Hessian, bi-Laplacian and gradient terms)."""
    if not model.active:
        return 0.0
    grid = u.grid
    d = grid.dim
    cell = grid.cell
    path = model.path_values(t)
    grads = gradient(u)
    hess = [[np.tensordot(path, h, axes=(0, 0)) for h in row] for row in model.hessian_phi]
    mod2 = np.abs(u.values) ** 2

    hessian_term = sum(
        np.sum(hess[a][b] * grads[a].values * np.conj(grads[b].values)).real
        for a in range(d)
        for b in range(d)
    )
    bilap = np.tensordot(path, model.bilap_phi, axes=(0, 0))
    lap = np.tensordot(path, model.lap_phi, axes=(0, 0))
    drift = [np.tensordot(path, g, axes=(0, 0)) for g in model.grad_phi]
    transport = 0.0
    for a in range(d):
        # grad (g_a^2) = 2 g_a grad g_a, with grad g_a read off the Hessian
        for b in range(d):
            transport += np.sum(2.0 * drift[a] * hess[a][b] * grads[b].values * np.conj(u.values)).imag
    total = (
        -2.0 * hessian_term
        + 0.5 * np.sum(bilap * mod2)
        + 2.0 / (d + 2.0) * np.sum(lap * mod2 ** (1.0 + 2.0 / d))
        - transport
    )
    return float(cell * total)


def energy_rate_compact(u: Field, model: NoiseModel, t: float) -> float:
    """dE/dt as Im of the integral of (b . grad u + c u) conj(Delta u + |u|^{4/d} u)."""
    from bubbles.noise import coefficients_at

    if not model.active:
        return 0.0
    coeffs = coefficients_at(model, t)
    lower = coeffs.c.values * u.values
    for b, g in zip(coeffs.b, gradient(u)):
        lower = lower + b.values * g.values
    upper = laplacian(u).values + np.abs(u.values) ** exponent(u.grid.dim) * u.values
    return float(u.grid.cell * np.sum(lower * np.conj(upper)).imag)


def energy_rate_agreement(
    times: Sequence[float],
    energies: Sequence[float],
    rates: Sequence[float],
    tol: float = config.ENERGY_RATE_TOL,
) -> float:
    """Fraction of interior checkpoints where the rate matches a centered difference of E.

    Centered differences are second order on uneven spacing (numpy.gradient).

    :raises InsufficientDataError: With fewer than three checkpoints
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if times.size < 3:
        raise InsufficientDataError("Energy-rate comparison needs at least 3 checkpoints")
    centered = np.gradient(energies, times)[1:-1]
    error = np.abs(rates[1:-1] - centered)
    ok = error <= tol * np.maximum(np.abs(centered), 1.0)
    logger.debug("Energy rate: max deviation %.3e from centered differences", float(error.max()))
    return float(np.mean(ok))


# ---------------------------------------------------------------------------
# Morawetz weight and localized coercivity weight
# ---------------------------------------------------------------------------


def _bridge_constants() -> tuple[float, float, float]:
    """Exponent n and coefficients of the slope m(s) = s^n (A + B (1 - s)) on the bridge."""
    e2 = np.exp(-2.0)
    g0 = (2.0 - e2) / 2.0
    g1 = e2 / 2.0 - (2.0 - e2) / 4.0
    g2 = -e2 / 2.0 - 2.0 * e2 / 4.0 + 2.0 * (2.0 - e2) / 8.0
    a = -g1
    gap = 1.0 - g0
    x = ((2.0 * a - gap) + np.sqrt((gap - 2.0 * a) ** 2 + 4.0 * gap * g2)) / (2.0 * gap)
    n = x - 1.0
    return float(n), float(a), float(n * a + g2)


@dataclass
class MorawetzWeight:
    """Radial weight chi_A(x) = A^2 psi(|x|/A).

    psi'(r) = r g(r) with g = 1 on [0, 1], g = (2 - e^{-r})/r past 2, and a
    decreasing bridge in between whose slope m keeps psi'/r >= psi''.
    """

    A: float = config.MORAWETZ_A
    n: float = field(init=False)
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self) -> None:
        self.n, self.a, self.b = _bridge_constants()

    def _m(self, s: np.ndarray) -> np.ndarray:
        return s**self.n * (self.a + self.b * (1.0 - s))

    def _dm(self, s: np.ndarray) -> np.ndarray:
        return self.n * s ** (self.n - 1.0) * (self.a + self.b * (1.0 - s)) - self.b * s**self.n

    def g(self, r: np.ndarray) -> np.ndarray:
        """psi'(r) / r."""
        r = np.asarray(r, dtype=float)
        s = np.clip(r - 1.0, 0.0, 1.0)
        bridge = 1.0 - (
            self.a * s ** (self.n + 1.0) / (self.n + 1.0)
            + self.b * (s ** (self.n + 1.0) / (self.n + 1.0) - s ** (self.n + 2.0) / (self.n + 2.0))
        )
        far = (2.0 - np.exp(-r)) / np.maximum(r, 2.0)
        return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, far, bridge))

    def dpsi(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(r, dtype=float) * self.g(r)

    def d2psi(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = np.clip(r - 1.0, 0.0, 1.0)
        bridge = self.g(r) - r * self._m(s)
        return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, np.exp(-r), bridge))

    def d3psi(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = np.clip(r - 1.0, 0.0, 1.0)
        bridge = -2.0 * self._m(s) - r * self._dm(s)
        return np.where(r <= 1.0, 0.0, np.where(r >= 2.0, -np.exp(-r), bridge))

    def grad_chi(self, y: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Gradient of chi_A at y, equal to g(|y|/A) y."""
        r = np.sqrt(sum(ya**2 for ya in y))
        scale = self.g(r / self.A)
        return [scale * ya for ya in y]


def phi_weight(r: np.ndarray, A: float = config.MORAWETZ_A) -> np.ndarray:
    """1 for r <= A, e^{-r/A} for r >= 2A, smooth in between."""
    s = np.asarray(r, dtype=float) / A
    return np.exp(-s * smoothstep5(s - 1.0))


# ---------------------------------------------------------------------------
# Generalized energy and the difference functional
# ---------------------------------------------------------------------------


def generalized_energy(
    dec: Decomposition,
    localizers: Localizers,
    weight: MorawetzWeight,
    q: RadialProfile,
) -> float:
    """I(t) from the remainder of a decomposition.

    Quadratic part of R, nonlinear remainder of F(U + R), and the Morawetz
    correction localized around each bubble.
    """
    r = dec.remainder
    grid = r.grid
    d = grid.dim
    cell = grid.cell
    s = exponent(d)
    big_u = sum_profiles(dec.params, q, grid).values
    u = big_u + r.values
    grads = gradient(r)
    grad_sq = sum(np.abs(g.values) ** 2 for g in grads)
    mod2 = np.abs(r.values) ** 2

    kinetic = 0.5 * cell * np.sum(grad_sq)
    local_mass = sum(
        0.5 / p.lam**2 * cell * np.sum(mod2 * phi) for p, phi in zip(dec.params, localizers.phi)
    )
    f_const = d / (2.0 * d + 4.0)
    nonlinear = cell * np.sum(
        f_const * np.abs(u) ** (2.0 + s)
        - f_const * np.abs(big_u) ** (2.0 + s)
        - (np.abs(big_u) ** s * big_u * np.conj(r.values)).real
    )
    morawetz = 0.0
    for p, phi in zip(dec.params, localizers.phi):
        y = [xa / p.lam for xa in grid.shifted(p.alpha)]
        chi = weight.grad_chi(y)
        flux = sum(c * g.values for c, g in zip(chi, grads)) * np.conj(r.values) * phi
        morawetz += p.gamma / (2.0 * p.lam) * cell * np.sum(flux).imag
    return float(kinetic + local_mass - nonlinear + morawetz)


def difference_functional(w: Field, localizers: Localizers, lams: Sequence[float]) -> float:
    """D = ||grad w||^2 + sum_j lam_j^{-2} ||w Phi_j||^2."""
    grad_sq = norms(w, p=()).h1 ** 2
    mod2 = np.abs(w.values) ** 2
    local = sum(
        w.grid.cell * np.sum(mod2 * phi**2) / lam**2 for phi, lam in zip(localizers.phi, lams)
    )
    return float(grad_sq + local)


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------


@dataclass
class PowerLaw:
    """log(y) = log(prefactor) + exponent log(x)."""

    exponent: float
    prefactor: float
    residual: float


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> PowerLaw | None:
    """Least-squares power law; None if any value is not positive."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(x <= 0):
        return None
    coeffs, res, *_ = np.polyfit(np.log(x), np.log(y), 1, full=True)
    residual = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return PowerLaw(exponent=float(coeffs[0]), prefactor=float(np.exp(coeffs[1])), residual=residual)


@dataclass
class RateFit:
    """Blow-up time and rates fitted from scale trajectories.

    :ivar T_est: Mean fitted blow-up time
    :ivar omega_est: Fitted rate per bubble
    :ivar T_per_bubble: Fitted blow-up time per bubble
    :ivar residual: RMS of the linear fits
    :ivar remainder_law: Power law of ||R|| against T - t, if requested and positive
    """

    T_est: float
    omega_est: np.ndarray
    T_per_bubble: np.ndarray
    residual: float
    remainder_law: PowerLaw | None = None


def fit_window_mask(lam_min: Sequence[float], h: float) -> np.ndarray:
    """Samples whose smallest scale lies in the decade [8h, 80h]."""
    lam_min = np.asarray(lam_min, dtype=float)
    low = config.FIT_FACTOR * h
    return (lam_min >= low) & (lam_min <= config.FIT_DECADE * low)


def fit_blowup_rate(
    times: Sequence[float],
    lams: np.ndarray,
    remainder_norms: Sequence[float] | None = None,
    T: float | None = None,
) -> RateFit:
    """Fit lam_j(t) = omega_j (T - t) per bubble, and ||R|| against T - t.

    :param times: Sample times
    :param lams: Array (n_times, K) of fitted scales
    :param remainder_norms: Optional ||R|| per sample
    :param T: Blow-up time used for the power law (defaults to the fitted one)
    :raises InsufficientDataError: With fewer than the minimum number of samples
    """
    times = np.asarray(times, dtype=float)
    lams = np.asarray(lams, dtype=float).reshape(times.size, -1)
    if times.size < config.MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"Rate fit needs {config.MIN_FIT_POINTS} samples, got {times.size}"
        )
    omegas, t_fits, sq = [], [], []
    for j in range(lams.shape[1]):
        slope, intercept = np.polyfit(times, lams[:, j], 1)
        omega = -slope
        omegas.append(omega)
        t_fits.append(intercept / omega)
        sq.append(np.mean((lams[:, j] - (intercept + slope * times)) ** 2))
    fit = RateFit(
        T_est=float(np.mean(t_fits)),
        omega_est=np.array(omegas),
        T_per_bubble=np.array(t_fits),
        residual=float(np.sqrt(np.mean(sq))),
    )
    if remainder_norms is not None:
        t_ref = fit.T_est if T is None else T
        fit.remainder_law = fit_power_law(t_ref - times, remainder_norms)
    logger.info("Rate fit: T=%.8g, omega=%s", fit.T_est, np.array2string(fit.omega_est, precision=6))
    return fit


@dataclass
class MonotonicityReport:
    """Sign test of dI/dt plus a fitted error budget."""

    fraction: float
    constants: tuple[float, float]

    @property
    def passed(self) -> bool:
        return self.fraction >= config.MONOTONICITY_FRACTION


def monotonicity_check(
    times: Sequence[float],
    values: Sequence[float],
    T: float,
    kappa: float,
    inflate: float = 2.0,
) -> MonotonicityReport:
    """Fraction of samples with dI/dt + C2 (T-t)^{2k} + C3 (T-t)^{2k-1} >= 0.

    C2 and C3 are fitted by nonnegative least squares on the first half of the
    samples, inflated, and then held fixed for all samples.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 4:
        raise InsufficientDataError("Monotonicity check needs at least 4 samples")
    rate = np.gradient(values, times, edge_order=2)
    tau = T - times
    budget = np.column_stack([tau ** (2.0 * kappa), tau ** (2.0 * kappa - 1.0)])
    half = times.size // 2
    deficit = np.maximum(-rate[:half], 0.0)
    constants, _ = nnls(budget[:half], deficit)
    constants = inflate * constants
    ok = rate + budget @ constants >= 0.0
    return MonotonicityReport(fraction=float(np.mean(ok)), constants=(float(constants[0]), float(constants[1])))


def sigma_distance(u: Field, target: Field) -> dict[str, float]:
    """L2, gradient and weighted norms of u - target."""
    diff = norms(u - target, p=())
    return {"l2": diff.l2, "h1": diff.h1, "sigma": diff.sigma}


# ---------------------------------------------------------------------------
# Rows
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsRow:
    """Per-checkpoint diagnostics in a fixed column order."""

    t: float
    mass: float
    energy: float
    momentum: tuple[float, ...]
    localized: tuple[float, ...] = ()
    quantization: float | None = None
    energy_rate: float | None = None
    I: float | None = None
    D: float | None = None
    mod: float | None = None
    scal: tuple[float, ...] = ()
    lams: tuple[float, ...] = ()
    rate_ratios: tuple[float, ...] = ()
    distance_l2: float | None = None
    distance_h1: float | None = None
    distance_sigma: float | None = None

    def flat(self) -> dict[str, float | None]:
        """Columns with vectors expanded to name_1, name_2, ..."""
        out: dict[str, float | None] = {}
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                for i, v in enumerate(value, start=1):
                    out[f"{key}_{i}"] = v
            else:
                out[key] = value
        return out
