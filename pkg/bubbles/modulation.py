"""Localizers, geometric decomposition u = sum U_j + R and the modulation residuals."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from bubbles import config
from bubbles.errors import (
    ConditioningError,
    DecompositionError,
    InsufficientDataError,
    SeparationError,
)
from bubbles.ground_state import RadialProfile, smoothstep5
from bubbles.profiles import (
    BubbleParams,
    BubbleSet,
    _check_resolvable,
    bubble,
    parameter_derivatives,
    sum_profiles,
    varrho_profile,
)
from bubbles.spectral import Field, Grid, gradient, inner, resample, scaling_generator

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Localizers
# ---------------------------------------------------------------------------


@dataclass
class Localizers:
    """Partition of unity adapted to bubbles ordered along v1.

    :ivar phi: One real array per bubble
    :ivar grad: Gradient of each phi, one array per axis
    :ivar sigma: Separation scale
    """

    phi: list[np.ndarray]
    grad: list[list[np.ndarray]]
    sigma: float

    def __len__(self) -> int:
        return len(self.phi)


def _smoothstep5_slope(s: np.ndarray) -> np.ndarray:
    inside = (s > 0) & (s < 1)
    return np.where(inside, 30.0 * s**2 * (1.0 - s) ** 2, 0.0)


def make_localizers(bubbles: BubbleSet, grid: Grid) -> Localizers:
    """Build Phi_j from cutoffs psi_j that drop from 1 to 0 between 4 sigma and 8 sigma past anchor j.

    :raises SeparationError: If sigma is not positive
    """
    k = len(bubbles)
    if k == 0:
        raise SeparationError("Localizers need at least one bubble")
    zero = np.zeros(grid.shape)
    if k == 1:
        return Localizers(phi=[np.ones(grid.shape)], grad=[[zero] * grid.dim], sigma=bubbles.sigma)
    sigma = bubbles.sigma
    if not sigma > 0:
        raise SeparationError(f"Separation must be positive, got {sigma}")
    v1 = bubbles.direction
    p = sum(v * xa for v, xa in zip(v1, grid.coords))
    cutoffs, slopes = [], []
    for pj in bubbles.projections[:-1]:
        s = (p - pj - 4.0 * sigma) / (4.0 * sigma)
        cutoffs.append(1.0 - smoothstep5(s))
        slopes.append(-_smoothstep5_slope(s) / (4.0 * sigma))
    phi = [cutoffs[0]]
    dphi = [slopes[0]]
    for j in range(1, k - 1):
        phi.append(cutoffs[j] - cutoffs[j - 1])
        dphi.append(slopes[j] - slopes[j - 1])
    phi.append(1.0 - cutoffs[-1])
    dphi.append(-slopes[-1])
    grad = [[d * v for v in v1] for d in dphi]
    return Localizers(phi=phi, grad=grad, sigma=sigma)


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


@dataclass
class Decomposition:
    """Result of fitting bubble parameters to a field.

    :ivar params: Fitted parameters per bubble
    :ivar remainder: u minus the sum of bubbles
    :ivar residuals: Orthogonality values, 2d + 3 per bubble
    :ivar converged: Whether the residuals met the tolerance
    :ivar iterations: Newton iterations used
    """

    params: list[BubbleParams]
    remainder: Field
    residuals: np.ndarray
    converged: bool
    iterations: int

    def require(self) -> Decomposition:
        if not self.converged:
            raise DecompositionError(
                f"Decomposition did not converge after {self.iterations} iterations "
                f"(residual {np.max(np.abs(self.residuals)):.3e})"
            )
        return self


@dataclass
class _BubbleTerms:
    """Test fields of the orthogonality conditions for one bubble."""

    params: BubbleParams
    u: Field
    varrho: Field
    shifted: tuple[np.ndarray, ...]
    grad_u: tuple[Field, ...]
    tests: list[tuple[Field, str]] = field(default_factory=list)


def _bubble_terms(params: BubbleParams, q: RadialProfile, rho: RadialProfile, grid: Grid) -> _BubbleTerms:
    u = bubble(params, q, grid)
    terms = _BubbleTerms(
        params=params,
        u=u,
        varrho=varrho_profile(params, rho, grid),
        shifted=grid.shifted(params.alpha),
        grad_u=gradient(u),
    )
    r2 = sum(xa**2 for xa in terms.shifted)
    terms.tests += [(Field(grid, xa * u.values), "re") for xa in terms.shifted]
    terms.tests.append((Field(grid, r2 * u.values), "re"))
    terms.tests += [(g, "im") for g in terms.grad_u]
    terms.tests.append((scaling_generator(u, params.alpha), "im"))
    terms.tests.append((terms.varrho, "im"))
    return terms


def _part(z: complex, which: str) -> float:
    return z.real if which == "re" else z.imag


def orthogonality_residuals(
    terms: Sequence[_BubbleTerms], remainder: Field
) -> np.ndarray:
    return np.array([_part(inner(t, remainder), which) for b in terms for t, which in b.tests])


def _test_derivatives(b: _BubbleTerms, grid: Grid) -> list[list[Field]]:
    """Derivatives of each test field with respect to each own parameter."""
    d = grid.dim
    du = parameter_derivatives(b.params, b.u)
    dv = parameter_derivatives(b.params, b.varrho)
    r2 = sum(xa**2 for xa in b.shifted)
    out = []
    for k, dk in enumerate(du):
        alpha_axis = k - 1 if 1 <= k <= d else None
        grad_dk = gradient(dk)
        row = []
        for i, xa in enumerate(b.shifted):
            val = xa * dk.values
            if alpha_axis == i:
                val = val - b.u.values
            row.append(Field(grid, val))
        val = r2 * dk.values
        if alpha_axis is not None:
            val = val - 2.0 * b.shifted[alpha_axis] * b.u.values
        row.append(Field(grid, val))
        row += list(grad_dk)
        val = 0.5 * d * dk.values + sum(xa * g.values for xa, g in zip(b.shifted, grad_dk))
        if alpha_axis is not None:
            val = val - b.grad_u[alpha_axis].values
        row.append(Field(grid, val))
        row.append(dv[k])
        out.append(row)
    return out


def _jacobian(terms: Sequence[_BubbleTerms], remainder: Field, grid: Grid) -> np.ndarray:
    n = 2 * grid.dim + 3
    size = n * len(terms)
    jac = np.zeros((size, size))
    owner_derivs = [parameter_derivatives(b.params, b.u) for b in terms]
    for j, b in enumerate(terms):
        own = _test_derivatives(b, grid)
        for r, (test, which) in enumerate(b.tests):
            row = j * n + r
            for l, derivs in enumerate(owner_derivs):
                for k, dk in enumerate(derivs):
                    value = -inner(test, dk)
                    if l == j:
                        value += inner(own[k][r], remainder)
                    jac[row, l * n + k] = _part(value, which)
    return jac


def _equilibrated_solve(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    rows = np.linalg.norm(jac, axis=1)
    rows[rows == 0] = 1.0
    scaled = jac / rows[:, None]
    cols = np.linalg.norm(scaled, axis=0)
    cols[cols == 0] = 1.0
    scaled = scaled / cols[None, :]
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > config.JACOBIAN_CONDITION_LIMIT:
        raise ConditioningError("Decomposition Jacobian", float(cond))
    return np.linalg.solve(scaled, rhs / rows) / cols


def decompose(
    u: Field,
    guess: Sequence[BubbleParams],
    q: RadialProfile,
    rho: RadialProfile,
    grid: Grid | None = None,
    max_iter: int = config.NEWTON_MAX_ITER,
) -> Decomposition:
    """Fit parameters so the remainder satisfies the orthogonality conditions.

    Damped Newton on the 2d + 3 conditions per bubble with an analytic Jacobian.

    :param u: Field to decompose
    :param guess: Starting parameters per bubble
    :param q: Ground state profile
    :param rho: rho profile
    :param grid: Grid (defaults to u.grid)
    :param max_iter: Newton iteration cap
    :return: Decomposition; converged is False if the tolerance was not met
    :raises ConditioningError: If the equilibrated Jacobian is near singular
    """
    grid = grid or u.grid
    for p in guess:
        _check_resolvable(p.lam, grid)
    tol = config.ORTHOGONALITY_TOL * np.sqrt(grid.cell * np.sum(np.abs(u.values) ** 2))
    n = 2 * grid.dim + 3

    def evaluate(params):
        terms = [_bubble_terms(p, q, rho, grid) for p in params]
        remainder = u - sum_profiles(params, q, grid)
        return terms, remainder, orthogonality_residuals(terms, remainder)

    params = list(guess)
    terms, remainder, res = evaluate(params)
    iterations = 0
    while np.max(np.abs(res), initial=0.0) > tol and iterations < max_iter:
        iterations += 1
        delta = _equilibrated_solve(_jacobian(terms, remainder, grid), -res)
        current = np.linalg.norm(res)
        accepted = False
        step = 1.0
        for _ in range(config.NEWTON_MAX_HALVINGS + 1):
            vectors = [p.as_vector() + step * delta[j * n : (j + 1) * n] for j, p in enumerate(params)]
            if all(v[0] > 0 for v in vectors):
                trial = [p.with_vector(v) for p, v in zip(params, vectors)]
                try:
                    trial_terms, trial_rem, trial_res = evaluate(trial)
                except ValueError:
                    trial_res = None
                if trial_res is not None and np.linalg.norm(trial_res) < current:
                    params, terms, remainder, res = trial, trial_terms, trial_rem, trial_res
                    accepted = True
                    break
            step *= 0.5
        logger.debug("Newton %d: residual %.3e (step %.3g)", iterations, np.max(np.abs(res)), step)
        if not accepted:
            break
    converged = bool(np.max(np.abs(res), initial=0.0) <= tol)
    if not converged:
        logger.warning("Decomposition unconverged after %d iterations", iterations)
    return Decomposition(params, remainder, res, converged, iterations)


def track(
    fields: Sequence[Field],
    initial: Sequence[BubbleParams],
    q: RadialProfile,
    rho: RadialProfile,
) -> list[Decomposition]:
    """Decompose a sequence of fields, seeding each fit with the previous one."""
    out = []
    guess = list(initial)
    for f in fields:
        dec = decompose(f, guess, q, rho)
        out.append(dec)
        guess = dec.params
    return out


# ---------------------------------------------------------------------------
# Modulation equations
# ---------------------------------------------------------------------------


@dataclass
class ModReport:
    """Modulation residuals along a parameter trajectory.

    :ivar times: Sample times
    :ivar per_bubble: Array (n_times, K)
    :ivar total: Sum over bubbles
    :ivar ratio: total / (T - t)^(kappa + 3), or None without T or flatness order
    """

    times: np.ndarray
    per_bubble: np.ndarray
    total: np.ndarray
    ratio: np.ndarray | None = None


def mod_vector(
    times: Sequence[float],
    params: Sequence[Sequence[BubbleParams]],
    T: float | None = None,
    nu_star: int | None = None,
) -> ModReport:
    """Residuals of the modulation equations by second-order finite differences.

    :param times: Sample times, monotone
    :param params: params[i][j] is bubble j at times[i]
    :param T: Blow-up time for the bound ratio
    :param nu_star: Flatness order, kappa = nu_star - 3
    :raises InsufficientDataError: With fewer than three samples
    """
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise InsufficientDataError(f"Mod needs at least 3 samples, got {times.size}")
    k = len(params[0])
    per_bubble = np.zeros((times.size, k))
    for j in range(k):
        v = np.array([p[j].as_vector() for p in params])
        dv = np.gradient(v, times, axis=0, edge_order=2)
        d = params[0][j].dim
        lam, gamma, theta = v[:, 0], v[:, 1 + 2 * d], v[:, 2 + 2 * d]
        alpha, beta = v[:, 1 : 1 + d], v[:, 1 + d : 1 + 2 * d]
        lam_t, gamma_t, theta_t = dv[:, 0], dv[:, 1 + 2 * d], dv[:, 2 + 2 * d]
        alpha_t, beta_t = dv[:, 1 : 1 + d], dv[:, 1 + d : 1 + 2 * d]
        per_bubble[:, j] = (
            np.abs(lam * lam_t + gamma)
            + np.abs(lam**2 * gamma_t + gamma**2)
            + np.linalg.norm(lam[:, None] * alpha_t - 2.0 * beta, axis=1)
            + np.linalg.norm(lam[:, None] ** 2 * beta_t + gamma[:, None] * beta, axis=1)
            + np.abs(lam**2 * theta_t - 1.0 - np.sum(beta**2, axis=1))
        )
    total = per_bubble.sum(axis=1)
    ratio = None
    if T is not None and nu_star is not None:
        kappa = nu_star - 3
        ratio = total / (T - times) ** (kappa + 3)
    return ModReport(times=times, per_bubble=per_bubble, total=total, ratio=ratio)


# ---------------------------------------------------------------------------
# Renormalized remainders and unstable directions
# ---------------------------------------------------------------------------


def renormalize_remainder(remainder: Field, phi: np.ndarray, params: BubbleParams) -> Field:
    """eps(y) = lam^{d/2} e^{-i theta} (R Phi)(alpha + lam y).

    :raises ResolutionError: If lam is below 4h
    """
    grid = remainder.grid
    _check_resolvable(params.lam, grid)
    local = Field(grid, remainder.values * phi)
    pulled = resample(local, params.alpha, params.lam)
    return Field(grid, params.lam ** (0.5 * grid.dim) * np.exp(-1j * params.theta) * pulled.values)


@dataclass
class ScalReport:
    """Products of eps against the unstable directions and their sum of squares."""

    value: float
    products: dict[str, np.ndarray]


def scal(eps: Field, q: Field, rho: Field) -> ScalReport:
    """Sum of squares of the six real products of eps with Q-directions."""
    grid = eps.grid
    e1, e2 = eps.real, eps.imag
    qv = q.real

    def dot(a, b):
        return grid.cell * float(np.sum(a * b))

    products = {
        "Q": np.array([dot(e1, qv)]),
        "yQ": np.array([dot(e1, xa * qv) for xa in grid.coords]),
        "|y|^2 Q": np.array([dot(e1, grid.r2 * qv)]),
        "grad Q": np.array([dot(e2, g.real) for g in gradient(q)]),
        "Lambda Q": np.array([dot(e2, scaling_generator(q).real)]),
        "rho": np.array([dot(e2, rho.real)]),
    }
    value = float(sum(np.sum(v**2) for v in products.values()))
    return ScalReport(value=value, products=products)


# ---------------------------------------------------------------------------
# Interactions
# ---------------------------------------------------------------------------


def _derivative_modulus(u: Field, order: int) -> np.ndarray:
    if order == 0:
        return np.abs(u.values)
    grads = gradient(u)
    if order == 1:
        return np.sqrt(sum(np.abs(g.values) ** 2 for g in grads))
    if order == 2:
        return np.sqrt(sum(np.abs(h.values) ** 2 for g in grads for h in gradient(g)))
    raise ValueError(f"Derivative order must be 0, 1 or 2, got {order}")


def interaction_overlap(
    params: Sequence[BubbleParams],
    q: RadialProfile,
    grid: Grid,
    m: int = 0,
    n: int = 0,
    order: int = 0,
) -> np.ndarray:
    """Matrix of integrals |x - a_l|^n |d^order U_l| |x - a_j|^m |U_j|, entry (j, l)."""
    fields = [bubble(p, q, grid) for p in params]
    weights = [np.sqrt(sum(xa**2 for xa in grid.shifted(p.alpha))) for p in params]
    mods = [np.abs(f.values) for f in fields]
    ders = [_derivative_modulus(f, order) for f in fields]
    k = len(params)
    out = np.zeros((k, k))
    for j in range(k):
        for l in range(k):
            integrand = weights[l] ** n * ders[l] * weights[j] ** m * mods[j]
            out[j, l] = grid.cell * float(np.sum(integrand))
    return out


@dataclass
class DecayFit:
    """Least-squares fit of log(overlap) = intercept + slope / lam."""

    slope: float
    intercept: float
    r2: float


def fit_overlap_decay(scales: Sequence[float], overlaps: Sequence[float]) -> DecayFit:
    """Fit log(overlap) against 1/lam.

    :raises InsufficientDataError: With fewer than three positive overlaps
    """
    scales = np.asarray(scales, dtype=float)
    overlaps = np.asarray(overlaps, dtype=float)
    keep = overlaps > 0
    if keep.sum() < 3:
        raise InsufficientDataError("Overlap fit needs at least three positive values")
    x, y = 1.0 / scales[keep], np.log(overlaps[keep])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fitted) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(slope=float(slope), intercept=float(intercept), r2=r2)


@dataclass
class OrthogonalityCheck:
    """Localized first-moment products against their Cauchy-Schwarz bound."""

    localized: np.ndarray
    bound: np.ndarray

    def holds(self, slack: float = 10.0) -> bool:
        return bool(np.all(self.localized <= slack * self.bound + 1e-14))


def almost_orthogonality(
    dec: Decomposition, localizers: Localizers, q: RadialProfile
) -> OrthogonalityCheck:
    """Compare |Re int (x - alpha_j) U_j conj(R Phi_j)| with ||(x - alpha_j) U_j (1 - Phi_j)|| ||R||."""
    grid = dec.remainder.grid
    r_norm = np.sqrt(grid.cell * np.sum(np.abs(dec.remainder.values) ** 2))
    localized, bound = [], []
    for p, phi in zip(dec.params, localizers.phi):
        u = bubble(p, q, grid)
        local_r = Field(grid, dec.remainder.values * phi)
        moments = [Field(grid, xa * u.values) for xa in grid.shifted(p.alpha)]
        localized.append(np.linalg.norm([inner(mo, local_r).real for mo in moments]))
        outside = np.sqrt(
            sum(grid.cell * np.sum(np.abs(mo.values * (1.0 - phi)) ** 2) for mo in moments)
        )
        bound.append(outside * r_norm)
    return OrthogonalityCheck(localized=np.array(localized), bound=np.array(bound))


def basin_radius(
    u: Field,
    exact: Sequence[BubbleParams],
    q: RadialProfile,
    rho: RadialProfile,
    ladder: Sequence[float] = config.BASIN_LADDER,
    tol: float = 1e-6,
) -> float:
    """Largest ladder perturbation from which the decomposition recovers the exact parameters."""
    best = 0.0
    for size in ladder:
        guess = []
        for p in exact:
            v = p.as_vector() + size
            v[0] = p.lam * (1.0 + size)
            guess.append(p.with_vector(v))
        try:
            dec = decompose(u, guess, q, rho)
        except (ConditioningError, ValueError) as exc:
            logger.debug("Basin probe %.3g failed: %s", size, exc)
            break
        error = max(np.max(np.abs(a.as_vector() - b.as_vector())) for a, b in zip(dec.params, exact))
        if not dec.converged or error > tol:
            break
        best = size
    logger.info("Decomposition basin radius %.3g", best)
    return best
