"""Numerical self-checks: ground state, kernel identities, conservation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from bubbles.diagnostics import energy, mass
from bubbles.evolution import StepController, evolve
from bubbles.ground_state import (
    LinearizedOps,
    kernel_report,
    ode_residual,
    reference_profiles,
)
from bubbles.noise import NoiseModel, build_noise_model, drift_paths
from bubbles.spectral import Field, make_grid

logger = logging.getLogger(__name__)

# (extent, points) of the reference grid per dimension; the box check doubles both
REFERENCE_GRIDS = {1: (32.0, 2048), 2: (24.0, 256)}
KERNEL_TOL = {1: 1e-8, 2: 1e-6}
# radial ODE residual is checked inside this radius
RESIDUAL_RADIUS = 10.0


@dataclass
class CheckResult:
    """Outcome of one check.

    :ivar name: What was measured
    :ivar value: Measured value
    :ivar tolerance: Largest acceptable value
    """

    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


def check_ground_state(dim: int, cache_dir: str | None = None) -> list[CheckResult]:
    """Radial ODE residual of Q and, for d=1, the sup error against the closed form."""
    q, _ = reference_profiles(dim, cache_dir)
    r = q.radii
    inner = r <= RESIDUAL_RADIUS
    results = [CheckResult(f"d={dim} radial ODE residual", float(np.max(np.abs(ode_residual(q)[inner]))), 1e-10)]
    if dim == 1:
        exact = 3.0**0.25 / np.sqrt(np.cosh(2.0 * r))
        results.append(CheckResult("d=1 sup |Q - closed form|", float(np.max(np.abs(q.values - exact))), 1e-8))
    return results


def check_kernel(dim: int, extent: float, points: int, cache_dir: str | None = None) -> list[CheckResult]:
    """Six kernel residuals on one grid, plus E(Q)."""
    q, rho = reference_profiles(dim, cache_dir)
    grid = make_grid(dim, extent, points)
    ops = LinearizedOps.build(grid, q, rho)
    tol = KERNEL_TOL[dim]
    label = f"d={dim} L={extent:g}"
    results = [CheckResult(f"{label} {name}", value, tol) for name, value in kernel_report(ops).items()]
    results.append(CheckResult(f"{label} |E(Q)|", abs(energy(ops.q)), 1e-9 if dim == 1 else 1e-6))
    return results


def check_box_sensitivity(dim: int, cache_dir: str | None = None) -> list[CheckResult]:
    """Kernel residuals at L and at 2L with the same spacing."""
    extent, points = REFERENCE_GRIDS[dim]
    return check_kernel(dim, extent, points, cache_dir) + check_kernel(dim, 2.0 * extent, 2 * points, cache_dir)


def _standing_wave_drift(dim: int, model_of, cache_dir: str | None, t_end: float, dt: float):
    extent, points = REFERENCE_GRIDS[dim]
    grid = make_grid(dim, extent, points)
    q, rho = reference_profiles(dim, cache_dir)
    u0 = LinearizedOps.build(grid, q, rho).q
    model = model_of(grid)
    controller = StepController(dt_base=dt, checkpoints=tuple(np.linspace(0.0, t_end, 11)[1:]))
    traj = evolve(u0, 0.0, t_end, model, controller)
    masses = np.array([mass(f) for f in traj.fields])
    energies = np.array([energy(f) for f in traj.fields])
    return (
        float(np.max(np.abs(masses - masses[0])) / t_end),
        float(np.max(np.abs(energies - energies[0])) / t_end),
    )


def check_conservation(dim: int = 1, cache_dir: str | None = None) -> list[CheckResult]:
    """Mass and energy drift of the standing wave e^{it}Q, with and without noise."""
    mass_drift, energy_drift = _standing_wave_drift(dim, NoiseModel.none, cache_dir, 1.0, 1e-4)

    def noisy(grid):
        anchors = np.zeros((1, dim))
        paths = drift_paths([0.5], 1.0, 1e-3)
        return build_noise_model(grid, anchors, 5, paths, amplitude=0.5)

    noisy_mass, _ = _standing_wave_drift(dim, noisy, cache_dir, 1.0, 1e-3)
    return [
        CheckResult(f"d={dim} deterministic mass drift per time", mass_drift, 1e-10),
        CheckResult(f"d={dim} deterministic energy drift per time", energy_drift, 1e-8),
        CheckResult(f"d={dim} noisy mass drift per time", noisy_mass, 1e-8),
    ]


def check_mass_of_Q(dim: int, cache_dir: str | None = None) -> list[CheckResult]:
    """Grid mass of Q against the radial quadrature of the profile."""
    extent, points = REFERENCE_GRIDS[dim]
    q, _ = reference_profiles(dim, cache_dir)
    grid = make_grid(dim, extent, points)
    on_grid = mass(Field(grid, q(grid.r).astype(complex)))
    return [CheckResult(f"d={dim} |mass on grid - radial mass|", abs(on_grid - q.mass()), 1e-6)]


def run_checks(dims: tuple[int, ...] = (1,), conservation: bool = True, cache_dir: str | None = None) -> list[CheckResult]:
    """All checks for the requested dimensions."""
    results: list[CheckResult] = []
    for dim in dims:
        logger.info("Checking d=%d", dim)
        results += check_ground_state(dim, cache_dir)
        results += check_mass_of_Q(dim, cache_dir)
        results += check_box_sensitivity(dim, cache_dir)
        if conservation:
            results += check_conservation(dim, cache_dir)
    return results
