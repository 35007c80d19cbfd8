"""Tests for noise.py: flat weights, paths, coefficients and the gauge."""

import numpy as np
import pytest

from bubbles.errors import NoiseRangeError
from bubbles.noise import (
    NoiseModel,
    build_noise_model,
    check_boundary_decay,
    coefficients_at,
    drift_paths,
    flatness_residual,
    flatness_slope,
    gauge,
    make_flat_weights,
    sample_brownian,
)
from bubbles.spectral import Field, laplacian, make_grid

ANCHORS_1D = np.array([[-4.0], [4.0]])


@pytest.fixture(scope="module")
def grid():
    return make_grid(1, 16.0, 512)


@pytest.fixture(scope="module")
def weight(grid):
    (w,) = make_flat_weights(ANCHORS_1D, 5, grid, envelope=2.0)
    return w


@pytest.fixture(scope="module")
def model(grid):
    paths = drift_paths([0.5], 1.0, 1e-3)
    return build_noise_model(grid, ANCHORS_1D, 5, paths, envelope=2.0)


class TestFlatWeights:
    """Tests for make_flat_weights and flatness checks."""

    def test_amplitude(self, grid, weight):
        """Should normalize the grid sup norm to the amplitude."""
        assert np.max(np.abs(weight(*grid.coords))) == pytest.approx(1.0)

    def test_vanishes_to_order(self, weight):
        """Should have every derivative up to order nu* vanish at the anchors."""
        assert flatness_residual(weight, ANCHORS_1D, 5) <= 1e-8

    def test_not_flat_beyond_order(self, weight):
        """Should have a nonzero derivative of order nu* + 1."""
        assert flatness_residual(weight, ANCHORS_1D, 6) > 1e-6

    def test_slope(self, weight):
        """Should grow like r^(nu* + 1) near an anchor."""
        radii = np.geomspace(0.05, 0.2, 8)
        assert flatness_slope(weight, ANCHORS_1D[0], radii) == pytest.approx(6.0, abs=0.3)

    def test_derivative(self, weight):
        """Should match a central difference."""
        x = np.linspace(-6.0, 6.0, 41)
        step = 1e-5
        numeric = (weight(x + step) - weight(x - step)) / (2.0 * step)
        np.testing.assert_allclose(weight.derivative(0)(x), numeric, atol=1e-6)

    def test_several_modes(self, grid):
        """Should give distinct weights with the same flatness."""
        weights = make_flat_weights(ANCHORS_1D, 5, grid, envelope=2.0, n_modes=3)
        assert len(weights) == 3
        assert not np.allclose(weights[0](*grid.coords), weights[2](*grid.coords))
        for w in weights:
            assert flatness_residual(w, ANCHORS_1D, 5) <= 1e-8

    def test_two_dimensions(self):
        """Should vanish at 2-d anchors."""
        grid = make_grid(2, 16.0, 128)
        anchors = np.array([[0.0, 0.0], [3.0, 0.0]])
        (w,) = make_flat_weights(anchors, 5, grid, envelope=2.0)
        assert flatness_residual(w, anchors, 5) <= 1e-8

    def test_boundary_decay(self, grid, weight):
        """Should accept weights that vanish at the edge."""
        assert check_boundary_decay(weight, grid, 5) <= 1e-6

    def test_boundary_decay_failure(self, grid):
        """Should refuse a wide envelope near the edge."""
        with pytest.raises(NoiseRangeError):
            make_flat_weights(np.array([[12.0]]), 5, grid, envelope=8.0)


class TestPaths:
    """Tests for the driving paths."""

    def test_brownian_reproducible(self):
        """Should give identical paths for one seed and start at zero."""
        a = sample_brownian(7, 1.0, 1e-2, 2)
        b = sample_brownian(7, 1.0, 1e-2, 2)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.values.shape == (101, 2)
        np.testing.assert_array_equal(a.values[0], 0.0)

    def test_seeds_differ(self):
        """Should give different paths for different seeds."""
        a = sample_brownian(1, 1.0, 1e-2, 1)
        b = sample_brownian(2, 1.0, 1e-2, 1)
        assert not np.allclose(a.values, b.values)

    def test_drift_interpolation(self):
        """Should evaluate rate * t between mesh points."""
        paths = drift_paths([0.5, -1.0], 1.0, 0.1)
        np.testing.assert_allclose(paths.at(0.55), [0.275, -0.55])

    def test_out_of_range(self):
        """Should refuse times beyond the mesh."""
        paths = drift_paths([1.0], 1.0, 0.1)
        with pytest.raises(NoiseRangeError):
            paths.at(1.5)

    def test_nonpositive_step(self):
        """Should refuse dt_noise <= 0."""
        with pytest.raises(NoiseRangeError):
            sample_brownian(0, 1.0, 0.0, 1)


class TestModel:
    """Tests for NoiseModel, coefficients and the gauge."""

    def test_inactive(self, grid):
        """Should give zero phase and coefficients without noise."""
        model = NoiseModel.none(grid)
        assert not model.active
        coeffs = coefficients_at(model, 0.3)
        assert np.all(coeffs.c.values == 0)
        assert all(np.all(b.values == 0) for b in coeffs.b)

    def test_phase_is_imaginary(self, model):
        """Should give a purely imaginary W."""
        assert np.all(model.W(0.5).real == 0)

    def test_laplacian_matches_spectral(self, grid, model):
        """Should agree with the spectral Laplacian of W."""
        t = 0.5
        spectral = laplacian(Field(grid, model.W(t))).values
        analytic = 1j * model._combine(model.lap_phi, t)
        np.testing.assert_allclose(spectral, analytic, atol=1e-8)

    def test_coefficients(self, model):
        """Should have b = 2 grad W and c = (grad W)^2 + Delta W."""
        t = 0.4
        coeffs = coefficients_at(model, t)
        (grad,) = model.grad_W(t)
        np.testing.assert_allclose(coeffs.b[0].values, 2.0 * grad)
        expected = grad**2 + 1j * model._combine(model.lap_phi, t)
        np.testing.assert_allclose(coeffs.c.values, expected)

    def test_gauge_inverse(self, grid, model):
        """Should undo to_u with to_X and keep the modulus."""
        f = Field(grid, np.exp(-grid.r2) * (1.0 + 0.5j))
        u = gauge(f, model, 0.7, "to_u")
        np.testing.assert_allclose(np.abs(u.values), np.abs(f.values))
        np.testing.assert_allclose(gauge(u, model, 0.7, "to_X").values, f.values, atol=1e-14)

    def test_gauge_direction(self, grid, model):
        """Should refuse unknown directions."""
        with pytest.raises(ValueError):
            gauge(grid.zeros(), model, 0.1, "sideways")
