"""Shared test fixtures."""

import numpy as np
import pytest
import yaml

from bubbles.ground_state import LinearizedOps, reference_profiles
from bubbles.spectral import Field, make_grid


@pytest.fixture
def tmp_yaml(tmp_path):
    """Create a temporary YAML file helper.

    Returns a function that writes data to a temp YAML file and returns the path.
    """

    def _write(data, filename="test.yaml"):
        path = tmp_path / filename
        with open(path, "w") as f:
            yaml.safe_dump(data, f, sort_keys=False)
        return str(path)

    return _write


@pytest.fixture(scope="session")
def profiles_1d():
    """Radial Q and rho in one dimension."""
    return reference_profiles(1)


@pytest.fixture(scope="session")
def profiles_2d():
    """Radial Q and rho in two dimensions (Townes profile)."""
    return reference_profiles(2)


@pytest.fixture(scope="session")
def grid_1d():
    return make_grid(1, 32.0, 2048)


@pytest.fixture(scope="session")
def grid_2d():
    return make_grid(2, 24.0, 256)


@pytest.fixture(scope="session")
def ops_1d(grid_1d, profiles_1d):
    """Polished linearized operators on the reference 1-d grid."""
    q, rho = profiles_1d
    return LinearizedOps.build(grid_1d, q, rho)


@pytest.fixture(scope="session")
def ops_2d(grid_2d, profiles_2d):
    q, rho = profiles_2d
    return LinearizedOps.build(grid_2d, q, rho)


@pytest.fixture
def gaussian_1d(grid_1d):
    """exp(-x^2) on the reference 1-d grid."""
    return Field(grid_1d, np.exp(-grid_1d.r2))


@pytest.fixture
def small_config():
    """Fast construct config: coarse d=1 grid, one bubble, five checkpoints."""
    return {
        "kind": "construct",
        "dim": 1,
        "grid": {"extent": 16.0, "points": 256},
        "T": 1.0,
        "t_n": 0.4,
        "t_end": 0.0,
        "bubbles": [{"omega": 1.0, "anchor": [0.0], "vartheta": 0.0}],
        "controller": {"dt_base": 0.01, "c_dt": 0.01, "checkpoints": 5},
        "diagnostics": {"decompose": False},
        "out_dir": "runs/test",
    }
