"""Tests for the selftest checks and CLI."""

import math
from unittest.mock import patch

import pytest

from selftest.checks import CheckResult, check_ground_state, check_mass_of_Q
from selftest.main import main


class TestCheckResult:
    """Tests for CheckResult."""

    @pytest.mark.parametrize(
        "value,passed",
        [(1e-12, True), (1e-8, True), (2e-8, False), (math.nan, False), (math.inf, False)],
    )
    def test_passed(self, value, passed):
        """Should pass finite values within tolerance only."""
        assert CheckResult("x", value, 1e-8).passed is passed


class TestChecks:
    """Tests for the individual checks in one dimension."""

    def test_ground_state(self, profiles_1d):
        """Should match the closed-form d=1 profile."""
        results = check_ground_state(1)
        assert len(results) == 2
        assert all(r.passed for r in results), results

    def test_mass_of_q(self, profiles_1d):
        """Should agree with the radial mass on the reference grid."""
        (result,) = check_mass_of_Q(1)
        assert result.passed, result


class TestMain:
    """Tests for main."""

    def test_all_passed(self):
        """Should return 0 when every check passes."""
        results = [CheckResult("a", 0.0, 1.0), CheckResult("b", 0.5, 1.0)]
        with patch("selftest.main.run_checks", return_value=results) as mock_checks:
            assert main(["-q"]) == 0
        mock_checks.assert_called_once_with((1,), conservation=True, cache_dir=None)

    def test_failure(self):
        """Should return 1 when a check fails."""
        results = [CheckResult("a", 0.0, 1.0), CheckResult("b", 2.0, 1.0)]
        with patch("selftest.main.run_checks", return_value=results):
            assert main(["-q"]) == 1

    def test_arguments(self):
        """Should pass dimensions, the conservation switch and the cache."""
        with patch("selftest.main.run_checks", return_value=[]) as mock_checks:
            assert main(["--dim", "2", "--dim", "1", "--skip-conservation", "--profile-cache", "c", "-q"]) == 0
        mock_checks.assert_called_once_with((1, 2), conservation=False, cache_dir="c")

    def test_invalid_dimension(self):
        """Should reject dimensions other than 1 and 2."""
        with pytest.raises(SystemExit):
            main(["--dim", "3"])
