"""Tests for the bubbles command line."""

from unittest.mock import patch

import pytest

from bubbles import config
from bubbles.errors import (
    ConfigError,
    ConfigMismatchError,
    DivergenceError,
    MisalignedRunsError,
    ResolutionError,
)
from bubbles.main import RunArgs, exit_code_for, main, parse_args, prepare_config
from bubbles.pipeline import RunRecord

NOISE = {"modes": 1, "nu_star": 5, "envelope": 2.0, "seed": 3, "dt_noise": 1.0e-3}


class TestParseArgs:
    """Tests for parse_args function."""

    def test_defaults(self):
        """Should leave overrides unset."""
        args = parse_args(["construct", "--config", "run.yaml"])
        assert args == RunArgs(command="construct", config="run.yaml")

    def test_overrides(self):
        """Should parse every override."""
        args = parse_args(
            ["sweep", "--config", "s.yaml", "--seed", "7", "--out-dir", "runs/x", "--checkpoints", "9", "--workers", "3"]
        )
        assert args.command == "sweep"
        assert args.seed == 7
        assert args.out_dir == "runs/x"
        assert args.checkpoints == 9
        assert args.workers == 3

    def test_config_required(self):
        """Should require --config."""
        with pytest.raises(SystemExit):
            parse_args(["construct"])

    def test_unknown_command(self):
        """Should reject commands that are not run kinds."""
        with pytest.raises(SystemExit):
            parse_args(["explode", "--config", "run.yaml"])

    def test_invalid_checkpoints(self):
        """Should reject fewer than two checkpoints with the validation code."""
        with pytest.raises(SystemExit) as exc_info:
            parse_args(["construct", "--config", "run.yaml", "--checkpoints", "1"])
        assert exc_info.value.code == config.EXIT_VALIDATION

    def test_invalid_workers(self):
        """Should reject zero workers with the validation code."""
        with pytest.raises(SystemExit) as exc_info:
            parse_args(["pair", "--config", "run.yaml", "--workers", "0"])
        assert exc_info.value.code == config.EXIT_VALIDATION


class TestPrepareConfig:
    """Tests for prepare_config."""

    def test_applies_overrides(self, tmp_yaml, small_config):
        """Should apply out_dir, checkpoints and workers."""
        path = tmp_yaml(small_config)
        cfg = prepare_config(RunArgs("construct", path, out_dir="elsewhere", checkpoints=7, workers=2))
        assert cfg.out_dir == "elsewhere"
        assert cfg.controller.checkpoints == 7
        assert cfg.workers == 2

    def test_seed_override(self, tmp_yaml, small_config):
        """Should replace the noise seed."""
        path = tmp_yaml(dict(small_config, noise=NOISE))
        assert prepare_config(RunArgs("construct", path, seed=11)).noise.seed == 11

    def test_kind_mismatch(self, tmp_yaml, small_config):
        """Should refuse a config of another kind."""
        path = tmp_yaml(small_config)
        with pytest.raises(ConfigError) as exc_info:
            prepare_config(RunArgs("pair", path))
        assert exc_info.value.field == "kind"

    def test_seed_without_noise(self, tmp_yaml, small_config):
        """Should refuse --seed for deterministic configs."""
        path = tmp_yaml(small_config)
        with pytest.raises(ConfigError) as exc_info:
            prepare_config(RunArgs("construct", path, seed=1))
        assert exc_info.value.field == "noise.seed"


class TestExitCodeFor:
    """Tests for exit_code_for."""

    @pytest.mark.parametrize(
        "exc,code",
        [
            (ConfigError("T", "bad"), config.EXIT_VALIDATION),
            (ConfigMismatchError("seeds differ"), config.EXIT_VALIDATION),
            (MisalignedRunsError("times differ"), config.EXIT_VALIDATION),
            (DivergenceError("overflow"), config.EXIT_DIVERGED),
            (ResolutionError(1e-3, 1e-2), config.EXIT_RESOLUTION),
        ],
    )
    def test_codes(self, exc, code):
        """Should map known errors to exit codes."""
        assert exit_code_for(exc) == code

    def test_unknown_error(self):
        """Should re-raise errors it does not know."""
        with pytest.raises(KeyError):
            exit_code_for(KeyError("x"))


class TestMain:
    """Tests for main."""

    def test_runs_pipeline(self, tmp_yaml, small_config, tmp_path):
        """Should return the run's exit code."""
        path = tmp_yaml(small_config)
        record = RunRecord(str(tmp_path), "completed", config.EXIT_OK)
        with patch("bubbles.pipeline.run", return_value=record) as mock_run:
            assert main(["construct", "--config", path, "--out-dir", str(tmp_path)]) == config.EXIT_OK
        assert mock_run.call_args[0][0].out_dir == str(tmp_path)

    def test_propagates_run_status(self, tmp_yaml, small_config, tmp_path):
        """Should return the divergence code from the record."""
        path = tmp_yaml(small_config)
        record = RunRecord(str(tmp_path), "diverged", config.EXIT_DIVERGED)
        with patch("bubbles.pipeline.run", return_value=record):
            assert main(["construct", "--config", path]) == config.EXIT_DIVERGED

    def test_run_error(self, tmp_yaml, small_config):
        """Should turn a resolution error into its exit code."""
        path = tmp_yaml(small_config)
        with patch("bubbles.pipeline.run", side_effect=ResolutionError(1e-3, 1e-2)):
            assert main(["construct", "--config", path]) == config.EXIT_RESOLUTION

    def test_missing_file(self, tmp_path):
        """Should return the validation code for an unreadable config."""
        assert main(["construct", "--config", str(tmp_path / "nope.yaml")]) == config.EXIT_VALIDATION

    def test_malformed_yaml(self, tmp_path):
        """Should return the validation code for broken YAML."""
        path = tmp_path / "bad.yaml"
        path.write_text("kind: [construct\n")
        assert main(["construct", "--config", str(path)]) == config.EXIT_VALIDATION

    def test_invalid_config(self, tmp_yaml, small_config):
        """Should return the validation code for a failing config."""
        path = tmp_yaml(dict(small_config, workers=0))
        assert main(["construct", "--config", path]) == config.EXIT_VALIDATION

    def test_forwards_report(self):
        """Should hand report arguments to the report CLI."""
        with patch("report.main.main", return_value=0) as mock_report:
            assert main(["report", "runs/a"]) == 0
        mock_report.assert_called_once_with(["runs/a"])

    def test_forwards_selftest(self):
        """Should hand selftest arguments to the selftest CLI."""
        with patch("selftest.main.main", return_value=1) as mock_selftest:
            assert main(["selftest", "--dim", "1"]) == 1
        mock_selftest.assert_called_once_with(["--dim", "1"])

