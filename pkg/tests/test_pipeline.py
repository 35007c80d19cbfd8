"""End-to-end tests for pipeline.py on small grids."""

import copy
import os
from pathlib import Path

import numpy as np
import pytest

from bubbles import config
from bubbles.data import read_csv, read_summary, read_yaml
from bubbles.errors import ConfigError, MisalignedRunsError
from bubbles.evolution import COMPLETED, DIVERGED, RESOLUTION_STOP
from bubbles.pipeline import RunContext, _status_code, run
from bubbles.runconfig import from_dict

DRIFT = {"modes": 1, "nu_star": 5, "envelope": 2.0, "path": "drift", "rates": [0.5], "dt_noise": 1.0e-3}
BROWNIAN = {"modes": 1, "nu_star": 5, "envelope": 2.0, "seed": 7, "dt_noise": 1.0e-3}
CONFIG_DIR = Path(__file__).resolve().parents[1] / "data" / "configs"
Q_MASS_1D = np.sqrt(3.0) * np.pi / 2.0


def _config(small_config, out_dir, **changes):
    data = copy.deepcopy(small_config)
    data.update(changes)
    data["out_dir"] = str(out_dir)
    return from_dict(data)


class TestStatusCode:
    """Tests for _status_code."""

    def test_codes(self):
        """Should map statuses and fit coverage to exit codes."""
        assert _status_code(COMPLETED, 0) == config.EXIT_OK
        assert _status_code(DIVERGED, 20) == config.EXIT_DIVERGED
        assert _status_code(RESOLUTION_STOP, 3) == config.EXIT_RESOLUTION
        assert _status_code(RESOLUTION_STOP, 12) == config.EXIT_OK


class TestRunContext:
    """Tests for RunContext."""

    def test_deterministic(self, small_config, tmp_path):
        """Should use the inactive noise model without a noise section."""
        ctx = RunContext(_config(small_config, tmp_path))
        assert not ctx.model.active
        assert ctx.scale_hint(0.4) == pytest.approx(0.6)
        assert ctx.controller(0.4).checkpoints[-1] == pytest.approx(0.0)

    def test_seed_override(self, small_config, tmp_path):
        """Should sample paths from the given seed."""
        cfg = _config(small_config, tmp_path, noise=BROWNIAN)
        a = RunContext(cfg, seed=1).model.paths.values
        b = RunContext(cfg, seed=2).model.paths.values
        assert a.shape == b.shape
        assert (a != b).any()

    def test_wide_envelope(self, small_config, tmp_path):
        """Should report weights that reach the box edge as a config error."""
        cfg = _config(small_config, tmp_path, noise=dict(DRIFT, envelope=8.0))
        with pytest.raises(ConfigError) as exc_info:
            RunContext(cfg)
        assert exc_info.value.field == "noise.envelope"


class TestConstruct:
    """Tests for construct runs."""

    def test_run_directory(self, small_config, tmp_path):
        """Should write config, log, checkpoints, diagnostics and summary."""
        out = tmp_path / "run"
        record = run(_config(small_config, out))
        assert record.exit_code == config.EXIT_OK
        assert record.status == COMPLETED
        for name in (config.CONFIG_FILE, config.LOG_FILE, config.SUMMARY_FILE, config.DIAGNOSTICS_FILE):
            assert (out / name).exists(), name
        assert not (out / config.PARAMS_FILE).exists()
        assert len(read_csv(str(out / config.CHECKPOINT_DIR / config.CHECKPOINT_INDEX))) == 5
        summary = read_summary(str(out / config.SUMMARY_FILE))
        assert summary["kind"] == "construct"
        assert summary["status"] == COMPLETED
        assert summary["case"] == "I+II"
        assert float(summary["mass_drift_per_time"]) <= 1e-8
        assert read_yaml(str(out / config.CONFIG_FILE))["kind"] == "construct"
        assert (out / config.CONFIG_FILE).read_text().startswith("# Effective construct config")

    def test_diagnostics_columns(self, small_config, tmp_path):
        """Should write one row per checkpoint with expanded vectors."""
        out = tmp_path / "run"
        run(_config(small_config, out))
        rows = read_csv(str(out / config.DIAGNOSTICS_FILE))
        assert len(rows) == 5
        assert {"t", "mass", "energy", "momentum_1", "localized_1", "quantization"} <= set(rows[0])
        assert float(rows[-1]["t"]) == pytest.approx(0.0)

    def test_decomposed(self, small_config, tmp_path):
        """Should write fitted parameters when decomposition is on."""
        out = tmp_path / "run"
        cfg = _config(
            small_config, out, grid={"extent": 16.0, "points": 512}, diagnostics={"decompose": True}
        )
        run(cfg)
        rows = read_csv(str(out / config.PARAMS_FILE))
        assert len(rows) == 5
        assert float(rows[0]["lam_1"]) == pytest.approx(0.6, rel=1e-6)
        summary = read_summary(str(out / config.SUMMARY_FILE))
        assert summary["decompositions_converged"] == "5"

    def test_noisy(self, small_config, tmp_path):
        """Should write the driving paths and physical-variable checkpoints."""
        out = tmp_path / "run"
        cfg = _config(small_config, out, noise=DRIFT, diagnostics={"decompose": False, "physical_checkpoints": True})
        record = run(cfg)
        assert record.exit_code == config.EXIT_OK
        assert (out / config.PATHS_FILE).exists()
        assert len(os.listdir(out / config.PHYSICAL_DIR)) == 6
        summary = read_summary(str(out / config.SUMMARY_FILE))
        assert float(summary["mass_drift_per_time"]) <= 1e-8

    def test_invalid_config(self, small_config, tmp_path):
        """Should validate before creating the run directory."""
        out = tmp_path / "run"
        with pytest.raises(ConfigError):
            run(_config(small_config, out, workers=0))
        assert not out.exists()


class TestMultiRun:
    """Tests for pair, Cauchy and sweep runs."""

    def test_pair(self, small_config, tmp_path):
        """Should write D and Scal per checkpoint."""
        out = tmp_path / "pair"
        cfg = _config(
            small_config,
            out,
            kind="pair",
            grid={"extent": 16.0, "points": 512},
            pair={"perturbation": "params", "size": 1.0e-3},
        )
        record = run(cfg)
        assert record.exit_code == config.EXIT_OK
        rows = read_csv(str(out / config.PAIR_FILE))
        assert list(rows[0]) == ["t", "D", "scal_1"]
        assert len(rows) == 5
        assert float(record.summary["D_max"]) > 0

    def test_cauchy(self, small_config, tmp_path):
        """Should compare every pair of start times."""
        out = tmp_path / "cauchy"
        record = run(_config(small_config, out, kind="cauchy", t_n=[0.2, 0.3, 0.4]))
        assert record.exit_code == config.EXIT_OK
        rows = read_csv(str(out / config.CAUCHY_FILE))
        assert len(rows) == 3
        assert {float(r["t"]) for r in rows} == {0.0}
        assert read_summary(str(out / config.SUMMARY_FILE))["t_n"] == "0.2 0.3 0.4"

    def test_sweep(self, small_config, tmp_path):
        """Should run one construction per seed in child directories."""
        out = tmp_path / "sweep"
        record = run(_config(small_config, out, kind="sweep", noise=BROWNIAN, sweep={"seeds": [1, 2]}))
        assert record.exit_code == config.EXIT_OK
        assert [os.path.basename(c.run_dir) for c in record.children] == ["seed-1", "seed-2"]
        for child in ("seed-1", "seed-2"):
            child_summary = read_summary(str(out / child / config.SUMMARY_FILE))
            assert child_summary["kind"] == "construct"
        assert read_summary(str(out / config.SUMMARY_FILE))["children"] == "seed-1 seed-2"


class TestReference:
    """Tests for the D column of construct runs."""

    def test_empty_without_reference(self, small_config, tmp_path):
        """Should leave D blank for a run without a reference."""
        out = tmp_path / "run"
        run(_config(small_config, out, diagnostics={"decompose": True}))
        rows = read_csv(str(out / config.DIAGNOSTICS_FILE))
        assert {r["D"] for r in rows} == {""}

    def test_identical_reference(self, small_config, tmp_path):
        """Should give D = 0 against a rerun of the same config."""
        base = tmp_path / "base"
        run(_config(small_config, base))
        out = tmp_path / "again"
        record = run(_config(small_config, out, reference=str(base)))
        rows = read_csv(str(out / config.DIAGNOSTICS_FILE))
        assert [float(r["D"]) for r in rows] == [0.0] * 5
        assert float(record.summary["D_max"]) == 0.0

    def test_noisy_against_deterministic(self, small_config, tmp_path):
        """Should start at D = 0 and separate under noise."""
        base = tmp_path / "base"
        run(_config(small_config, base))
        out = tmp_path / "noisy"
        run(_config(small_config, out, noise=DRIFT, reference=str(base)))
        D = [float(r["D"]) for r in read_csv(str(out / config.DIAGNOSTICS_FILE))]
        assert D[0] == 0.0
        assert D[-1] > 0.0

    def test_misaligned_reference(self, small_config, tmp_path):
        """Should refuse a reference with other checkpoint times."""
        base = tmp_path / "base"
        run(_config(small_config, base))
        controller = dict(small_config["controller"], checkpoints=4)
        with pytest.raises(MisalignedRunsError):
            run(_config(small_config, tmp_path / "run", controller=controller, reference=str(base)))


class TestEnergyRateAlongRun:
    """Tests for the energy-rate formula along a noisy one-bubble run."""

    def test_matches_centered_differences(self, small_config, tmp_path):
        """Should agree with centered differences of E at 95% of interior checkpoints."""
        out = tmp_path / "run"
        cfg = _config(
            small_config,
            out,
            grid={"extent": 16.0, "points": 512},
            noise=DRIFT,
            controller={"dt_base": 1.0e-4, "c_dt": 0.01, "checkpoints": np.linspace(0.4, 0.0, 81).tolist()},
            diagnostics={"decompose": False, "energy_rate": True},
        )
        record = run(cfg)
        assert record.exit_code == config.EXIT_OK
        rows = read_csv(str(out / config.DIAGNOSTICS_FILE))
        assert len(rows) == 81
        assert max(abs(float(r["energy_rate"])) for r in rows) > 1e-8
        assert float(record.summary["energy_rate_agreement"]) >= 0.95

    def test_absent_without_noise(self, small_config, tmp_path):
        """Should not report an agreement for deterministic runs."""
        record = run(_config(small_config, tmp_path / "run", diagnostics={"decompose": False, "energy_rate": True}))
        assert "energy_rate_agreement" not in record.summary


class TestCauchyStatus:
    """Tests for Cauchy sets with members that did not finish."""

    def test_diverged_member(self, small_config, tmp_path):
        """Should return the divergence code and keep the member statuses."""
        out = tmp_path / "cauchy"
        controller = dict(small_config["controller"], u_cap=1.0)
        record = run(_config(small_config, out, kind="cauchy", t_n=[0.2, 0.3, 0.4], controller=controller))
        assert record.exit_code == config.EXIT_DIVERGED
        summary = read_summary(str(out / config.SUMMARY_FILE))
        assert summary["status"] == DIVERGED
        assert summary["member_status"] == "diverged diverged diverged"
        assert not (out / config.CAUCHY_FILE).exists()


def _shipped(name, out_dir, **changes):
    data = read_yaml(str(CONFIG_DIR / name))
    data.update(changes)
    data["out_dir"] = str(out_dir)
    data["profile_cache"] = None
    return from_dict(data)


def _csv_bytes(run_dir):
    return {
        str(path.relative_to(run_dir)): path.read_bytes() for path in sorted(run_dir.rglob("*.csv"))
    }


@pytest.mark.slow
class TestShippedConfigs:
    """Numerical targets of the shipped configs, on shortened runs where possible."""

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.yaml")))
    def test_reruns_are_byte_identical(self, name, tmp_path):
        """Should write byte-identical tables when a config is run twice."""
        data = read_yaml(str(CONFIG_DIR / name))
        t_n = data["t_n"]
        t_end = (min(t_n) if isinstance(t_n, list) else t_n) - 0.02
        controller = dict(data["controller"], checkpoints=3)
        tables = []
        for attempt in ("first", "second"):
            out = tmp_path / attempt
            record = run(_shipped(name, out, t_end=t_end, controller=controller))
            assert record.exit_code == config.EXIT_OK
            tables.append(_csv_bytes(out))
        assert tables[0]
        assert tables[0] == tables[1]

    def test_two_noisy_bubbles(self, tmp_path):
        """Should track both rates, keep one Q mass per bubble and see the overlap decay."""
        out = tmp_path / "run"
        diagnostics = {"decompose": True, "overlaps": True}
        controller = {"dt_base": 1.0e-3, "c_dt": 0.01, "checkpoints": 20}
        record = run(_shipped("d1_k2_noisy.yaml", out, diagnostics=diagnostics, controller=controller))
        assert record.exit_code == config.EXIT_OK
        assert record.status == COMPLETED
        assert record.summary["fit_window_points"] >= config.MIN_FIT_POINTS
        rows = read_csv(str(out / config.DIAGNOSTICS_FILE))
        assert float(rows[0]["t"]) == pytest.approx(0.9)
        assert float(rows[-1]["t"]) == pytest.approx(0.0)
        for row in rows:
            for j in (1, 2):
                assert 0.9 <= float(row[f"rate_ratios_{j}"]) <= 1.1, row["t"]
        for j in (1, 2):
            assert float(rows[-1][f"localized_{j}"]) == pytest.approx(Q_MASS_1D, rel=0.01)
        assert record.summary["overlap_slope"] < 0
        assert record.summary["overlap_r2"] >= 0.95

    def test_deterministic_approximants_agree(self, small_config, tmp_path):
        """Should bring three one-bubble approximants within 1e-6 of each other at t = 0."""
        out = tmp_path / "cauchy"
        cfg = _config(
            small_config,
            out,
            kind="cauchy",
            grid={"extent": 16.0, "points": 1024},
            t_n=[0.5, 0.55, 0.6],
            controller={"dt_base": 5.0e-6, "c_dt": 0.01, "checkpoints": 2},
            workers=3,
        )
        record = run(cfg)
        assert record.exit_code == config.EXIT_OK
        rows = read_csv(str(out / config.CAUCHY_FILE))
        assert len(rows) == 3
        assert max(float(r["l2"]) for r in rows) <= 1e-6

    def test_noisy_distances_decrease(self, tmp_path):
        """Should give strictly decreasing successive distances for two noisy bubbles."""
        out = tmp_path / "cauchy"
        record = run(_shipped("d1_k2_cauchy.yaml", out, t_n=[0.7, 0.8, 0.82]))
        assert record.exit_code == config.EXIT_OK
        assert record.summary["decreasing"] is True
        first, second = record.summary["successive_l2"]
        assert first > second > 0
