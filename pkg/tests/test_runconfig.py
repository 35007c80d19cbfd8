"""Tests for runconfig.py: parsing, validation and case classification."""

import copy

import pytest

from bubbles import config
from bubbles.data import write_yaml
from bubbles.errors import ConfigError
from bubbles.runconfig import (
    classify_case,
    from_dict,
    load_config,
    parse_config,
    validate,
)


def _with(data, **changes):
    out = copy.deepcopy(data)
    for key, value in changes.items():
        section, _, name = key.partition("__")
        if name:
            out.setdefault(section, {})[name] = value
        else:
            out[section] = value
    return out


NOISE = {"modes": 1, "nu_star": 5, "envelope": 2.0, "seed": 3, "dt_noise": 1.0e-3}


class TestParsing:
    """Tests for from_dict and parse_config."""

    def test_small_config(self, small_config):
        """Should build a valid construct config with defaults filled in."""
        cfg = from_dict(small_config)
        validate(cfg)
        assert cfg.kind == "construct"
        assert cfg.grid.points == 256
        assert cfg.noise is None
        assert cfg.diagnostics.decompose is False
        assert cfg.workers == 1

    def test_missing_field(self, small_config):
        """Should name the missing field."""
        data = copy.deepcopy(small_config)
        del data["T"]
        with pytest.raises(ConfigError) as exc_info:
            from_dict(data)
        assert exc_info.value.field == "T"

    def test_unknown_top_level_field(self, small_config):
        """Should refuse fields it does not know."""
        with pytest.raises(ConfigError) as exc_info:
            from_dict(_with(small_config, colour="blue"))
        assert exc_info.value.field == "colour"

    def test_unknown_nested_field(self, small_config):
        """Should name the section of an unknown nested field."""
        with pytest.raises(ConfigError) as exc_info:
            from_dict(_with(small_config, grid__spacing=0.1))
        assert exc_info.value.field == "grid.spacing"

    def test_exponent_strings(self):
        """Should read 1e-3 as a number although YAML keeps it a string."""
        text = """
kind: construct
dim: 1
grid: {extent: 16.0, points: 256}
T: 1.0
t_n: 0.4
t_end: 0.0
bubbles:
  - {omega: 1.0, anchor: [0.0]}
controller:
  dt_base: 1e-3
"""
        cfg = parse_config(text)
        assert cfg.controller.dt_base == pytest.approx(1e-3)

    def test_exponent_strings_in_lists(self):
        """Should read exponent literals inside anchors and checkpoint lists."""
        text = """
kind: construct
dim: 1
grid: {extent: 16.0, points: 256}
T: 1.0
t_n: 0.4
t_end: 0.0
bubbles:
  - {omega: 1.0, anchor: [5e-1]}
controller:
  checkpoints: [0.4, 2e-1, 1e-1, 0.0]
"""
        cfg = parse_config(text)
        assert cfg.bubbles[0].anchor == [0.5]
        assert cfg.controller.checkpoints == [0.4, 0.2, 0.1, 0.0]
        validate(cfg)

    def test_bad_list_number(self, small_config):
        """Should name the list entry that is not a number."""
        data = _with(small_config, bubbles=[{"omega": 1.0, "anchor": ["left"]}])
        with pytest.raises(ConfigError) as exc_info:
            from_dict(data)
        assert exc_info.value.field == "bubbles[0].anchor[0]"

    def test_bad_number(self, small_config):
        """Should refuse values that are not numbers."""
        with pytest.raises(ConfigError) as exc_info:
            from_dict(_with(small_config, T="soon"))
        assert exc_info.value.field == "T"

    def test_written_round_trip(self, tmp_path, small_config):
        """Should load a written config back to the same config."""
        cfg = from_dict(_with(small_config, noise=NOISE))
        path = str(tmp_path / "config.yaml")
        write_yaml(path, cfg.to_dict(), header="# effective config\n")
        assert load_config(path).to_dict() == cfg.to_dict()

    def test_load_config(self, tmp_yaml, small_config):
        """Should read and validate a file."""
        cfg = load_config(tmp_yaml(small_config))
        assert cfg.T == 1.0

    def test_load_config_validates(self, tmp_yaml, small_config):
        """Should raise for an invalid file."""
        with pytest.raises(ConfigError):
            load_config(tmp_yaml(_with(small_config, workers=0)))


class TestValidation:
    """Tests for validate."""

    @pytest.mark.parametrize(
        "changes,field",
        [
            ({"kind": "explode"}, "kind"),
            ({"grid__points": 100}, "grid"),
            ({"bubbles": []}, "bubbles"),
            ({"bubbles": [{"omega": -1.0, "anchor": [0.0]}]}, "bubbles[0].omega"),
            ({"bubbles": [{"omega": 1.0, "anchor": [0.0, 1.0]}]}, "bubbles[0].anchor"),
            ({"bubbles": [{"omega": 1.0, "anchor": [14.0]}]}, "bubbles[0].anchor"),
            ({"t_n": 1.2}, "t_n"),
            ({"t_n": 0.9}, "t_n"),
            ({"t_n": [0.2, 0.3, 0.4]}, "t_n"),
            ({"t_end": -0.1}, "t_end"),
            ({"controller__c_dt": 0.6}, "controller.c_dt"),
            ({"controller__checkpoints": 1}, "controller.checkpoints"),
            ({"noise": dict(NOISE, path="levy")}, "noise.path"),
            ({"noise": dict(NOISE, path="drift", rates=[])}, "noise.rates"),
            ({"noise": dict(NOISE, modes=0)}, "noise.modes"),
            ({"workers": 0}, "workers"),
        ],
    )
    def test_rejects(self, small_config, changes, field):
        """Should name the offending field."""
        cfg = from_dict(_with(small_config, **changes))
        with pytest.raises(ConfigError) as exc_info:
            validate(cfg)
        assert exc_info.value.field == field

    def test_coinciding_anchors(self, small_config):
        """Should refuse two bubbles at the same point."""
        bubbles = [{"omega": 1.0, "anchor": [1.0]}, {"omega": 2.0, "anchor": [1.0]}]
        with pytest.raises(ConfigError) as exc_info:
            validate(from_dict(_with(small_config, bubbles=bubbles)))
        assert exc_info.value.field == "bubbles"

    def test_cauchy_needs_ascending_list(self, small_config):
        """Should accept three ascending start times and refuse a descending list."""
        good = from_dict(_with(small_config, kind="cauchy", t_n=[0.2, 0.3, 0.4]))
        validate(good)
        bad = from_dict(_with(small_config, kind="cauchy", t_n=[0.4, 0.3, 0.2]))
        with pytest.raises(ConfigError):
            validate(bad)

    def test_pair_needs_section(self, small_config):
        """Should require the pair section for pair runs."""
        with pytest.raises(ConfigError) as exc_info:
            validate(from_dict(_with(small_config, kind="pair")))
        assert exc_info.value.field == "pair"

    def test_sweep_needs_noise(self, small_config):
        """Should refuse a sweep without noise."""
        with pytest.raises(ConfigError) as exc_info:
            validate(from_dict(_with(small_config, kind="sweep", sweep={"seeds": [1, 2]})))
        assert exc_info.value.field == "noise"

    def test_sweep_distinct_seeds(self, small_config):
        """Should refuse repeated seeds."""
        data = _with(small_config, kind="sweep", sweep={"seeds": [1, 1]}, noise=NOISE)
        with pytest.raises(ConfigError) as exc_info:
            validate(from_dict(data))
        assert exc_info.value.field == "sweep.seeds"

    def test_reference_needs_checkpoints(self, small_config, tmp_path):
        """Should refuse a reference directory without a checkpoint index."""
        cfg = from_dict(_with(small_config, reference=str(tmp_path / "missing")))
        with pytest.raises(ConfigError) as exc_info:
            validate(cfg)
        assert exc_info.value.field == "reference"

    def test_reference_construct_only(self, small_config, tmp_path):
        """Should refuse a reference for other run kinds."""
        data = _with(small_config, kind="pair", pair={"size": 1e-3}, reference=str(tmp_path))
        with pytest.raises(ConfigError) as exc_info:
            validate(from_dict(data))
        assert exc_info.value.field == "reference"

    def test_reference_accepted(self, small_config, tmp_path):
        """Should accept a directory holding a checkpoint index."""
        (tmp_path / config.CHECKPOINT_DIR).mkdir()
        (tmp_path / config.CHECKPOINT_DIR / config.CHECKPOINT_INDEX).write_text("index,t,file\n")
        validate(from_dict(_with(small_config, reference=str(tmp_path))))


class TestRunConfig:
    """Tests for RunConfig helpers."""

    def test_checkpoint_times(self, small_config):
        """Should space checkpoints geometrically in T - t from t_n to t_end."""
        cfg = from_dict(small_config)
        times = cfg.checkpoint_times(0.4)
        assert len(times) == 5
        assert times[0] == pytest.approx(0.4)
        assert times[-1] == pytest.approx(0.0)
        assert all(b < a for a, b in zip(times, times[1:]))

    def test_explicit_checkpoints(self, small_config):
        """Should pass explicit times through."""
        cfg = from_dict(_with(small_config, controller__checkpoints=[0.3, 0.1]))
        assert cfg.checkpoint_times(0.4) == (0.3, 0.1)

    def test_with_overrides(self, small_config):
        """Should return a changed copy and leave the original alone."""
        cfg = from_dict(_with(small_config, noise=NOISE))
        out = cfg.with_overrides(seed=42, out_dir="elsewhere", checkpoints=7)
        assert out.noise.seed == 42
        assert out.out_dir == "elsewhere"
        assert out.controller.checkpoints == 7
        assert cfg.noise.seed == 3
        assert cfg.controller.checkpoints == 5


class TestClassifyCase:
    """Tests for classify_case."""

    @pytest.mark.parametrize(
        "omegas,anchors,expected",
        [
            ((1.0, 1.05), (-10.0, 10.0), "I+II"),
            ((1.0, 1.05), (-2.0, 2.0), "I"),
            ((1.0, 2.0), (-10.0, 10.0), "II"),
            ((1.0, 2.0), (-2.0, 2.0), "none"),
        ],
    )
    def test_cases(self, small_config, omegas, anchors, expected):
        """Should classify by rate spread and anchor distance."""
        bubbles = [{"omega": w, "anchor": [a]} for w, a in zip(omegas, anchors)]
        assert classify_case(from_dict(_with(small_config, bubbles=bubbles))) == expected
