"""Tests for report tables."""

import os

import pytest

from bubbles import config
from bubbles.data import read_csv, write_summary
from bubbles.errors import EmptyReportError
from report.main import main
from report.tables import RunSummary, Table, build_tables, collect, format_table, load_summary, write_tables

CONSTRUCT = {
    "kind": "construct",
    "status": "completed",
    "T_est": 1.0001,
    "omega_est": [1.0, 1.02],
    "rate_fit_residual": 1e-4,
    "mass_drift_per_time": 1e-12,
    "energy_drift_per_time": 3e-9,
    "scal_max": 2e-7,
}
PAIR = {"kind": "pair", "status": "completed", "D_max": 1e-6, "contraction_slack": 1.4, "contraction_passed": True}


def _run_dir(root, name, summary):
    path = os.path.join(str(root), name)
    os.makedirs(path, exist_ok=True)
    if summary is not None:
        write_summary(os.path.join(path, config.SUMMARY_FILE), summary)
    return path


class TestCollect:
    """Tests for load_summary and collect."""

    def test_missing_summary(self, tmp_path):
        """Should flag a directory without summary.txt as incomplete."""
        summary = load_summary(_run_dir(tmp_path, "empty", None))
        assert not summary.complete
        assert summary.name == "empty"
        assert summary.kind == ""

    def test_expands_children(self, tmp_path):
        """Should add the seed directories of a sweep."""
        sweep = _run_dir(tmp_path, "sweep", {"kind": "sweep", "children": ["seed-1", "seed-2"]})
        _run_dir(sweep, "seed-1", CONSTRUCT)
        _run_dir(sweep, "seed-2", CONSTRUCT)
        names = [s.name for s in collect([sweep])]
        assert names == ["sweep", "seed-1", "seed-2"]

    def test_empty(self):
        """Should refuse an empty directory list."""
        with pytest.raises(EmptyReportError):
            collect([])


class TestBuildTables:
    """Tests for build_tables."""

    def test_rows_by_kind(self, tmp_path):
        """Should put constructions and pairs in their own tables."""
        summaries = collect([_run_dir(tmp_path, "a", CONSTRUCT), _run_dir(tmp_path, "p", PAIR)])
        tables = {t.title: t for t in build_tables(summaries)}
        assert [r["run"] for r in tables["Rate fits"].rows] == ["a"]
        assert tables["Rate fits"].rows[0]["omega_est"] == "1.0 1.02"
        assert [r["run"] for r in tables["Pair contraction"].rows] == ["p"]
        assert tables["Pair contraction"].rows[0]["contraction_passed"] == "true"
        assert "Cauchy distances" not in tables
        assert tables["Overlap decay"].incomplete == ["a"]

    def test_incomplete(self, tmp_path):
        """Should list runs without summary or required values."""
        partial = dict(CONSTRUCT)
        del partial["T_est"]
        summaries = collect([_run_dir(tmp_path, "partial", partial), _run_dir(tmp_path, "broken", None)])
        tables = {t.title: t for t in build_tables(summaries)}
        assert tables["Rate fits"].incomplete == ["partial", "broken"]
        assert [r["run"] for r in tables["Conservation"].rows] == ["partial"]

    def test_empty(self):
        """Should refuse an empty summary list."""
        with pytest.raises(EmptyReportError):
            build_tables([])


class TestFormatting:
    """Tests for format_table and write_tables."""

    def test_format(self):
        """Should align columns and list incomplete runs."""
        table = Table("Demo", ["run", "x"], rows=[{"run": "long-name", "x": "1"}], incomplete=["bad"])
        lines = format_table(table).splitlines()
        assert lines[0] == "Demo"
        assert lines[1] == "run        x"
        assert lines[2] == "---------  -"
        assert lines[3] == "long-name  1"
        assert lines[4] == "incomplete: bad"

    def test_write(self, tmp_path):
        """Should write one CSV per table named after its title."""
        summaries = [RunSummary("runs/a", {k: str(v) for k, v in PAIR.items()}, complete=True)]
        paths = write_tables(str(tmp_path / "csv"), build_tables(summaries))
        assert [os.path.basename(p) for p in paths] == ["pair_contraction.csv"]
        rows = read_csv(paths[0])
        assert rows[0]["run"] == "a"
        assert rows[0]["D_max"] == "1e-06"


class TestMain:
    """Tests for main."""

    def test_prints_tables(self, tmp_path, capsys):
        """Should print the tables and write CSVs on request."""
        run_dir = _run_dir(tmp_path, "a", CONSTRUCT)
        assert main([run_dir, "--csv-dir", str(tmp_path / "csv"), "-q"]) == config.EXIT_OK
        out = capsys.readouterr().out
        assert "Rate fits" in out
        assert "Conservation" in out
        assert (tmp_path / "csv" / "rate_fits.csv").exists()

    def test_nothing_to_report(self):
        """Should return the validation code without directories."""
        assert main(["-q"]) == config.EXIT_VALIDATION
