import json
from pathlib import Path
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from bicomb.custom_types import CaseStatus, OutputFormat
from bicomb.main import LabOptions, cli
from bicomb.models import SuiteCase, SuiteResult


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def test_space_validate(runner):
    result = runner.invoke(cli, ["space", "validate", "--space", "lsp2"])
    assert result.exit_code == 0
    assert result.output.strip() == "ok: lsp2 with 2 charts"


def test_space_validate_from_a_spec_file(runner, tmp_path):
    spec = tmp_path / "space.json"
    spec.write_text(json.dumps({"family": "lsp3", "params": {}}))
    result = runner.invoke(cli, ["space", "validate", "--spec", str(spec)])
    assert result.exit_code == 0
    assert "ok: lsp3 with 2 charts" in result.output


def test_space_describe(runner):
    result = runner.invoke(cli, ["space", "describe", "--space", "lsp4"])
    assert result.exit_code == 0
    summary = json.loads(result.output)
    assert (summary["charts"], summary["gluings"], summary["maxDegree"]) == (3, 2, 2)
    assert summary["bounded"] is False


def test_unknown_family_exits_2(runner):
    result = runner.invoke(cli, ["space", "validate", "--space", "lsp9"])
    assert result.exit_code == 2
    assert "unknown space family" in result.output


def test_space_and_spec_are_exclusive(runner, tmp_path):
    spec = tmp_path / "space.json"
    spec.write_text("{}")
    result = runner.invoke(cli, ["space", "validate", "--space", "lsp2", "--spec", str(spec)])
    assert result.exit_code == 2
    assert "exactly one of --space or --spec" in result.output


def test_missing_spec_file_is_an_io_error(runner, tmp_path):
    result = runner.invoke(cli, ["space", "validate", "--spec", str(tmp_path / "missing.json")])
    assert result.exit_code == 2
    assert "i/o error" in result.output


def test_distance(runner):
    result = runner.invoke(
        cli,
        ["distance", "--space", "lsp2", "--p", "inf", "--from", "P1:0,1", "--to", "P2:2,1"],
    )
    assert result.exit_code == 0
    assert float(result.output) == pytest.approx(2.0, abs=1e-9)


def test_malformed_point(runner):
    result = runner.invoke(cli, ["distance", "--space", "lsp1", "--from", "P1", "--to", "P1:0,0"])
    assert result.exit_code == 2
    assert "malformed input" in result.output


def test_geodesic_writes_csv(runner, tmp_path):
    out = tmp_path / "path.csv"
    args = ["--out", str(out), "--format", "csv", "geodesic", "--space", "lsp2"]
    result = runner.invoke(cli, args + ["--from", "P1:0,1", "--to", "P2:2,1"])
    assert result.exit_code == 0
    assert result.output.startswith("length ")
    assert float(result.output.split()[1]) == pytest.approx(2.0 * 2.0**0.5, abs=1e-9)
    assert out.read_text().splitlines()[0] == "chart,x0,x1,arclength"


def test_helly_counterexample_exits_1(runner):
    result = runner.invoke(cli, ["helly", "--patch", "gamma45", "--max-radius", "1"])
    assert result.exit_code == 1
    verdict = json.loads(result.output)
    assert verdict["status"] == "counterexample"
    assert verdict["counterexample"]["radii"] == [1, 1, 1]


def test_equivariance_needs_an_isometry(runner):
    result = runner.invoke(
        cli, ["bicombing", "check", "--space", "lsp1", "--axioms", "equivariant", "--samples", "5"]
    )
    assert result.exit_code == 2
    assert "malformed input" in result.output


def test_unknown_axiom_is_a_usage_error(runner):
    result = runner.invoke(cli, ["bicombing", "check", "--space", "lsp1", "--axioms", "smooth"])
    assert result.exit_code == 2


def test_boundary_doc(runner):
    args = ["boundary", "doc", "--space", "lsp1", "--o", "P1:0,0"]
    result = runner.invoke(cli, args + ["--ray1", "dir:1,0", "--ray2", "dir:-1,0"])
    assert result.exit_code == 0
    assert float(result.output) == pytest.approx(2.0, abs=1e-9)


def test_failing_suite_exits_1(runner):
    failed = SuiteResult(
        suite="axioms",
        cases=[SuiteCase(id="lsp1-conical", status=CaseStatus.FAIL, provenance="derived")],
        seed=7,
        elapsed=0.1,
    )
    with patch("bicomb.main.run_suite", return_value=failed) as run:
        result = runner.invoke(cli, ["--seed", "3", "suite", "run", "--name", "axioms", "--quick"])
    run.assert_called_once_with("axioms", 3, True)
    assert result.exit_code == 1
    assert json.loads(result.output)["cases"][0]["status"] == "fail"


def test_geodesic_accepts_global_flags_after_the_command(runner, tmp_path):
    args = ["geodesic", "--space", "lsp4", "--p", "inf", "--from", "P1:0,-1", "--to", "P3:-1,0"]
    with runner.isolated_filesystem(temp_dir=tmp_path):
        result = runner.invoke(cli, args + ["--out", "path.csv"])
        lines = Path("path.csv").read_text().splitlines()
    assert result.exit_code == 0
    assert result.output.startswith("length ")
    assert float(result.output.split()[1]) > 0.0
    assert lines[0] == "chart,x0,x1,arclength"
    assert lines[1].split(",")[:3] == ["P1", "0", "-1"]
    assert lines[-1].split(",")[0] == "P3"


def test_explicit_format_wins_over_the_suffix(runner, tmp_path):
    out = tmp_path / "path.csv"
    args = ["geodesic", "--space", "lsp2", "--from", "P1:0,1", "--to", "P2:2,1"]
    result = runner.invoke(cli, args + ["--out", str(out), "--format", "json"])
    assert result.exit_code == 0
    assert json.loads(out.read_text())["rows"][0]["chart"] == "P1"


@pytest.mark.parametrize(
    "fmt, out, expected",
    [
        (None, None, OutputFormat.JSON),
        (None, Path("path.csv"), OutputFormat.CSV),
        (None, Path("PATH.CSV"), OutputFormat.CSV),
        (None, Path("path.json"), OutputFormat.JSON),
        (OutputFormat.JSON, Path("path.csv"), OutputFormat.JSON),
    ],
)
def test_output_format_follows_the_destination(fmt, out, expected):
    assert LabOptions(tol=1e-9, seed=7, out=out, fmt=fmt).output_format() == expected


def test_trajectory_suite_by_its_published_name(runner):
    passed = SuiteResult(
        suite="lemma5sp-trajectories",
        cases=[SuiteCase(id="lsp4-hausdorff", status=CaseStatus.PASS, provenance="derived")],
        seed=7,
        elapsed=0.1,
    )
    with patch("bicomb.main.run_suite", return_value=passed) as run:
        args = ["suite", "run", "--name", "lemma5sp-trajectories", "--seed", "7"]
        result = runner.invoke(cli, args)
    run.assert_called_once_with("lemma5sp-trajectories", 7, False)
    assert result.exit_code == 0
    assert json.loads(result.output)["suite"] == "lemma5sp-trajectories"
