from unittest.mock import MagicMock, patch

import pytest

from bicomb.custom_types import CaseStatus
from bicomb.exceptions import MalformedInputError
from bicomb.models import SuiteCase
from bicomb.suite_runner import SUITE_GROUPS, SUITES, _at_most, _count, run_suite, suite_names


def _case(case_id, status=CaseStatus.PASS):
    return SuiteCase(id=case_id, status=status, provenance="derived")


def test_unknown_suite():
    with pytest.raises(MalformedInputError, match="unknown suite 'nope'"):
        run_suite("nope")


def test_quick_runs_a_tenth():
    assert _count(200, quick=False) == 200
    assert _count(200, quick=True) == 20
    assert _count(5, quick=True) == 1


def test_at_most():
    assert _at_most("a", 1e-8, 1e-7, "derived").status == CaseStatus.PASS
    failed = _at_most("b", 1e-3, 1e-7, "derived", detail="worst pair")
    assert failed.status == CaseStatus.FAIL
    assert (failed.metric, failed.tolerance, failed.detail) == (1e-3, 1e-7, "worst pair")


def test_single_suite_passes_seed_and_quick():
    suite = MagicMock(return_value=[_case("x"), _case("y", CaseStatus.INFO)])
    with patch.dict(SUITES, {"demo": suite}, clear=True):
        result = run_suite("demo", seed=11, quick=True)
    suite.assert_called_once_with(11, True)
    assert result.suite == "demo"
    assert result.seed == 11
    assert result.passed
    assert [case.id for case in result.cases] == ["x", "y"]


def test_all_prefixes_case_ids():
    suites = {
        "first": MagicMock(return_value=[_case("a")]),
        "second": MagicMock(return_value=[_case("b", CaseStatus.FAIL)]),
    }
    with patch.dict(SUITES, suites, clear=True):
        result = run_suite("all", seed=3)
    assert [case.id for case in result.cases] == ["first/a", "second/b"]
    assert not result.passed
    assert result.elapsed >= 0


def test_bundle_runs_its_members_with_prefixed_ids():
    suites = {
        "trajectory-equality": MagicMock(return_value=[_case("lsp1-hausdorff")]),
        "fxi-divergence": MagicMock(return_value=[_case("hinge-height")]),
        "axioms": MagicMock(return_value=[_case("lsp1-convex")]),
    }
    with patch.dict(SUITES, suites, clear=True):
        result = run_suite("lemma5sp-trajectories", seed=7)
    assert [case.id for case in result.cases] == [
        "trajectory-equality/lsp1-hausdorff",
        "fxi-divergence/hinge-height",
    ]
    suites["trajectory-equality"].assert_called_once_with(7, False)
    suites["axioms"].assert_not_called()
    assert result.suite == "lemma5sp-trajectories"


def test_bundles_name_registered_suites():
    for members in SUITE_GROUPS.values():
        assert set(members) <= set(SUITES)
    assert "lemma5sp-trajectories" in suite_names()
    assert suite_names()[-1] == "all"


def test_all_skips_bundles():
    suites = {"trajectory-equality": MagicMock(return_value=[_case("a")])}
    groups = {"bundle": ("trajectory-equality",)}
    with patch.dict(SUITES, suites, clear=True), patch.dict(SUITE_GROUPS, groups, clear=True):
        result = run_suite("all")
    assert [case.id for case in result.cases] == ["trajectory-equality/a"]
