import numpy as np

from cellarium.warp import constants
from cellarium.warp.landscape import run_property_suite
from cellarium.warp.landscape.suite import (
    check_gradients,
    check_half_warps,
    check_lemma_converse,
    check_prop_fixed,
    check_prop_random,
    check_taxonomy,
)
from cellarium.warp.models import PropertySuiteReport

Result = PropertySuiteReport.PropertyResult


def test_property_result_ok():
    assert Result(name="a", verdict=constants.Verdict.PASS).ok
    assert not Result(name="a", verdict=constants.Verdict.FAIL).ok
    assert Result(name="a", verdict=constants.Verdict.FAIL, expected_failure=True).ok
    assert not Result(name="a", verdict=constants.Verdict.PASS, expected_failure=True).ok


def test_check_gradients():
    result = check_gradients(np.random.default_rng(0), cases=40)

    assert result.verdict == constants.Verdict.PASS
    assert result.details["checked"] + result.details["skipped"] == 40
    assert result.details["max_relative_error"] < 1e-5


def test_check_lemma_converse_is_a_witness():
    result = check_lemma_converse(resolution=128, seed=0)

    assert result.expected_failure
    assert result.verdict == constants.Verdict.FAIL
    assert result.ok
    assert result.details["farthest_distance"] > 5 * result.details["cell_diagonal"]


def test_check_prop():
    assert check_prop_fixed().verdict == constants.Verdict.PASS

    result = check_prop_random(np.random.default_rng(1), cases=10)
    assert result.verdict == constants.Verdict.PASS
    assert result.details["failures"] == []
    assert result.details["worst_offset_steps"] <= 2


def test_check_taxonomy():
    result = check_taxonomy()
    assert result.verdict == constants.Verdict.PASS, result.details
    assert all(result.details.values())


def test_check_half_warps():
    divergence, anchoring = check_half_warps()

    assert divergence.name == "half_warp_divergence"
    assert divergence.verdict == constants.Verdict.PASS
    assert divergence.details["argmin_t"] == divergence.details["reach"]
    assert anchoring.verdict == constants.Verdict.PASS
    assert anchoring.details["argmin_t"] == 0.0


def test_run_property_suite():
    report = run_property_suite(seed=0, resolution=128)

    assert report.passed, [r.name for r in report.properties if not r.ok]
    assert [r.name for r in report.properties] == [
        "gradient_check",
        "lemma_forward",
        "lemma_converse_witness",
        "prop_fixed",
        "prop_random",
        "landscape_taxonomy",
        "half_warp_divergence",
        "half_warp_anchoring",
    ]
    witnesses = [r.name for r in report.properties if r.expected_failure]
    assert witnesses == ["lemma_converse_witness"]
    # the report is plain JSON
    assert PropertySuiteReport.model_validate_json(report.model_dump_json()) == report
