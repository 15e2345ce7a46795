"""Reproduction criteria at their stated tolerances, one test each.

Every check's pass/fail line is collected and printed in the terminal
summary, so the report appears even when output is captured.
"""
import pytest

from adelim.acceptance import CHECKS

LINES = {}


@pytest.mark.parametrize("check", CHECKS, ids=[c.__name__.removeprefix("check_") for c in CHECKS])
def test_criterion(check):
    result = check()
    LINES[result.number] = result.line()
    print(result.line())
    assert result.passed, result.line()
