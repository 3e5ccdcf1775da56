"""Acceptance criteria A1 to A10 at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary so they survive output capture.
"""
import pytest

from mmspace.acceptance import CRITERIA

LINES = []


@pytest.mark.slow
@pytest.mark.parametrize("key", list(CRITERIA))
def test_criterion(key):
    res = CRITERIA[key]()
    line = res.line()
    LINES.append(line)
    print(line)
    assert res.passed, line
