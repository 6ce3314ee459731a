"""The thirteen acceptance criteria at full tolerance, one test each."""

import pytest

from nlpotential.acceptance import CRITERIA, run_criterion

RESULTS = {}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = run_criterion(number)
    RESULTS[number] = res
    print(res.line())
    assert res.passed, res.line()
