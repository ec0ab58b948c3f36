"""Acceptance suite: every criterion at its stated tolerance.

Each test prints its pass/fail line (run pytest with -s to see them inline;
they also land in the captured output on failure).  Runtime budgets are part
of the criteria and asserted alongside the numerical checks.
"""

import numpy as np
import pytest

from lambdabar.acceptance import CRITERIA, QUICK_SUBSET, run_criterion

LIMITS_SECONDS = {
    1: 1.0,
    2: 10.0,
    3: 30.0,
    4: 60.0,
    5: 5.0,
    6: 30.0,
    7: 10.0,
    8: 600.0,
    9: 60.0,
    10: 30.0,
}


@pytest.mark.parametrize("index", sorted(CRITERIA))
def test_criterion(index):
    result = run_criterion(index)
    print(result.line())
    assert result.passed, result.detail
    assert result.seconds < LIMITS_SECONDS[index], (
        f"criterion {index} exceeded its runtime budget: "
        f"{result.seconds:.1f}s > {LIMITS_SECONDS[index]}s")


def test_quick_subset_is_fast_and_complete():
    import time
    start = time.time()
    for index in QUICK_SUBSET:
        assert run_criterion(index).passed
    assert time.time() - start < 60.0
