"""Acceptance suite: every criterion must pass at its stated tolerance.

Comparisons are exact throughout (no floating point); each test prints its
pass/fail line so the suite output documents the run.
"""

import pytest

from tlfields.acceptance import CRITERIA

TIME_BUDGETS = {
    "uniformization": 10.0,
    "tate-agreement": 30.0,
    "global-residue": 30.0,
}


@pytest.mark.parametrize("name,fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(name, fn, capsys):
    result = fn(seed=0)
    status = "PASS" if result.passed else "FAIL"
    with capsys.disabled():
        print(f"\n{status} {result.name} ({result.seconds:.2f}s): {result.detail}")
    assert result.passed, f"{name}: {result.detail}"
    budget = TIME_BUDGETS.get(name)
    if budget is not None:
        assert result.seconds < budget, f"{name} took {result.seconds:.2f}s (budget {budget}s)"


def test_full_suite_under_five_minutes():
    import time

    from tlfields.acceptance import run_all

    start = time.time()
    results = run_all(seed=1)
    elapsed = time.time() - start
    assert all(r.passed for r in results)
    assert elapsed < 300, f"selftest took {elapsed:.1f}s"
