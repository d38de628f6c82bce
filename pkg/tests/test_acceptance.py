"""Acceptance criteria 1-10; each prints one PASS/FAIL line."""

import pytest

from wmblow import verify


@pytest.mark.parametrize("crit", verify.ALL, ids=lambda f: f.__name__)
def test_criterion(crit):
    r = crit()
    print()
    print(r.line())
    for k, v in r.values.items():
        print(f"    {k}: {v}")
    assert r.passed
