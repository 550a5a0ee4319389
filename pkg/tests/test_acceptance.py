"""Acceptance gate: one PASS/FAIL line per criterion in the terminal summary.

Individual checks are listed under each criterion; set ``LPR_TOL_SCALE`` to
loosen or tighten every tolerance.
"""

import pytest

from conftest import ACCEPTANCE_LINES
from lpr.acceptance import CRITERIA, tol_scale_from_env

SCALE = tol_scale_from_env()

TITLES = {
    "1": "affine closed-form reproduction",
    "2": "triple-route agreement and order",
    "3": "published-value spot checks",
    "4": "conservation suite",
    "5": "structural property suite",
    "6": "Routh equivalence (Abelian)",
}


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_criterion(criterion):
    results = CRITERIA[criterion](SCALE)
    assert results
    failed = [r.name for r in results if not r.passed]
    status = "FAIL" if failed else "PASS"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {TITLES[criterion]} "
                            f"({len(results) - len(failed)}/{len(results)} checks)")
    ACCEPTANCE_LINES.extend("    " + r.line() for r in results)
    assert not failed, f"criterion {criterion} failed: {failed}"
