"""Acceptance gate: every criterion must report PASS at its stated tolerance."""

import pytest

from afqms import acceptance


@pytest.mark.parametrize(
    "check", acceptance.ALL_CHECKS, ids=lambda c: c.__name__.removeprefix("check_")
)
def test_acceptance_criterion(check):
    result = check()
    print(acceptance.format_result(result))
    assert result.passed, result.detail
