import pytest

_VERDICTS: dict = {}


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion.

    Call it with the criterion number and a short detail string before the
    assertions; the verdict flips to PASS only if the test body finishes.
    """
    state = {}

    def record(number: int, detail: str):
        state["key"] = number
        _VERDICTS[number] = ["FAIL", detail]

    yield record
    if "key" in state and request.node.rep_call_passed:
        _VERDICTS[state["key"]][0] = "PASS"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call_passed = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        status, detail = _VERDICTS[number]
        terminalreporter.write_line(f"{status} criterion {number:2d}: {detail}")
