import asyncio

import pytest

SAMPLE_LINE = (
    "[[Keep Calm and Carry On]] http://en.wikipedia.org/w/index.php"
    "?diff=585806152&oldid=585805943 * 74.197.171.148 * (+14) /* Parodies */"
)

LISTING_ARTICLE = "Golden_Globe_Award_for_Best_Actress_-_Motion_Picture_Musical_or_Comedy"
LISTING_DIFF_URL = (
    "http://en.wikipedia.org/w/api.php?action=compare"
    "&torev=585820379&fromrev=585776128&format=json"
)


def run(coro, timeout=60):
    return asyncio.run(asyncio.wait_for(coro, timeout))


@pytest.fixture
def sample_line():
    return SAMPLE_LINE


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): end-to-end acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(RESULTS):
        status, note = RESULTS[label]
        terminalreporter.write_line(f"{status}  {label}" + (f"  ({note})" if note else ""))
