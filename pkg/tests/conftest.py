import pytest

# acceptance criterion number -> (title, passed), filled by test_acceptance.py
ACCEPTANCE: dict = {}
_CALL_FAILED = pytest.StashKey[bool]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.stash[_CALL_FAILED] = not rep.passed


@pytest.fixture
def criterion(request):
    """Declare which acceptance criterion a test checks; its outcome is summarized at the end."""
    numbers = []

    def declare(number: int, title: str) -> None:
        numbers.append((number, title))

    yield declare
    passed = not request.node.stash.get(_CALL_FAILED, True)
    for number, title in numbers:
        previous = ACCEPTANCE.get(number, (title, True))[1]
        ACCEPTANCE[number] = (title, previous and passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  AC{number:<3}{title}")
