import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's verdict for the terminal summary."""
    def record(number, title, detail=""):
        ACCEPTANCE[number] = (title, detail)
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    number = getattr(item.function, "criterion", None)
    if number is not None and rep.when == "call":
        title, detail = ACCEPTANCE.get(number, (item.name, ""))
        ACCEPTANCE[number] = (title, detail, rep.passed)


def pytest_terminal_summary(terminalreporter):
    done = {k: v for k, v in ACCEPTANCE.items() if len(v) == 3}
    if not done:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(done):
        title, detail, passed = done[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{number:>2}] {verdict}  {title}" + (f"  ({detail})" if detail else ""))
