import pytest

ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record a criterion outcome, then assert it."""
    def record(criterion, ok, detail):
        ACCEPTANCE[criterion] = (bool(ok), detail)
        assert ok, f"criterion {criterion}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
