import pytest

ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    """Store a criterion verdict; the summary prints one line per criterion."""

    def _record(criterion: int, passed: bool, detail: str = ""):
        prev = ACCEPTANCE.get(criterion)
        ok = passed and (prev is None or prev[0])
        details = [d for d in ((prev[1] if prev else ""), detail) if d]
        ACCEPTANCE[criterion] = (ok, "; ".join(details))
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
