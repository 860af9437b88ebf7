import pytest

ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def _verdict(ok):
    return "SKIP" if ok is None else ("PASS" if ok else "FAIL")


@pytest.fixture
def report():
    """Record and print the verdict of one acceptance criterion."""

    def _report(n: int, ok, detail: str) -> None:
        ACCEPTANCE_RESULTS[n] = (_verdict(ok), detail)
        print(f"\ncriterion {n}: {_verdict(ok)}  {detail}")

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        verdict, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {verdict}  {detail}")
