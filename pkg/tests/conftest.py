import pytest

# criterion number -> (passed, description), filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the summary."""

    class Recorder:
        def __init__(self):
            self.number = None

        def __call__(self, number: int, description: str):
            self.number = number
            ACCEPTANCE[number] = (False, description)
            return self

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            passed = exc_type is None
            ACCEPTANCE[self.number] = (passed, ACCEPTANCE[self.number][1])
            print(f"{'PASS' if passed else 'FAIL'} criterion {self.number}: {ACCEPTANCE[self.number][1]}")
            return False

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, desc = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {n}: {desc}")
