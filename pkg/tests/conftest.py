import pytest

# acceptance verdict lines, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def verdict():
    """Record checks for one criterion, print its PASS/FAIL line, then assert."""

    class Verdict:
        def __init__(self):
            self.checks = []

        def check(self, label, ok, detail=""):
            self.checks.append((label, bool(ok), detail))

        def finish(self, name):
            failed = [c for c in self.checks if not c[1]]
            status = "PASS" if not failed else "FAIL"
            parts = [f"{'ok' if ok else 'FAIL'} {label} {detail}".rstrip() for label, ok, detail in self.checks]
            line = f"{name}: {status} | " + "; ".join(parts)
            ACCEPTANCE_LINES.append(line)
            print(line)
            assert not failed, "; ".join(f"{c[0]} {c[2]}" for c in failed)

    return Verdict()
