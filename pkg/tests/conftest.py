import pytest


@pytest.fixture
def acceptance(request):
    """Record a criterion outcome; the lines are echoed in the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        lines.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda p: p[0]):
            terminalreporter.write_line(line)
