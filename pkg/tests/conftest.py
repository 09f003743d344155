import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Lines are printed together in the terminal summary so they survive
    output capturing.
    """
    lines = request.config._acceptance_lines

    def record(number, title, passed, detail, elapsed, limit):
        ok = passed and elapsed < limit
        lines.append(f"{'PASS' if ok else 'FAIL'}  #{number:<2} {title}: {detail} "
                     f"[{elapsed:.2f}s, limit {limit:g}s]")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
