import pytest

from roughdisk.billiard import empirical_measure, isosceles_triangle, rectangle


@pytest.fixture(scope="session")
def equilateral_hist():
    return empirical_measure(isosceles_triangle(60.0), 1000, 1000, 200)


@pytest.fixture(scope="session")
def right_triangle_hist():
    return empirical_measure(isosceles_triangle(45.0), 1000, 1000, 200)


@pytest.fixture(scope="session")
def deep_rect_hist():
    return empirical_measure(rectangle(0.01, 0.01), 1000, 1000, 200)


@pytest.fixture
def report(request):
    """Record one acceptance verdict; all verdicts are echoed in the summary."""
    log = request.config.__dict__.setdefault("_acceptance", {})

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        log[number] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_acceptance", {})
    if log:
        terminalreporter.section("acceptance criteria")
        for k in sorted(log):
            terminalreporter.write_line(log[k])
