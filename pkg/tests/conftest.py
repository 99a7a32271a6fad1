import numpy as np
import pytest

from mgfwa import EvalBackend

_acceptance_lines: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        detail = getattr(item, "acceptance_detail", "")
        if rep.skipped and isinstance(rep.longrepr, tuple):
            detail = rep.longrepr[2]
        _acceptance_lines.append(f"criterion {num} [{status}] {title}" + (f" -- {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance report."""
    def record(text: str):
        request.node.acceptance_detail = text
    return record


@pytest.fixture
def parallel4():
    backend = EvalBackend.data_parallel(4)
    yield backend
    backend.close()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
