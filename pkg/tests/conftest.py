"""Shared pytest hooks: acceptance criteria report one pass/fail line each."""

import pytest

_RESULTS: list[str] = []


class CriterionRecorder:
    def __init__(self, name):
        self.name = name

    def check(self, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {self.name}: {detail}"
        _RESULTS.append(line)
        print(line)
        assert ok, line


@pytest.fixture()
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    return CriterionRecorder(marker.args[0] if marker else request.node.name)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
