import math
import time

import pytest

from subplanck import GridSpec

HBAR = 0.16
XI = 0.4

# criterion number -> (title, outcome, seconds, detail lines)
_ACCEPTANCE: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.fixture
def grid1024():
    return GridSpec.centered(1024, 0.05, HBAR)


@pytest.fixture
def grid512():
    return GridSpec.centered(512, 0.05, HBAR)


class CriterionLog:
    """Collects sub-check results so each criterion reports every check even
    when an earlier one fails."""

    def __init__(self, number: int, title: str, limit: float):
        self.number, self.title, self.limit = number, title, limit
        self.lines: list[str] = []
        self.failed: list[str] = []
        self.start = time.perf_counter()

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.lines.append(f"  [{'ok' if ok else 'FAIL'}] {name}{': ' + detail if detail else ''}")
        if not ok:
            self.failed.append(name)
        return ok

    def finish(self) -> None:
        elapsed = time.perf_counter() - self.start
        self.check("runtime", elapsed < self.limit, f"{elapsed:.1f} s (limit {self.limit:.0f} s)")
        _ACCEPTANCE[self.number] = [self.title, not self.failed, elapsed, self.lines]
        print("\n".join(self.lines))
        assert not self.failed, f"criterion {self.number} failed: {', '.join(self.failed)}"


@pytest.fixture
def criterion(request):
    mark = request.node.get_closest_marker("criterion")
    number, title, limit = mark.args
    log = CriterionLog(number, title, limit)
    _ACCEPTANCE[number] = [title, False, math.nan, ["  (did not complete)"]]
    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, secs, lines = _ACCEPTANCE[n]
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.1f} s)")
        if not ok:
            for line in lines:
                tr.write_line(line)
