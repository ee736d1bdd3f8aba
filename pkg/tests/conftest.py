import re
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class Criterion:
    """Times one acceptance criterion and records its pass/fail line."""

    def __init__(self, number: str, lines: list):
        self.number = number
        self.lines = lines
        self.start = time.perf_counter()
        self.done = False

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def record(self, ok: bool, detail: str, limit: float | None = None) -> bool:
        took = self.elapsed
        in_time = limit is None or took < limit
        passed = bool(ok) and in_time
        budget = f" < {limit:g}s" if limit is not None else ""
        status = "PASS" if passed else "FAIL"
        line = f"{status} criterion {self.number}: {detail} [{took:.1f}s{budget}]"
        if not in_time:
            line += " (over time limit)"
        self.lines.append(line)
        self.done = True
        print(line)
        return passed

    def skip(self, reason: str):
        self.lines.append(f"SKIP criterion {self.number}: {reason}")
        self.done = True
        pytest.skip(reason)


@pytest.fixture
def criterion(request):
    lines = request.config.stash.setdefault(ACCEPTANCE, [])
    match = re.search(r"criterion_0*(\d+)", request.node.name)
    c = Criterion(match.group(1) if match else request.node.name, lines)
    yield c
    if not c.done:
        lines.append(f"FAIL criterion {c.number}: raised before recording a result")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(re.search(r"criterion (\d+)", s).group(1))):
            terminalreporter.write_line(line)
