import numpy as np
import pytest

from teleop_sim.config import ScenarioConfig
from teleop_sim.core import US_PER_S


@pytest.fixture
def short_config():
    def make(transport="wired", seconds=2, seed=7, **kw):
        return ScenarioConfig(transport=transport, duration_us=int(seconds * US_PER_S), seed=seed, **kw)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    def record(number: int, title: str, ok: bool, detail: str):
        line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
