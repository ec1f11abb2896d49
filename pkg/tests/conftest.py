import functools

import pytest

from recomp import workloads
from recomp.cache import CacheConfig, LevelConfig
from recomp.energy import EpiTable, LatencyTable
from recomp.transforms import analyze

SMALL_CACHE = CacheConfig((LevelConfig(1024, 2), LevelConfig(4096, 4)), 64)


@functools.lru_cache(maxsize=None)
def shipped(name: str):
    """Native analysis of a shipped workload under the default hierarchy."""
    return analyze(workloads.load(name), None, CacheConfig())


@pytest.fixture
def t():
    return EpiTable()


@pytest.fixture
def lt():
    return LatencyTable()


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
