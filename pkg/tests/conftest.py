import functools

import pytest

from finsler_lab import crofton_sphere as cs
from finsler_lab import finsler_core as fc

# lines recorded by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def crofton_polar(a: float = 1.0):
    return cs.crofton_metric(cs.polar_cap_density(a))


@functools.lru_cache(maxsize=None)
def crofton_constant(c: float = 1.0):
    return cs.crofton_metric(cs.constant_density(c))


@pytest.fixture(scope="session")
def crofton_check():
    return crofton_polar(1.0)


@pytest.fixture(scope="session")
def round_sphere():
    return fc.sphere_round()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
