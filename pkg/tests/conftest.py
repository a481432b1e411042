"""Shared fixtures and the acceptance summary reporter.

Session-scoped builders are safe to share: grids and measures are frozen
(read-only arrays), and the energy objects built here are only used where
their mutable bound-tracking state does not matter.
"""

import numpy as np
import pytest

from frflow import (
    RegularizedEnergy,
    ZeroEnergy,
    build_grid,
    gaussian_measure,
    reference_from_potential,
)


def pytest_configure(config):
    config._criterion_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid():
    return build_grid(-8.0, 8.0, 1025)


@pytest.fixture(scope="session")
def fine_grid():
    return build_grid(-8.0, 8.0, 2049)


@pytest.fixture(scope="session")
def pi_ref(grid):
    return reference_from_potential(grid, 0.5 * grid.x**2)


@pytest.fixture(scope="session")
def pi(pi_ref):
    return pi_ref.measure


@pytest.fixture(scope="session")
def m_gauss11(grid):
    return gaussian_measure(grid, 1.0, 1.0)


@pytest.fixture()
def v_zero(grid, pi_ref):
    # fresh per test: the functional tracks its observed derivative max
    return RegularizedEnergy(F=ZeroEnergy(grid), pi=pi_ref, sigma=1.0)
