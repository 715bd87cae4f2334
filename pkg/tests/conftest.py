"""Shared fixtures: cached converged states and the acceptance summary."""

from __future__ import annotations

import functools
import time

import pytest
from hypothesis import settings

from periodic_nsf.constitutive import ConstitutiveParams
from periodic_nsf.discretization import DomainSpec, ShearForcing
from periodic_nsf.solvers import ApproxParams, Controls, Scheme, fixed_point

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []
SOLVE_SECONDS: dict = {}
SMALL_FORCING = 1e-2


@functools.lru_cache(maxsize=None)
def small_forcing_problem(N_x: int = 3, N_t: int = 2, amplitude: float = SMALL_FORCING):
    """(scheme, converged state) for the shear-forced default problem."""
    start = time.perf_counter()
    domain = DomainSpec(force=ShearForcing(amplitude) if amplitude else None)
    scheme = Scheme.build(domain, ConstitutiveParams(gamma=1.7), ApproxParams(N_t=N_t, N_x=N_x))
    state = fixed_point(scheme, Controls())
    SOLVE_SECONDS[(N_x, N_t, amplitude)] = time.perf_counter() - start
    return scheme, state


@pytest.fixture(scope="session")
def forced_problem():
    return small_forcing_problem(3)


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} :: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
