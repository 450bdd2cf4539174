import math

import numpy as np
import pytest

from rhlqr import LiftedProblem, ProblemData, find_min_d, generate_scenario, lift

PHI = (1.0 + math.sqrt(5.0)) / 2.0  # scalar-unit infinite-horizon value

# acceptance-criteria results collected by tests/test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[int, str, str, float]] = []


def rand_spd(rng: np.random.Generator, n: int, floor: float = 0.1) -> np.ndarray:
    G = rng.normal(size=(n, n))
    return G @ G.T + floor * np.eye(n)


def rand_spd_pair_ordered(rng: np.random.Generator, n: int):
    """(Y, Z) with Y >= Z."""
    Z = rand_spd(rng, n)
    G = rng.normal(size=(n, n))
    return Z + G @ G.T, Z


def random_problem(seed: int, n: int = 2, m: int = 1, period: int = 1) -> ProblemData:
    kind = "time-invariant-random" if period == 1 else "periodic-random"
    return generate_scenario(kind, n=n, m=m, period=period, seed=seed)


def lifted_random(
    seed: int, n: int = 2, m: int = 1, period: int = 1, d: int | None = None
) -> LiftedProblem:
    """Random problem lifted at the smallest feasible depth (or a given one)."""
    pd = random_problem(seed, n=n, m=m, period=period)
    if d is None:
        d = find_min_d(pd, 6)
    return lift(pd, d)


@pytest.fixture(scope="session")
def scalar_pd() -> ProblemData:
    return generate_scenario("scalar-unit")


@pytest.fixture(scope="session")
def scalar_lp(scalar_pd):
    return lift(scalar_pd, 1)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, status, elapsed in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(
            f"criterion {num} ({title}): {status} [{elapsed:.2f}s]"
        )
