import sys

import numpy as np
import pytest

from dyonsolve.fixed_point import SolveOptions, default_grid_bounds, solve_dyon
from dyonsolve.params import Parameters, derive
from dyonsolve.profile import FieldProfile, make_grid

ACCEPT = dict(g=1.0, g_prime=1.0, lam=2.0, mu=1.0, kappa_param=1.0, m=1.0, A0=0.3, B0=0.3)


@pytest.fixture(scope="session")
def accept_params():
    return Parameters(**ACCEPT)


@pytest.fixture(scope="session")
def accept_consts(accept_params):
    return derive(accept_params)


@pytest.fixture(scope="session")
def accept_solution(accept_params):
    """Converged acceptance profile, its trace and the wall time of the solve."""
    import time

    t0 = time.perf_counter()
    prof, trace = solve_dyon(accept_params, SolveOptions(fp_tol=1e-8, max_iters=200, N=2000))
    return prof, trace, time.perf_counter() - t0


@pytest.fixture(scope="session")
def zero_solution():
    p = Parameters(**{**ACCEPT, "A0": 0.0, "B0": 0.0})
    prof, trace = solve_dyon(p)
    return p, derive(p), prof, trace


@pytest.fixture(scope="session")
def flat_background(accept_consts):
    """rho = rho0, A = B = A0 everywhere: f'' = (f^2 - 1) f / r^2 + 0.16 f."""
    grid = make_grid(*default_grid_bounds(accept_consts), 2000)
    return FieldProfile.constant(grid, f=0.0, rho=1.0, A=0.3, B=0.3, h=0.0, sigma=1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
