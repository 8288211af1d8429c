import math

import pytest

from wavecrest import Dirac, Gaussian, Nicholson, ProblemSpec, solve_profile, speeds
from wavecrest.birth import landmarks
from wavecrest.waveform import SolverConfig


@pytest.fixture(scope="session")
def blowflies():
    """Nicholson p=9, unit delay, gaussian kernel with alpha=0.2."""
    return ProblemSpec(Gaussian(0.2), Nicholson(9.0), 1.0)


@pytest.fixture(scope="session")
def blowflies_speeds(blowflies):
    return speeds(blowflies.h, blowflies.kernel, blowflies.g)


@pytest.fixture(scope="session")
def monotone_solve():
    spec = ProblemSpec(Dirac(), Nicholson(2.0), 1.0)
    rep = speeds(spec.h, spec.kernel, spec.g)
    spec = spec.with_speed(1.05 * rep.c_star)
    return spec, solve_profile(spec), landmarks(spec.g)


@pytest.fixture(scope="session")
def oscillating_solve(blowflies, blowflies_speeds):
    spec = blowflies.with_speed(1.05 * blowflies_speeds.c_star)
    return spec, solve_profile(spec, SolverConfig(damping=0.5)), landmarks(spec.g)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


LN9 = math.log(9.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(REPORT):
            terminalreporter.write_line(line)
