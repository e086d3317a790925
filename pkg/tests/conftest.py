import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spectral_lab.cartesian import support_grid
from spectral_lab.potentials import square_well, zero_potential
from spectral_lab.quadrature import CartesianGrid, build_ball_grid
from spectral_lab.resolvent import (
    build_resolvent_table,
    find_bound_states,
    uniform_lambda_grid,
)
from spectral_lab.spectral_calculus import BoxEngine

LAM_MAX = 40.0
DLAM = 40.0 / 512
BOX_DLAM = 0.075
BASE_NODES = 430


@pytest.fixture(scope="session")
def well():
    return square_well(-4.0)


@pytest.fixture(scope="session")
def ball():
    return build_ball_grid(1.0, BASE_NODES)


@pytest.fixture(scope="session")
def ball_fine():
    return build_ball_grid(1.0, 2 * BASE_NODES)


@pytest.fixture(scope="session")
def spectrum(well, ball):
    return find_bound_states(well, ball)


@pytest.fixture(scope="session")
def spectrum_fine(well, ball_fine):
    return find_bound_states(well, ball_fine)


@pytest.fixture(scope="session")
def table(well, ball):
    return build_resolvent_table(well, ball, uniform_lambda_grid(LAM_MAX, DLAM))


@pytest.fixture(scope="session")
def table_fine_nodes(well, ball_fine):
    return build_resolvent_table(well, ball_fine, uniform_lambda_grid(LAM_MAX, DLAM))


@pytest.fixture(scope="session")
def table_half_dlam(well, ball):
    return build_resolvent_table(well, ball, uniform_lambda_grid(LAM_MAX, DLAM / 2))


@pytest.fixture(scope="session")
def free_table(ball):
    return build_resolvent_table(zero_potential(), ball, uniform_lambda_grid(LAM_MAX, DLAM))


# cartesian box machinery

@pytest.fixture(scope="session")
def box():
    return CartesianGrid(3.0, 32)


@pytest.fixture(scope="session")
def box_setup(box, well):
    sg = support_grid(box, well)
    sp = find_bound_states(well, sg)
    tab = build_resolvent_table(well, sg, uniform_lambda_grid(20.0, BOX_DLAM))
    return tab, sp, BoxEngine(tab, sp)


@pytest.fixture(scope="session")
def free_box_setup(box):
    V = zero_potential()
    tab = build_resolvent_table(V, support_grid(box, V), uniform_lambda_grid(20.0, BOX_DLAM))
    return tab, None, BoxEngine(tab, None)


def gaussian(box, center=(0.0, 0.0, 0.0), width=0.4, amplitude=1.0):
    X, Y, Z = box.mesh()
    c = center
    return amplitude * np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2) / (2 * width ** 2))


def bump_family(box, n, seed=0):
    """Smooth bumps, some with a linear tilt so they are not radial."""
    rng = np.random.default_rng(seed)
    X = box.mesh()[0]
    out = []
    for _ in range(n):
        c = rng.uniform(-1.2, 1.2, 3)
        w = rng.uniform(0.3, 0.6)
        out.append(gaussian(box, c, w) * (1 + 0.5 * rng.standard_normal() * X))
    return out


# acceptance lines are collected here and printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
