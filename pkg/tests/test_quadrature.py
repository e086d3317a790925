import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import newton_ball as newton_oracle
from oracles import yukawa_ball_numeric

from spectral_lab.errors import InvalidArgument, NumericalSingularity
from spectral_lab.quadrature import (
    CartesianGrid,
    build_ball_grid,
    integrate_singular,
    newton_ball,
    unit_cube_inverse_distance,
    yukawa_ball,
    yukawa_cell,
)


@pytest.mark.parametrize("target", [100, 400, 800, 1600])
def test_ball_grid_size_and_volume(target):
    g = build_ball_grid(1.0, target)
    assert abs(len(g) - target) <= 0.2 * target
    assert np.all(g.weights > 0)
    assert g.volume == pytest.approx(4 * np.pi / 3, rel=1e-12)


def test_ball_grid_integrates_low_degree_polynomials():
    g = build_ball_grid(1.0, 400)
    x, y, z = g.nodes.T
    assert np.sum(g.weights * x ** 2) == pytest.approx(4 * np.pi / 15, rel=1e-12)
    assert np.sum(g.weights * x * y * z) == pytest.approx(0.0, abs=1e-14)
    assert np.sum(g.weights * (x ** 2 + y ** 2 + z ** 2) ** 2) == pytest.approx(4 * np.pi / 7, rel=1e-12)


def test_ball_grid_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        build_ball_grid(-1.0, 400)
    with pytest.raises(InvalidArgument):
        build_ball_grid(1.0, 10)


def test_translated_grid_keeps_weights():
    g = build_ball_grid(1.0, 200)
    h = g.translated((1.0, 2.0, 3.0))
    assert np.allclose(h.center, (1, 2, 3))
    assert np.array_equal(h.weights, g.weights)
    assert h.digest() != g.digest()


def test_unit_cube_constant():
    assert unit_cube_inverse_distance() == pytest.approx(2.3800773639795536, rel=1e-12)


@pytest.mark.parametrize("d", [0.0, 0.3, 0.99, 1.0, 1.7, 4.0])
def test_newton_ball_closed_form(d):
    assert newton_ball(d, 1.0) == pytest.approx(newton_oracle(d), rel=1e-14)


@pytest.mark.parametrize("d", [0.0, 0.4, 0.95, 1.5, 3.0])
@pytest.mark.parametrize("kappa", [0.0, 1e-4, 0.7, 3.0])
def test_yukawa_ball_against_shell_quadrature(d, kappa):
    ref = yukawa_ball_numeric(d, 1.0, kappa)
    assert yukawa_ball(d, 1.0, kappa).real == pytest.approx(ref, rel=1e-8, abs=1e-12)


def test_yukawa_ball_series_matches_closed_form_at_switch():
    for d in (0.2, 1.5):
        a = yukawa_ball(d, 1.0, 1.99999e-3)
        b = yukawa_ball(d, 1.0, 2.00001e-3)
        assert abs(a - b) < 1e-8


def test_yukawa_ball_helmholtz_branch_solves_poisson_limit():
    # kappa -> 0 along the imaginary axis approaches the Newton potential / 4 pi
    v = yukawa_ball(0.5, 1.0, -1e-6j)
    assert v.real == pytest.approx(newton_ball(0.5, 1.0) / (4 * np.pi), rel=1e-6)


def test_yukawa_cell_limits():
    h = 0.2
    assert yukawa_cell(h, 0.0).real == pytest.approx(h ** 2 * 2.3800773639795536 / (4 * np.pi), rel=1e-12)
    # for large kappa h the cell integral approaches the whole-space value 1/kappa^2
    k = 200.0
    assert yukawa_cell(h, k).real == pytest.approx(1 / k ** 2, rel=2e-2)


def test_integrate_singular_newton_potential():
    g = build_ball_grid(1.0, 800)
    for pole in ([0.2, 0.1, -0.3], [0.0, 0.0, 1.5]):
        val = integrate_singular(np.ones(len(g)), pole, g)
        assert val == pytest.approx(newton_oracle(np.linalg.norm(pole)), rel=2e-3)


def test_integrate_singular_on_node_needs_subtraction():
    g = build_ball_grid(1.0, 200)
    with pytest.raises(NumericalSingularity):
        integrate_singular(np.ones(len(g)), g.nodes[3], g, subtract=False)
    assert np.isfinite(integrate_singular(np.ones(len(g)), g.nodes[3], g))


def test_cartesian_grid_geometry():
    b = CartesianGrid(2.0, 16)
    assert b.spacing == pytest.approx(0.25)
    assert b.points().shape == (16 ** 3, 3)
    assert b.cell_volume * 16 ** 3 == pytest.approx(64.0)
    with pytest.raises(InvalidArgument):
        CartesianGrid(1.0, 4)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.0, 2.5))
def test_newton_ball_scaling(R, d):
    # int_{B(0,R)} 1/|z - p| = R^2 * int_{B(0,1)} 1/|z - p/R|
    assert newton_ball(d, R) == pytest.approx(R ** 2 * newton_ball(d / R, 1.0), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.05, 5.0))
def test_yukawa_ball_bounded_by_newton(d, kappa):
    # exp(-kappa r) <= 1, so the screened integral never exceeds the Newton one
    assert yukawa_ball(d, 1.0, kappa).real <= newton_ball(d, 1.0) / (4 * np.pi) * (1 + 1e-12)
    assert yukawa_ball(d, 1.0, kappa).real > 0
