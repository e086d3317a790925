import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import square_well_mu

from spectral_lab import resolvent as rv
from spectral_lab.errors import (
    EmbeddedSpectrumSuspected,
    InvalidArgument,
    NumericalSingularity,
)
from spectral_lab.potentials import gaussian_bump, square_well, zero_potential
from spectral_lab.quadrature import build_ball_grid


def test_free_kernel_branches():
    x, y = np.zeros(3), np.array([0.0, 0.0, 2.0])
    assert rv.free_resolvent_kernel(-1.0, x, y) == pytest.approx(np.exp(-2) / (8 * np.pi))
    out = rv.free_resolvent_kernel(complex(4.0, 0.0), x, y)
    inc = rv.free_resolvent_kernel(complex(4.0, -0.0), x, y)
    assert out == pytest.approx(np.exp(4j) / (8 * np.pi))
    assert inc == pytest.approx(np.conj(out))
    with pytest.raises(NumericalSingularity):
        rv.free_resolvent_kernel(1.0, x, x)


def test_boundary_kappa():
    assert rv.boundary_kappa(3.0) == -3j
    assert rv.boundary_kappa(3.0, -1) == 3j
    k = rv.boundary_kappa(3.0, 1, 0.1)
    assert k.real > 0
    assert -k * k == pytest.approx(complex(3.0, 0.1) ** 2)


def test_bound_state_of_square_well(spectrum):
    assert len(spectrum.bound_states) == 1
    assert spectrum.mus[0] == pytest.approx(square_well_mu(4.0), abs=1e-4)
    assert not spectrum.resonance_flag


def test_bound_state_normalisation_and_residual(spectrum):
    assert rv.residue_gram(spectrum, 0) == pytest.approx(np.eye(1), abs=1e-10)
    assert rv.eigen_residual(spectrum, 0) < 1e-10


def test_eigenfunction_matches_radial_solution(spectrum):
    mu = square_well_mu(4.0)
    k = np.sqrt(4.0 - mu ** 2)
    # u = A sin(kr)/r inside, A sin(k) e^{mu(1-r)}/r outside, unit L2 norm
    inner = 4 * np.pi * (0.5 - np.sin(2 * k) / (4 * k))
    outer = 4 * np.pi * np.sin(k) ** 2 / (2 * mu)
    A = 1 / np.sqrt(inner + outer)
    r = np.array([0.3, 0.7, 1.5, 2.5])
    pts = np.c_[r, np.zeros(4), np.zeros(4)]
    exact = np.where(r < 1, A * np.sin(k * r) / r, A * np.sin(k) * np.exp(mu * (1 - r)) / r)
    got = spectrum.eigenfunctions(0, pts)[:, 0]
    got *= np.sign(got[0])          # overall sign is a convention
    assert got == pytest.approx(exact, rel=5e-3)


def test_projection_kernel_is_product(spectrum):
    x, y = np.array([1.5, 0, 0]), np.array([0, -2.0, 0])
    f = spectrum.eigenfunctions(0, np.vstack([x, y]))[:, 0]
    assert rv.projection_kernel(spectrum, 0, x, y) == pytest.approx(f[0] * f[1])
    with pytest.raises(InvalidArgument):
        rv.projection_kernel(spectrum, 3, x, y)


def test_deep_well_multiplicities():
    g = build_ball_grid(1.0, 430)
    sp = rv.find_bound_states(square_well(-30.0), g)
    mult = [e.multiplicity for e in sp.bound_states]
    assert mult[:2] == [1, 3]
    assert sp.mus[0] == pytest.approx(4.799609113, rel=1e-2)
    assert sp.mus[1] == pytest.approx(3.993637262, rel=1e-2)
    for j, e in enumerate(sp.bound_states):
        assert rv.residue_gram(sp, j) == pytest.approx(np.eye(e.multiplicity), abs=1e-10)


def test_repulsive_potential_has_no_bound_states():
    sp = rv.find_bound_states(square_well(2.0), build_ball_grid(1.0, 200))
    assert sp.bound_states == [] and not sp.resonance_flag


def test_zero_energy_resonance_flagged():
    g = build_ball_grid(1.0, 430)
    near = rv.find_bound_states(square_well(-(np.pi / 2) ** 2), g)
    far = rv.find_bound_states(square_well(-2.0), g)
    assert near.resonance_sigma_min < 1e-3 < far.resonance_sigma_min
    assert near.resonance_flag


def test_bad_search_interval():
    g = build_ball_grid(1.0, 100)
    with pytest.raises(InvalidArgument):
        rv.find_bound_states(square_well(-4.0), g, mu_search_interval=(1.0, 0.5))


def test_table_matches_born_series_for_weak_potential():
    V = gaussian_bump(0.3)
    g = build_ball_grid(1.0, 430)
    tab = rv.build_resolvent_table(V, g, rv.uniform_lambda_grid(2.0, 0.5))
    x, y = [1.5, 0.0, 0.0], [0.0, 2.0, 0.0]
    for i in (0, 2):
        kappa = tab.kappas(i)[0]
        born = rv.born_series_kernel(V, g, x, y, order=12, kappa=kappa)
        assert rv.perturbed_kernel(tab, None, x, y, i) == pytest.approx(born, rel=1e-8)


def test_table_symmetry_and_pair_rules(table):
    x, y = np.array([[0.3, 0.1, 0.0]]), np.array([[1.8, 0.0, 0.5]])
    a = table.kernel_sweep(x, y, [0, 50, 300])
    b = table.kernel_sweep(y, x, [0, 50, 300])
    assert np.allclose(a, b, rtol=1e-12)
    with pytest.raises(InvalidArgument):
        table.kernel_sweep([[0.1, 0, 0]], [[0.0, 0.2, 0]])
    with pytest.raises(NumericalSingularity):
        table.kernel_sweep(y, y)


def test_remainder_is_kernel_minus_free(table):
    x, y = np.array([[1.5, 0, 0]]), np.array([[0, 2.0, 0]])
    full = table.kernel_sweep(x, y, [10])[0, 0]
    rem = table.kernel_sweep(x, y, [10], remainder=True)[0, 0]
    lam = table.lambda_grid[10]
    free = np.exp(1j * lam * 2.5) / (4 * np.pi * 2.5)
    assert full - rem == pytest.approx(free, rel=1e-12)


def test_free_table_returns_free_kernel(free_table):
    x, y = np.array([[1.0, 0, 0]]), np.array([[0, 0.5, 0]])
    r = np.linalg.norm(x - y)
    K = free_table.kernel_sweep(x, y)[:, 0]
    assert K == pytest.approx(np.exp(1j * free_table.lambda_grid * r) / (4 * np.pi * r))


def test_incoming_table_is_conjugate(well, ball):
    lam = rv.uniform_lambda_grid(4.0, 1.0)
    out = rv.build_resolvent_table(well, ball, lam, sign=1)
    inc = rv.build_resolvent_table(well, ball, lam, sign=-1)
    x, y = [[1.5, 0, 0]], [[0, 1.2, 0.3]]
    assert np.allclose(inc.kernel_sweep(x, y), np.conj(out.kernel_sweep(x, y)), rtol=1e-10)


def test_richardson_ladder_approaches_direct(well, ball):
    lam = np.array([0.0, 1.0, 2.0])
    direct = rv.build_resolvent_table(well, ball, lam)
    ladder = rv.build_resolvent_table(well, ball, lam, eps_ladder=(0.04, 0.02, 0.01))
    x, y = [[1.5, 0, 0]], [[0, 2.0, 0]]
    assert np.allclose(ladder.kernel_sweep(x, y), direct.kernel_sweep(x, y), rtol=0, atol=1e-6)


def test_richardson_weights_cancel_low_orders():
    w = rv.richardson_weights((0.04, 0.02, 0.01))
    e = np.array([0.04, 0.02, 0.01])
    assert np.sum(w) == pytest.approx(1.0)
    assert np.dot(w, e) == pytest.approx(0.0, abs=1e-12)
    assert np.dot(w, e ** 2) == pytest.approx(0.0, abs=1e-12)


def test_ill_conditioned_system_reports_embedded_spectrum(well, ball):
    tab = rv.build_resolvent_table(well, ball, np.array([0.0, 1.0]))
    tab.rcond_min = 1.0
    with pytest.raises(EmbeddedSpectrumSuspected):
        tab.factor(1)


def test_cache_round_trip_and_corruption(tmp_path, well):
    g = build_ball_grid(1.0, 100)
    lam = rv.uniform_lambda_grid(2.0, 0.5)
    tab = rv.build_resolvent_table(well, g, lam)
    path = tmp_path / "t.bin"
    n = rv.save_table(tab, path)
    assert n == path.stat().st_size
    back = rv.load_table(path, well, g, lam)
    x, y = [[1.5, 0, 0]], [[0, 2.0, 0]]
    assert np.array_equal(back.kernel_sweep(x, y), tab.kernel_sweep(x, y))
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(rv.CacheMismatch):
        rv.load_table(path, well, g, lam)


def test_cache_rejects_other_grid_and_respects_budget(tmp_path, well):
    g = build_ball_grid(1.0, 100)
    lam = rv.uniform_lambda_grid(2.0, 0.5)
    tab = rv.build_resolvent_table(well, g, lam)
    path = tmp_path / "t.bin"
    rv.save_table(tab, path)
    with pytest.raises(rv.CacheMismatch):
        rv.load_table(path, well, build_ball_grid(1.0, 200), lam)
    with pytest.raises(rv.CacheMismatch):
        rv.load_table(path, well, g, rv.uniform_lambda_grid(2.0, 0.25))
    assert rv.save_table(tab, tmp_path / "big.bin", max_bytes=10) == 0
    assert not (tmp_path / "big.bin").exists()


def test_kato_composition_bound(well, ball):
    pairs = [([1.5, 0, 0], [-1.5, 0, 0]), ([0, 2, 0], [0.3, 0.2, 0]), ([0.5, 0, 0], [0, 0.5, 0]),
             ([3, 0, 0], [0, 0, 3])]
    assert rv.verify_kato_composition(well, ball, pairs) <= 1.02
    assert rv.verify_kato_composition(zero_potential(), ball, pairs) == 0.0


def test_resolution_spacing_rule():
    assert rv.resolution_spacing(2.0) == pytest.approx(np.pi / 8)
    assert rv.resolution_spacing(2.0, 0.5) == pytest.approx(0.5 / 8)


@settings(max_examples=10, deadline=None)
@given(r1=st.floats(1.2, 3.0), a1=st.floats(0, 2 * np.pi), r2=st.floats(1.2, 3.0), a2=st.floats(0, 2 * np.pi),
       i=st.integers(0, 500))
def test_kernel_symmetric_under_exchange(table, r1, a1, r2, a2, i):
    x = np.array([[r1 * np.cos(a1), r1 * np.sin(a1), 0.1]])
    y = np.array([[0.2, r2 * np.cos(a2), r2 * np.sin(a2)]])
    if np.linalg.norm(x - y) < 1e-3:
        return
    band = table.grid.support_radius + 2 * table.grid.spacing
    far = min(np.linalg.norm(x), np.linalg.norm(y)) > band
    # outside the near-field band the discrete kernel is exactly symmetric
    rel = 1e-10 if far else 5e-3
    assert table.kernel_sweep(x, y, [i]) == pytest.approx(table.kernel_sweep(y, x, [i]), rel=rel)
