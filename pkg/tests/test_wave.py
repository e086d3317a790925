import numpy as np
import pytest
from conftest import DLAM, LAM_MAX, bump_family, gaussian
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dispersive_gaussian, kirchhoff_gaussian

from spectral_lab.errors import AliasingError, InvalidArgument
from spectral_lab.potentials import square_well
from spectral_lab.resolvent import (
    build_resolvent_table,
    find_bound_states,
    projection_kernels,
    uniform_lambda_grid,
)
from spectral_lab.wave import (
    check_admissible,
    conical_ratios,
    dispersive_decay_check,
    dispersive_fields,
    evolve,
    integrated_sine_bound,
    integrated_sine_profile,
    sine_propagator_kernel,
    sobolev_equivalence_check,
    sobolev_equivalence_ratios,
    strichartz_ratio,
    time_taper,
)


def spread_pairs(n, seed=0, r_range=(1.5, 3.0)):
    """Pairs with both points outside the unit ball and |x - y| in r_range."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x = rng.normal(size=3)
        x *= rng.uniform(1.3, 2.5) / np.linalg.norm(x)
        e = rng.normal(size=3)
        y = x + rng.uniform(*r_range) * e / np.linalg.norm(e)
        if np.linalg.norm(y) > 1.3:
            out.append((x, y))
    return out


# time kernels ----------------------------------------------------------------

def test_free_integrated_bound_is_exact(free_table):
    assert integrated_sine_bound(free_table, None, spread_pairs(5)) == pytest.approx(1 / (2 * np.pi), abs=1e-12)


def test_inside_cone_matches_bound_state_growth(table, spectrum):
    pairs = spread_pairs(4, seed=1)
    xs = np.array([a for a, _ in pairs])
    ys = np.array([b for _, b in pairs])
    r = np.linalg.norm(xs - ys, axis=1)
    P = projection_kernels(spectrum, xs, ys)
    for frac in (0.2, 0.5, 0.8):
        t = frac * r
        dec = sine_propagator_kernel(table, spectrum, xs, ys, t)
        got = np.diag(dec.smooth)
        ref = -sum(np.sinh(mu * t) / mu * Pj for mu, Pj in zip(spectrum.mus, P))
        assert np.all(np.abs(got - ref) <= 1e-2 * np.abs(ref))


def test_sine_kernel_odd_and_zero_at_origin(table, spectrum):
    x, y = spread_pairs(1, seed=2)[0]
    dec = sine_propagator_kernel(table, spectrum, [x], [y], [0.0, 0.7, -0.7, 3.1, -3.1])
    s = dec.smooth[:, 0]
    assert s[0] == 0.0
    assert s[1] == pytest.approx(-s[2], abs=1e-15)
    assert s[3] == pytest.approx(-s[4], abs=1e-15)


@settings(deadline=None, max_examples=25)
@given(t=st.floats(0.05, 30.0))
def test_odd_part_of_transform_is_sine_kernel(table, spectrum, t):
    x, y = spread_pairs(1, seed=2)[0]
    dec = sine_propagator_kernel(table, spectrum, [x], [y], [])
    odd = (dec.transform([t]) - dec.transform([-t])) / (2 * np.pi)
    assert odd == pytest.approx(dec.sine([t]), rel=1e-9, abs=1e-15)


def test_aliasing_guard(table, spectrum):
    x, y = spread_pairs(1)[0]
    with pytest.raises(AliasingError):
        sine_propagator_kernel(table, spectrum, [x], [y], [1.01 * table.t_max])


def test_pair_distance_window(table, spectrum):
    with pytest.raises(AliasingError):
        integrated_sine_profile(table, spectrum, [((2, 0, 0), (2, 0.1, 0))])


def test_time_taper_shape():
    lam = np.linspace(0, 40, 401)
    w = time_taper(lam)
    assert w[0] == pytest.approx(1, abs=1e-6) and w[-1] < 1e-4
    assert np.all(np.diff(w) <= 0)


def test_integrated_bound_with_well_refines(table, table_half_dlam, spectrum):
    pairs = spread_pairs(6, seed=4)
    a = integrated_sine_bound(table, spectrum, pairs)
    b = integrated_sine_bound(table_half_dlam, spectrum, pairs)
    assert np.isfinite(a) and abs(a - b) < 0.1 * b


def test_integrated_bound_repulsive(ball):
    V = square_well(2.0)
    sp = find_bound_states(V, ball)
    assert not sp.bound_states
    tab = build_resolvent_table(V, ball, uniform_lambda_grid(LAM_MAX, DLAM))
    val = integrated_sine_bound(tab, sp, spread_pairs(6, seed=5))
    assert np.isfinite(val) and val < 1.0


def test_conical_free_constant(free_table):
    assert np.allclose(conical_ratios(free_table, None, (0.3, 0, 0), [0.1, 1.0, 4.0]), 2 * np.pi)


def test_conical_with_well_bounded(table, spectrum):
    r = conical_ratios(table, spectrum, (1.5, 0, 0), [0.1, 1.0, 2.0], nodes=200)
    assert np.all(np.isfinite(r))
    assert r[0] < 2 * 2 * np.pi and r.max() < 5 * r.min()


def test_conical_source_inside_support_rejected(table, spectrum):
    with pytest.raises(InvalidArgument):
        conical_ratios(table, spectrum, (0.2, 0, 0), [1.0])


# evolution on the box --------------------------------------------------------

def radius(box, center=(0.0, 0.0, 0.0)):
    X, Y, Z = box.mesh()
    return np.sqrt((X - center[0]) ** 2 + (Y - center[1]) ** 2 + (Z - center[2]) ** 2)


def test_free_evolution_matches_kirchhoff(box, free_box_setup):
    tab, _, eng = free_box_setup
    w = 0.35
    t = np.array([0.0, 0.5, 1.0, 1.5])
    sol = evolve(tab, None, gaussian(box, width=w), t_grid=t, engine=eng)
    r = radius(box)
    for k, tk in enumerate(t):
        ref = kirchhoff_gaussian(r, tk, w)
        assert np.max(np.abs(sol.u[k] - ref)) < 1e-3


def test_free_group_identity(box, free_box_setup):
    tab, _, eng = free_box_setup
    # narrow data so the pulse stays inside the box up to t + dt
    dt, t = 0.25, 1.0
    u0 = gaussian(box, width=0.3)
    sol = evolve(tab, None, u0, t_grid=[t - dt, t, t + dt], engine=eng)
    mid = evolve(tab, None, sol.u[1], t_grid=[dt], engine=eng)
    lhs = sol.u[0] + sol.u[2]
    assert np.max(np.abs(lhs - 2 * mid.u[0])) < 1e-6 * np.max(np.abs(lhs))


def test_group_identity_with_well(box, box_setup):
    tab, sp, eng = box_setup
    dt, t = 0.25, 1.0
    u0 = eng.project_continuous(gaussian(box, (0.5, 0, 0), 0.4)).real
    sol = evolve(tab, sp, u0, t_grid=[t - dt, t, t + dt], engine=eng)
    mid = evolve(tab, sp, sol.u[1], t_grid=[dt], engine=eng)
    lhs = sol.u[0] + sol.u[2]
    assert np.max(np.abs(lhs - 2 * mid.u[0])) < 5e-2 * np.max(np.abs(lhs))


def test_energy_conserved(box, box_setup):
    tab, sp, eng = box_setup
    # energy is measured on the box, so the pulse must not reach its faces
    sol = evolve(tab, sp, gaussian(box, (0.4, 0, 0), 0.3), gaussian(box, (-0.4, 0.2, 0), 0.3),
                 t_grid=np.linspace(0, 1, 5), engine=eng)
    assert sol.energy_drift() < 1e-2


def test_eigenfunction_data_evolves_to_nearly_zero(box, box_setup):
    tab, sp, eng = box_setup
    e = eng.modes()[0]
    sol = evolve(tab, sp, e, t_grid=[0.0, 1.0], engine=eng)
    assert np.max(np.abs(sol.u)) < 0.05 * np.max(np.abs(e))


def test_duhamel_constant_forcing_free(box, free_box_setup):
    tab, _, eng = free_box_setup
    g = gaussian(box, width=0.5)
    t = np.linspace(0, 1.0, 41)
    sol = evolve(tab, None, None, None, F=lambda s: g, t_grid=t, engine=eng)

    def exact(tk):
        def sym(xi):
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (1 - np.cos(tk * xi)) / xi ** 2
            return np.where(xi == 0, tk ** 2 / 2, out)
        return eng.conv.multiplier(sym, g).real

    for k in (10, 40):
        ref = exact(t[k])
        assert np.max(np.abs(sol.u[k] - ref)) < 1e-3 * np.max(np.abs(ref))


def test_forcing_needs_uniform_grid(box, free_box_setup):
    tab, _, eng = free_box_setup
    with pytest.raises(InvalidArgument):
        evolve(tab, None, None, F=lambda s: np.zeros(box.shape), t_grid=[0.0, 0.1, 0.3], engine=eng)


def test_evolution_aliasing_guard(box, free_box_setup):
    tab, _, eng = free_box_setup
    with pytest.raises(AliasingError):
        evolve(tab, None, gaussian(box), t_grid=[2 * tab.t_max], engine=eng)


# dispersive decay ------------------------------------------------------------

def test_free_dispersive_matches_oracle(box, free_box_setup):
    tab, _, eng = free_box_setup
    w = 0.3
    f = gaussian(box, width=w)
    t = np.array([0.5, 1.0, 1.5])
    fields = dispersive_fields(tab, None, [f], t, eng)[:, 0]
    r = radius(box)
    for k, tk in enumerate(t):
        ref = dispersive_gaussian(r, tk, w)
        assert np.max(np.abs(fields[k])) == pytest.approx(np.max(np.abs(ref)), rel=0.1)
        assert np.max(np.abs(fields[k] - ref)) < 0.1 * np.max(np.abs(ref))


def test_dispersive_ratio_with_well(box, box_setup):
    tab, sp, eng = box_setup
    fs = bump_family(box, 2, seed=7)
    R = dispersive_decay_check(tab, sp, fs, [0.75, 1.5], eng, return_all=True)
    assert np.all(np.isfinite(R)) and R.max() < 1.0
    # doubling t does not make the ratio grow spuriously
    assert np.all(R[1] < 3 * R[0])


# Strichartz ------------------------------------------------------------------

@pytest.mark.parametrize("pqs", [(2, np.inf, 1.0), (2, 4, 0.75), (1.5, 6, 1.0), (4, 4, 0.4)])
def test_inadmissible_exponents(pqs):
    with pytest.raises(InvalidArgument):
        check_admissible(*pqs)


@given(q=st.floats(4.0, 1e3))
def test_sharp_segment_admissible(q):
    # 2/p + 2/q = 1 with s from the scaling condition
    p = 2 * q / (q - 2)
    s = 1.5 - 1 / p - 3 / q
    check_admissible(p, q, s)


@pytest.fixture(scope="module")
def free_solutions(box, free_box_setup):
    tab, _, eng = free_box_setup
    rng = np.random.default_rng(21)
    t = np.linspace(0, 1.0, 9)
    sols = []
    for _ in range(10):
        c = rng.uniform(-0.6, 0.6, 3)
        w0, w1 = rng.uniform(0.25, 0.4, 2)
        u0 = gaussian(box, c, w0, rng.normal())
        u1 = gaussian(box, -c, w1, rng.normal())
        sols.append(evolve(tab, None, u0, u1, t_grid=t, engine=eng))
    return sols


def test_strichartz_ratios_share_a_constant(free_solutions):
    r = strichartz_ratio(free_solutions, 4, 4, 0.5)
    assert np.all(np.isfinite(r)) and r.max() / r.min() < 3


def test_strichartz_dyadic_rescale(box, free_box_setup):
    tab, _, eng = free_box_setup
    w = 0.4
    t = np.linspace(0, 1.0, 9)
    base = evolve(tab, None, gaussian(box, width=w), t_grid=t, engine=eng)
    small = evolve(tab, None, gaussian(box, width=w / 2), t_grid=t / 2, engine=eng)
    a = strichartz_ratio(base, 4, 4, 0.5)
    b = strichartz_ratio(small, 4, 4, 0.5)
    assert 0.5 < a / b < 2


def test_single_solution_gives_float(free_solutions):
    assert isinstance(strichartz_ratio(free_solutions[0], 4, 4, 0.5), float)


# Sobolev equivalence ---------------------------------------------------------

S_LIST = [-1.0, -0.5, 0.0, 0.5, 1.0]


def test_sobolev_free_is_identity(box, free_box_setup):
    tab, _, eng = free_box_setup
    R = sobolev_equivalence_ratios(tab, None, bump_family(box, 3, seed=2), S_LIST, eng)
    assert np.allclose(R, 1.0, atol=1e-6)


def test_sobolev_with_well(box, box_setup):
    tab, sp, eng = box_setup
    res = sobolev_equivalence_check(tab, sp, bump_family(box, 4, seed=2), S_LIST, eng)
    lo, hi = res[0.0]
    assert abs(lo - 1) < 5e-3 and abs(hi - 1) < 5e-3
    for s in S_LIST:
        assert 0.2 <= res[s][0] <= res[s][1] <= 5


def test_sobolev_order_range(box, free_box_setup):
    tab, _, eng = free_box_setup
    with pytest.raises(InvalidArgument):
        sobolev_equivalence_ratios(tab, None, [gaussian(box)], [1.5], eng)
