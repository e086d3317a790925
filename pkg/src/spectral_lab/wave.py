"""Wave propagators of H = -Delta + V: time kernels, evolution and dispersive checks.

Transform convention: F g(t) = int_R exp(-i t l) g(l) dl.  With it

    F[R_0^+(l^2)](t, x, y) = delta(t - r) / (2 r),        r = |x - y|,
    F[-P / (l^2 + mu^2)](t) = -pi P exp(-mu |t|) / mu,

and the sine kernel is S(t) = (F(t) - F(-t)) / (2 pi), i.e.
sin(t sqrt H)/sqrt H P_c has kernel [delta(t - r) - delta(t + r)] / (4 pi r)
plus a smooth remainder.  The pole terms are even in t and drop out of S.
The smooth remainder comes from the lambda-table through the full-line
trapezoid rule, which is exact up to aliasing for |t| < pi / dlambda.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.special import erfc

from .errors import AliasingError, InvalidArgument
from .function_norms import lebesgue_norm, mixed_norm, sobolev_norm
from .quadrature import CartesianGrid, build_ball_grid
from .resolvent import FOUR_PI, ResolventTable, SpectrumInfo, projection_kernels
from .spectral_calculus import BoxEngine, MultiplierSpec, _check_spectrum

TWO_PI = 2 * np.pi


def _guard(table: ResolventTable, t):
    t = np.abs(np.asarray(t, float))
    if t.size and t.max() > table.t_max * (1 + 1e-12):
        raise AliasingError(f"t = {t.max():.4g} beyond the resolvable window pi/dlambda = {table.t_max:.4g}")


def time_taper(lam):
    """Gaussian-type cutoff at 0.55 lambda_max (width 0.15 lambda_max) for time transforms.

    Its transform decays like a Gaussian in t, so features of the remainder
    at the light cone do not leak into the interior of the cone.
    """
    lam = np.asarray(lam, float)
    top = lam[-1]
    return 0.5 * erfc((lam - 0.55 * top) / (0.15 * top))


def _uniform_from_zero(lam):
    lam = np.asarray(lam, float)
    d = np.diff(lam)
    if lam[0] != 0.0 or np.ptp(d) > 1e-9 * d[0]:
        raise InvalidArgument("time transforms need a uniform lambda grid starting at 0")
    return d[0]


# ----------------------------------------------------------------------------
# time kernels

@dataclass
class TimeKernelDecomposition:
    """Sine-propagator kernel split into light-cone delta, pole terms and smooth part.

    ``free_weight[p]`` multiplies delta(t - r_p) - delta(t + r_p).
    ``poles`` holds (mu_j, P_j(x_p, y_p)) pairs; they enter only the transform
    of the resolvent, not the sine kernel.  ``smooth`` is sampled at ``t``.
    """

    xs: np.ndarray
    ys: np.ndarray
    t: np.ndarray
    free_weight: np.ndarray
    poles: list
    smooth: np.ndarray                  # (n_t, n_pairs)
    lam: np.ndarray = field(repr=False)
    weighted: np.ndarray = field(repr=False)   # trapezoid weight * taper * pole-subtracted remainder

    @property
    def distance(self):
        return np.linalg.norm(self.xs - self.ys, axis=1)

    @property
    def values(self):
        return self.smooth

    def sine(self, t):
        """Smooth part of the sine kernel at arbitrary times, (n_t, n_pairs)."""
        t = np.atleast_1d(np.asarray(t, float))
        return (2 / np.pi) * np.sin(np.outer(t, self.lam)) @ self.weighted.imag

    def transform(self, t):
        """Non-delta part of F[R_V^+(l^2)](t) (pole terms included), (n_t, n_pairs)."""
        t = np.atleast_1d(np.asarray(t, float))
        out = 2 * np.real(np.exp(-1j * np.outer(t, self.lam)) @ self.weighted)
        for mu, P in self.poles:
            out -= np.pi * np.exp(-mu * np.abs(t))[:, None] * P[None, :] / mu
        return out


def _decompose(table: ResolventTable, spectrum: SpectrumInfo | None, xs, ys):
    lam = table.lambda_grid
    d = _uniform_from_zero(lam)
    xs = np.atleast_2d(np.asarray(xs, float))
    ys = np.atleast_2d(np.asarray(ys, float))
    r = np.linalg.norm(xs - ys, axis=1)
    poles = []
    if table.is_free:
        g = np.zeros((len(lam), len(r)), complex)
    else:
        g = table.kernel_sweep(xs, ys, remainder=True)
        if spectrum is not None and spectrum.bound_states:
            P = projection_kernels(spectrum, xs, ys)
            for mu, Pj in zip(spectrum.mus, P):
                poles.append((float(mu), Pj))
                g = g + Pj[None, :] / (lam[:, None] ** 2 + mu ** 2)
    w = d * time_taper(lam)
    w[0] *= 0.5
    return lam, w[:, None] * g, r, poles


def sine_propagator_kernel(table: ResolventTable, spectrum: SpectrumInfo | None, x, y,
                           t_grid) -> TimeKernelDecomposition:
    """Kernel of sin(t sqrt H)/sqrt H P_c at the pairs (x_p, y_p) and times t_grid."""
    _check_spectrum(table, spectrum)
    t = np.atleast_1d(np.asarray(t_grid, float))
    _guard(table, t)
    lam, weighted, r, poles = _decompose(table, spectrum, x, y)
    dec = TimeKernelDecomposition(np.atleast_2d(np.asarray(x, float)), np.atleast_2d(np.asarray(y, float)),
                                  t, 1.0 / (FOUR_PI * r), poles, None, lam, weighted)
    dec.smooth = dec.sine(t)
    return dec


def _time_grid(table: ResolventTable, t_end=None):
    lam_max = table.lambda_grid[-1]
    t_end = table.t_max if t_end is None else t_end
    n = int(np.ceil(t_end * 4 * lam_max / np.pi)) + 1
    return np.linspace(0.0, t_end, n)


def _trapezoid(t):
    w = np.ones(1)
    if len(t) > 1:
        w = np.empty_like(t)
        dt = np.diff(t)
        w[0], w[-1] = dt[0] / 2, dt[-1] / 2
        w[1:-1] = (dt[:-1] + dt[1:]) / 2
    return w


def integrated_sine_profile(table, spectrum, pairs, t_end=None) -> np.ndarray:
    """|x - y| * int_R |sine kernel| dt for each pair (delta terms count their weight)."""
    xs = np.array([a for a, _ in pairs], float)
    ys = np.array([b for _, b in pairs], float)
    r = np.linalg.norm(xs - ys, axis=1)
    if np.any(r < 0.3 - 1e-12) or np.any(r > 0.8 * table.t_max):
        raise AliasingError(f"pair distances must lie in [0.3, {0.8 * table.t_max:.4g}]")
    t = _time_grid(table, t_end)
    dec = sine_propagator_kernel(table, spectrum, xs, ys, t)
    smooth = 2 * (_trapezoid(t) @ np.abs(dec.smooth))
    return r * (2 * dec.free_weight + smooth)


def integrated_sine_bound(table, spectrum, pairs, t_end=None) -> float:
    """max over pairs of |x - y| * int |sin(t sqrt H)/sqrt H P_c(x, y)| dt."""
    return float(np.max(integrated_sine_profile(table, spectrum, pairs, t_end)))


def conical_ratios(table, spectrum, y, t_list, nodes: int = 400) -> np.ndarray:
    """(1/t) int_{|x-y|<=t} |F[R_V^+(l^2)](t, x, y)| dx for each t.

    The light-cone delta contributes its shell integral 2 pi t exactly; the
    rest is integrated on a ball grid around y.
    """
    _check_spectrum(table, spectrum)
    t_list = np.atleast_1d(np.asarray(t_list, float))
    if np.any(t_list <= 0):
        raise InvalidArgument("t must be positive")
    _guard(table, t_list)
    y = np.asarray(y, float)
    if not table.is_free and np.linalg.norm(y - table.grid.center) < table.potential.support_radius:
        raise InvalidArgument("y must lie outside supp V")
    if table.is_free:
        return np.full(len(t_list), TWO_PI)
    grids = [build_ball_grid(t, nodes, center=y) for t in t_list]
    xs = np.vstack([g.nodes for g in grids])
    dec = sine_propagator_kernel(table, spectrum, xs, np.broadcast_to(y, xs.shape), [])
    out, start = [], 0
    for t, g in zip(t_list, grids):
        sl = slice(start, start + len(g.weights))
        start = sl.stop
        sub = TimeKernelDecomposition(dec.xs[sl], dec.ys[sl], np.array([t]), dec.free_weight[sl],
                                      [(mu, P[sl]) for mu, P in dec.poles], None, dec.lam, dec.weighted[:, sl])
        F = sub.transform([t])[0]
        out.append(TWO_PI + np.sum(g.weights * np.abs(F)) / t)
    return np.array(out)


def conical_bound_check(table, spectrum, y, t_list, nodes: int = 400) -> float:
    return float(np.max(conical_ratios(table, spectrum, y, t_list, nodes)))


# ----------------------------------------------------------------------------
# evolution on the box

def cos_symbol(t: float) -> MultiplierSpec:
    return MultiplierSpec(lambda l: np.cos(t * np.asarray(l, float)), "cos", params={"t": t})


def sinc_symbol(t: float) -> MultiplierSpec:
    """sin(t l) / l, with value t at l = 0."""
    def sm(l):
        l = np.asarray(l, float)
        return t * np.sinc(t * l / np.pi)
    return MultiplierSpec(sm, "sin-over-l", params={"t": t})


def lsin_symbol(t: float) -> MultiplierSpec:
    """-l sin(t l), the time derivative of cos(t l)."""
    return MultiplierSpec(lambda l: -np.asarray(l, float) * np.sin(t * np.asarray(l, float)), "-l-sin",
                          params={"t": t})


@dataclass
class WaveSolution:
    t: np.ndarray
    u: np.ndarray               # (n_t, n, n, n)
    ut: np.ndarray
    box: CartesianGrid
    u0: np.ndarray
    u1: np.ndarray
    forcing: object = None
    potential_values: np.ndarray | None = None

    def energy(self) -> np.ndarray:
        """<H u, u> + ||u_t||^2 per time; u is already in the continuous subspace."""
        h3 = self.box.cell_volume
        k = self.box.frequencies(pad=1)
        out = []
        for u, ut in zip(self.u, self.ut):
            grad = np.sum(k ** 2 * np.abs(sfft.fftn(u)) ** 2) / u.size * h3
            pot = 0.0 if self.potential_values is None else np.sum(self.potential_values * u ** 2) * h3
            out.append(grad + pot + np.sum(ut ** 2) * h3)
        return np.array(out)

    def energy_drift(self) -> float:
        e = self.energy()
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def _box_data(box, f):
    if f is None:
        return np.zeros(box.shape)
    f = np.asarray(f, float)
    if f.shape != box.shape:
        raise InvalidArgument("data must be sampled on the table's box")
    return f


def evolve(table: ResolventTable, spectrum: SpectrumInfo | None, u0, u1=None, F=None, t_grid=(0.0,),
           engine: BoxEngine | None = None) -> WaveSolution:
    """Solve u_tt + H u = F with P_c applied to all data, by spectral multipliers.

    ``F`` is an array (n_t, n, n, n) on ``t_grid`` or a callable t -> array;
    the Duhamel integral uses the trapezoid rule on a uniform t_grid from 0.
    """
    eng = engine or BoxEngine(table, spectrum)
    box = eng.box
    t = np.atleast_1d(np.asarray(t_grid, float))
    _guard(table, t)
    u0, u1 = _box_data(box, u0), _box_data(box, u1)
    fs = [u0, u1]
    if F is not None:
        if len(t) < 2 or t[0] != 0 or np.ptp(np.diff(t)) > 1e-9 * (t[1] - t[0]):
            raise InvalidArgument("forcing needs a uniform t_grid starting at 0")
        Fs = np.array([_box_data(box, F(s)) for s in t]) if callable(F) else np.asarray(F, float)
        if Fs.shape != (len(t),) + box.shape:
            raise InvalidArgument("forcing samples must have shape (n_t, n, n, n)")
        fs += list(Fs)
    nt = len(t)
    specs = [cos_symbol(s) for s in t] + [sinc_symbol(s) for s in t] + [lsin_symbol(s) for s in t]
    out = eng.apply(specs, fs, taper=time_taper(table.lambda_grid))
    C, S, L = out[:nt], out[nt:2 * nt], out[2 * nt:]
    u = C[:, 0] + S[:, 1]
    ut = L[:, 0] + C[:, 1]
    if F is not None:
        dt = t[1] - t[0]
        for k in range(1, nt):
            w = np.full(k + 1, dt)
            w[0] = w[-1] = dt / 2
            # time lag t_k - s_j = t_{k-j}
            for j in range(k + 1):
                u[k] += w[j] * S[k - j, 2 + j]
                ut[k] += w[j] * C[k - j, 2 + j]
    vvals = table.potential(box.points()).reshape(box.shape)
    return WaveSolution(t, u, ut, box, u0, u1, F, vvals)


def free_dispersive_hat(conv, t: float):
    """Padded-FFT symbol of 1_{t<r<Rc}/(4 pi r), the kernel of cos(t|D|)(-Delta)^-1 cut at Rc."""
    Rc = conv.m * conv.box.spacing / 2
    xi = conv.xi
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (np.cos(xi * t) - np.cos(xi * Rc)) / xi ** 2
    out[xi == 0] = (Rc ** 2 - t ** 2) / 2
    return out


def dispersive_fields(table: ResolventTable, spectrum: SpectrumInfo | None, fs, t_list,
                      engine: BoxEngine | None = None) -> np.ndarray:
    """cos(t sqrt H) P_c (-Delta)^-1 f on the box for each t and f: (n_t, n_f, n, n, n)."""
    eng = engine or BoxEngine(table, spectrum)
    t_list = np.atleast_1d(np.asarray(t_list, float))
    _guard(table, t_list)
    fs = [np.asarray(f, float) for f in fs]
    conv = eng.conv
    out = np.array([[conv.apply_hat(free_dispersive_hat(conv, t), conv.forward(f)).real for f in fs]
                    for t in t_list])
    if table.is_free:
        return out
    lam = table.lambda_grid
    d = _uniform_from_zero(lam)
    taper = time_taper(lam)
    # the integrand l cos(t l) Im corr(l) is even and finite at 0
    acc = np.zeros_like(out)
    first = {}
    for i, l, corr in eng.lambda_sweep(fs, source="dispersive"):
        g = l * corr.imag
        if i in (1, 2):
            first[i] = g
        w = d * taper[i] * (0.5 if i == len(lam) - 1 else 1.0)
        acc += (2 / np.pi) * w * np.cos(t_list * l)[:, None, None, None, None] * g[None]
    if 1 in first and 2 in first:
        g0 = (4 * first[1] - first[2]) / 3
        acc += (2 / np.pi) * 0.5 * d * taper[0] * g0[None]
    return out + acc


def dispersive_decay_check(table, spectrum, f_family, t_list, engine=None, return_all: bool = False):
    """max over f and t of |t| ||cos(t sqrt H) P_c (-Delta)^-1 f||_inf / ||f||_1."""
    eng = engine or BoxEngine(table, spectrum)
    fields = dispersive_fields(table, spectrum, f_family, t_list, eng)
    t_list = np.atleast_1d(np.asarray(t_list, float))
    ratios = np.zeros((len(t_list), len(f_family)))
    for j, f in enumerate(f_family):
        l1 = lebesgue_norm(f, eng.box, 1)
        for i, t in enumerate(t_list):
            ratios[i, j] = abs(t) * np.max(np.abs(fields[i, j])) / l1
    return ratios if return_all else float(ratios.max())


# ----------------------------------------------------------------------------
# Strichartz and Sobolev checks

def check_admissible(p: float, q: float, s: float, tol: float = 1e-9):
    if np.isinf(q):
        raise InvalidArgument("q = inf is excluded (the (2, inf) endpoint fails in three dimensions)")
    if p < 2 or q < 2:
        raise InvalidArgument("wave-admissible exponents need p, q >= 2")
    if abs(1 / p + 3 / q - (1.5 - s)) > tol:
        raise InvalidArgument(f"scaling condition 1/p + 3/q = 3/2 - s fails: {1 / p + 3 / q:.6g} vs {1.5 - s:.6g}")
    if 2 / p + 2 / q > 1 + tol:
        raise InvalidArgument(f"wave admissibility 2/p + 2/q <= 1 fails: {2 / p + 2 / q:.6g}")


def strichartz_ratio(solutions, p: float, q: float, s: float, ir_cutoff: float | None = None):
    """||u||_{L^p_t L^q_x} / (||u0||_{H^s} + ||u1||_{H^(s-1)}) on the t-grid and box.

    Returns a float for one solution, an array for a sequence.
    """
    check_admissible(p, q, s)
    single = isinstance(solutions, WaveSolution)
    sols = [solutions] if single else list(solutions)
    out = []
    for sol in sols:
        num = mixed_norm(sol.u, _trapezoid(sol.t), sol.box, p, q)
        den = sobolev_norm(sol.u0, sol.box, s, ir_cutoff) + sobolev_norm(sol.u1, sol.box, s - 1, ir_cutoff)
        out.append(num / den)
    return out[0] if single else np.array(out)


def sobolev_equivalence_ratios(table, spectrum, f_family, s_list, engine=None) -> np.ndarray:
    """||H^(s/2) P_c f|| / ||(-Delta)^(s/2) P_c f|| per (s, f)."""
    s_list = [float(s) for s in s_list]
    for s in s_list:
        if not -1.5 < s < 1.5:
            raise InvalidArgument("s must lie in (-3/2, 3/2)")
    eng = engine or BoxEngine(table, spectrum)
    fs = [np.asarray(f, float) for f in f_family]
    num = eng.quadratic_forms(fs, s_list)
    pcs = [eng.project_continuous(f).real for f in fs]
    den = np.array([[sobolev_norm(g, eng.box, s) for g in pcs] for s in s_list])
    return np.sqrt(np.maximum(num, 0.0)) / den


def sobolev_equivalence_check(table, spectrum, f_family, s_list, engine=None) -> dict:
    """{s: (min ratio, max ratio)} over the family."""
    R = sobolev_equivalence_ratios(table, spectrum, f_family, s_list, engine)
    return {float(s): (float(r.min()), float(r.max())) for s, r in zip(s_list, R)}
