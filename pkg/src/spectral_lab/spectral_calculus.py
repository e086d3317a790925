"""Spectral multipliers of sqrt(H) restricted to the continuous subspace.

Kernels follow from the Stone formula: for real V the boundary values obey
R^-(l^2) = conj R^+(l^2), so the kernel of m(sqrt H) P_c is
(2/pi) * int_0^inf l m(l) Im R^+(l^2)(x, y) dl.  The bound-state poles of
R^+ sit at l = i mu_j with a real, even principal part, so they never enter
this integral.  Each kernel splits into the free part, done by dyadic
Gauss-Legendre blocks in log(l), and a remainder R_V - R_0 sampled on the
table's lambda grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from . import windows
from .cartesian import BoxConvolver, embed
from .errors import InvalidArgument, InvalidMultiplier, ResonanceError, TruncationError
from .function_norms import distribution_sup
from .resolvent import ResolventTable, SpectrumInfo, boundary_kappa

TWO_OVER_PI = 2.0 / np.pi
LN2 = np.log(2.0)


@dataclass(frozen=True)
class MultiplierSpec:
    """Symbol m(l) = l**power * smooth(l) on (0, inf).

    ``power`` isolates a non-smooth factor at l = 0 (an imaginary or
    negative power); ``smooth`` must be smooth and even-extendable.
    ``cutoff`` is an l beyond which m vanishes or is negligible.
    """

    smooth: Callable
    label: str = "multiplier"
    power: complex = 0.0
    s: float = 2.0
    k_range: tuple = (-6, 6)
    cutoff: float | None = None
    params: dict = field(default_factory=dict)

    def m(self, lam):
        lam = np.asarray(lam, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            pw = np.where(lam > 0, np.where(lam > 0, lam, 1.0) ** self.power, 0.0)
        if self.power == 0:
            pw = np.ones_like(lam)
        return pw * self.smooth(lam)

    def scaled_power(self, extra: float) -> "MultiplierSpec":
        return MultiplierSpec(self.smooth, self.label, self.power + extra, self.s, self.k_range,
                              self.cutoff, self.params)


def _ones(lam):
    return np.ones_like(np.asarray(lam, float), dtype=float)


def constant(c: float = 1.0) -> MultiplierSpec:
    return MultiplierSpec(lambda l: c * _ones(l), "constant", params={"c": c})


def imaginary_power(sigma: float = 1.0) -> MultiplierSpec:
    return MultiplierSpec(_ones, "imaginary-power", power=1j * sigma, params={"sigma": sigma})


def heat(t: float = 1.0) -> MultiplierSpec:
    return MultiplierSpec(lambda l: np.exp(-t * np.asarray(l, float) ** 2), "heat",
                          cutoff=np.sqrt(45.0 / t), params={"t": t})


def bochner_riesz(delta: float = 1.0, radius: float = 1.0) -> MultiplierSpec:
    def sm(l):
        x = 1.0 - (np.asarray(l, float) / radius) ** 2
        return np.where(x > 0, np.abs(x) ** delta, 0.0)
    return MultiplierSpec(sm, "bochner-riesz", cutoff=radius, params={"delta": delta, "radius": radius})


def wave_window(t: float = 1.0, k: int = 0) -> MultiplierSpec:
    return MultiplierSpec(lambda l: np.cos(t * np.asarray(l, float)) * windows.block(l, k), "wave-window",
                          cutoff=2.0 ** (k + 1), params={"t": t, "k": k})


def power_symbol(exponent: float) -> MultiplierSpec:
    """l**exponent (real), e.g. for Sobolev weights."""
    return MultiplierSpec(_ones, "power", power=exponent, params={"exponent": exponent})


REGISTRY = {
    "constant": constant,
    "imaginary-power": imaginary_power,
    "heat": heat,
    "bochner-riesz": bochner_riesz,
    "wave-window": wave_window,
}


def make_multiplier(name: str, **params) -> MultiplierSpec:
    try:
        return REGISTRY[name](**params)
    except KeyError:
        raise InvalidMultiplier(f"unknown multiplier '{name}'; known: {sorted(REGISTRY)}") from None


@dataclass
class KernelField:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    free: np.ndarray
    remainder: np.ndarray
    label: str
    alpha: float | None
    lam_max: float
    tail_error: np.ndarray

    @property
    def distances(self):
        return np.linalg.norm(self.xs - self.ys, axis=1)


# ----------------------------------------------------------------------------
# window norms

def hs_window_norm(spec: MultiplierSpec, k: int, samples: int = 4096) -> float:
    """H^s norm of l -> phi(l) m(2^k l), sampled on [1/4, 4] and zero-extended."""
    if spec.s <= 0:
        raise InvalidArgument("Sobolev order must be positive")
    L = 16.0
    x = np.linspace(-L / 2, L / 2, samples, endpoint=False)
    inside = (x > 0.25) & (x < 4.0)
    g = np.zeros(samples, complex)
    lam = x[inside]
    vals = windows.phi(lam) * spec.m(2.0 ** k * lam)
    if not np.all(np.isfinite(vals)):
        raise InvalidMultiplier(f"symbol is not finite on block {k}")
    g[inside] = vals
    dx = L / samples
    ghat = np.fft.fft(g) * dx
    xi = 2 * np.pi * np.fft.fftfreq(samples, d=dx)
    norm2 = np.sum((1 + xi ** 2) ** spec.s * np.abs(ghat) ** 2) / L
    return float(np.sqrt(norm2))


def mihlin_constant(spec: MultiplierSpec, k_range=None) -> float:
    ks = range(*(spec.k_range if k_range is None else k_range))
    return max(hs_window_norm(spec, k) for k in ks)


def window_transform_bounds(spec: MultiplierSpec, k: int, n: int = 8192):
    """Normalised sizes of the transform of g_k(l) = phi(2^-k |l|) l m(|l|).

    Returns (sup|g_k^(t)| / 2^(2k), ||g_k^ <2^k t>^s||_L2 / 2^(3k/2)); both
    stay bounded in k for symbols with finite window norms.
    """
    a = 2.0 ** k
    L = 64.0 * a
    lam = np.linspace(-L / 2, L / 2, n, endpoint=False)
    al = np.abs(lam)
    g = windows.phi(al / a) * lam * spec.m(al)
    g = np.where(np.isfinite(g), g, 0.0)
    dl = L / n
    t = 2 * np.pi * np.fft.fftfreq(n, d=dl)
    gh = np.fft.fft(g) * dl
    dt = 2 * np.pi / L
    sup = np.max(np.abs(gh))
    wl2 = np.sqrt(np.sum(np.abs(gh) ** 2 * (1 + (a * t) ** 2) ** spec.s) * dt)
    return sup / a ** 2, wl2 / a ** 1.5


# ----------------------------------------------------------------------------
# lambda quadrature

def power_weights(lam, p) -> np.ndarray:
    """Weights W with sum_i W_i g(l_i) ~ int_0^{l_N} l^p g(l) dl, g piecewise linear.

    The node l_0 = 0 carries no weight: its value is taken as the even
    extrapolation (4 g(l_1) - g(l_2)) / 3, folded into W_1 and W_2.
    """
    lam = np.asarray(lam, float)
    p = complex(p)
    if p.real <= -1:
        raise InvalidArgument("power must have real part > -1")
    a, b = lam[:-1], lam[1:]
    d = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        def mom(q):
            return (b ** (q + 1) - np.where(a > 0, a, 0.0) ** (q + 1)) / (q + 1)
        M0 = mom(p)
        M1 = mom(p + 1)
    w = np.zeros(len(lam), complex)
    w[:-1] += (b * M0 - M1) / d
    w[1:] += (M1 - a * M0) / d
    if lam[0] == 0.0 and len(lam) > 2:
        w0 = w[0]
        w[0] = 0.0
        w[1] += 4 * w0 / 3
        w[2] -= w0 / 3
    return w if p.imag != 0 else w.real


def stone_weights(spec: MultiplierSpec, lam) -> np.ndarray:
    """W with sum_i W_i Im F(l_i) ~ (2/pi) int_0^inf l m(l) Im F(l) dl, F(0) real.

    Symbols without a singular power give an even, smooth integrand, so the
    plain trapezoid rule on the uniform grid is used (it does not damp
    oscillating symbols).  Otherwise product integration handles l**power.
    """
    lam = np.asarray(lam, float)
    if spec.power == 0:
        d = lam[1] - lam[0]
        w = d * lam * spec.smooth(lam)
        w[-1] *= 0.5
        return TWO_OVER_PI * w
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
    return TWO_OVER_PI * power_weights(lam, 2 + complex(spec.power)) * spec.smooth(lam) * inv


def _lambda_taper(table: ResolventTable, lam):
    return windows.lowpass(lam, windows.taper_order(table.lambda_grid[-1]))


# ----------------------------------------------------------------------------
# free kernels

def free_radial_kernel(spec: MultiplierSpec, r, rtol: float = 1e-12, gl: int = 24):
    """Kernel of m(sqrt(-Delta)) at distance r: (1/(2 pi^2 r)) int l m(l) sin(l r) dl.

    Returns (value, tail_estimate).  Blocks phi(2^-k l) are integrated in
    u = log2(l) until they fall below rtol of the running sum.
    """
    r = float(r)
    if r <= 0:
        raise InvalidArgument("distance must be positive")
    t, wt = roots_legendre(gl)
    p = complex(spec.power)

    def integrand(u):
        lam = 2.0 ** u
        return lam ** (2 + p) * spec.smooth(lam) * np.sin(lam * r) * LN2

    def panel_sum(lo, hi, weight, n_pan):
        edges = np.linspace(lo, hi, n_pan + 1)
        half = 0.5 * np.diff(edges)
        u = (half[:, None] * (t + 1)[None, :] + edges[:-1, None]).ravel()
        w = (half[:, None] * wt[None, :]).ravel()
        return np.sum(w * weight(u) * integrand(u))

    k0 = int(np.floor(np.log2(1.0 / r))) - 4
    # low lump below 2^(k0+1); integrand ~ 2^(u(3+Re p)) there
    decay = 3.0 + p.real
    if decay <= 0:
        raise InvalidArgument("symbol too singular at the origin")
    u_min = k0 - 50.0 / decay
    total = panel_sum(u_min, k0 + 1, lambda u: windows.lowpass(2.0 ** u, k0), int(np.ceil(k0 + 1 - u_min)))
    small, k, tail = 0, k0 + 1, 0.0
    k_stop = None if spec.cutoff is None else int(np.ceil(np.log2(spec.cutoff))) + 1
    while True:
        n_pan = 1 + int(np.ceil(1.5 * 2.0 ** k * r / 3.0))
        c = panel_sum(k - 1, k + 1, lambda u: windows.phi(2.0 ** (u - k)), n_pan)
        total = total + c
        small = small + 1 if abs(c) < rtol * max(abs(total), 1e-300) else 0
        if small >= 3 and 2.0 ** k * r > 4:
            tail = abs(c)
            break
        if k_stop is not None and k > k_stop:
            tail = abs(c)
            break
        if n_pan > 40000:
            tail = abs(c)
            break
        k += 1
    pref = 1.0 / (2 * np.pi ** 2 * r)
    return pref * total, pref * tail


def _free_part(spec, r):
    vals, tails = [], []
    cache = {}
    for ri in r:
        key = float(ri)
        if key not in cache:
            cache[key] = free_radial_kernel(spec, key)
        vals.append(cache[key][0])
        tails.append(cache[key][1])
    return np.array(vals, complex), np.array(tails)


def _check_spectrum(table, spectrum):
    if spectrum is not None and spectrum.resonance_flag:
        raise ResonanceError("zero-energy resonance flagged; spectral multipliers are not defined")
    if table.sign != 1:
        raise InvalidArgument("kernel assembly needs the outgoing (+) table")


def _remainder_part(spec, table, xs, ys, p):
    """(2/pi) int l^(1+p) smooth(l) taper(l) Im[R_V - R_0](l^2) dl and a tail estimate."""
    lam = table.lambda_grid
    F = table.kernel_sweep(xs, ys, remainder=True).imag          # (n_lam, n_pairs)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(lam[:, None] > 0, F / np.where(lam > 0, lam, 1.0)[:, None], 0.0)
    W = power_weights(lam, 2 + p)
    K = windows.taper_order(lam[-1])
    base = TWO_OVER_PI * (W * spec.smooth(lam))[:, None] * h
    value = np.sum(base * windows.lowpass(lam, K)[:, None], axis=0)
    top = np.abs(np.sum(base * windows.block(lam, K)[:, None], axis=0))
    below = np.abs(np.sum(base * windows.block(lam, K - 1)[:, None], axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(below > 0, top / below, 1.0)
    tail = np.where(q < 0.8, top * q / (1 - q), 5 * top)
    return value, tail


def assemble_multiplier_kernel(spec: MultiplierSpec, table: ResolventTable, spectrum: SpectrumInfo | None,
                               pairs, tail_budget: float | None = 1e-4, _alpha=None) -> KernelField:
    """Kernel of m(sqrt H) P_c on a list of (x, y) pairs."""
    _check_spectrum(table, spectrum)
    xs = np.array([np.asarray(a, float) for a, _ in pairs])
    ys = np.array([np.asarray(b, float) for _, b in pairs])
    r = np.linalg.norm(xs - ys, axis=1)
    free, tail = _free_part(spec, r)
    if table.is_free:
        rem = np.zeros(len(r), complex)
    else:
        rem, rtail = _remainder_part(spec, table, xs, ys, complex(spec.power))
        tail = tail + rtail
    values = free + rem
    if tail_budget is not None:
        bad = tail > tail_budget * np.maximum(np.abs(values), 1e-300)
        if np.any(bad):
            i = int(np.argmax(tail / np.maximum(np.abs(values), 1e-300)))
            raise TruncationError(f"tail estimate {tail[i]:.3g} exceeds budget at |x-y|={r[i]:.3g} "
                                  f"(kernel {abs(values[i]):.3g}); extend lambda_max")
    return KernelField(xs, ys, values, free, rem, spec.label, _alpha, float(table.lambda_grid[-1]), tail)


def assemble_fractional_kernel(alpha: float, spec: MultiplierSpec, table: ResolventTable,
                               spectrum: SpectrumInfo | None, pairs, tail_budget: float | None = 1e-4) -> KernelField:
    """Kernel of H^(-alpha/2) m(sqrt H) P_c, 0 < alpha < 3."""
    if not 0 < alpha < 3:
        raise InvalidArgument("alpha must lie in (0, 3)")
    return assemble_multiplier_kernel(spec.scaled_power(-alpha), table, spectrum, pairs, tail_budget, alpha)


# ----------------------------------------------------------------------------
# operators on a CartesianGrid

def _box_of(table: ResolventTable):
    if table.grid.kind != "cartesian-box":
        raise InvalidArgument("operator application needs a table built on a cartesian support grid")
    return table.grid.meta["box"]


class BoxEngine:
    """Applies functions of sqrt(H) to grid functions on the box of a cartesian table."""

    def __init__(self, table: ResolventTable, spectrum: SpectrumInfo | None = None):
        _check_spectrum(table, spectrum)
        self.table = table
        self.spectrum = spectrum
        self.box = _box_of(table)
        self.conv = BoxConvolver(self.box)
        self.grid = table.grid
        self._modes = None

    # bound states on the box ---------------------------------------------
    def modes(self) -> np.ndarray:
        """Orthonormal eigenfunctions sampled on the box, shape (m, n, n, n)."""
        if self._modes is None:
            out = []
            sp = self.spectrum
            for e in ([] if sp is None else sp.bound_states):
                khat = self.conv.kernel_hat(complex(e.mu))
                for a in range(e.multiplicity):
                    rho = embed(self.box, self.grid, e.charges[:, a]) / self.box.cell_volume
                    out.append(-self.conv.convolve(khat, rho).real)
            self._modes = np.array(out).reshape((-1,) + self.box.shape)
        return self._modes

    def inner(self, f, g):
        return np.sum(f * np.conj(g)) * self.box.cell_volume

    def project_continuous(self, f):
        f = np.asarray(f)
        out = f.copy()
        for e in self.modes():
            out = out - self.inner(f, e) * e
        return out

    # the lambda sweep ----------------------------------------------------
    def lambda_sweep(self, fs, source: str = "resolvent", field: bool = True):
        """Yield (i, lam, correction) with correction = [R_V - R_0] applied to each f.

        ``source="dispersive"`` replaces R_0(l^2) f by (R_0(l^2) - R_0(0)) f / l^2.
        With ``field=False`` the correction is only the bilinear form
        <(R_V - R_0) f, f> per input.
        """
        table = self.table
        fhat = [self.conv.forward(f) for f in fs]
        k0 = self.conv.kernel_hat(0.0) if source == "dispersive" else None
        idx = self.grid.meta["flat_index"]
        v = table.operator.v
        h3 = self.box.cell_volume
        from scipy import linalg
        for i, lam in enumerate(table.lambda_grid):
            if lam == 0.0:
                continue
            kappa = boundary_kappa(lam, table.sign)
            khat = self.conv.kernel_hat(kappa)
            shat = (khat - k0) / lam ** 2 if source == "dispersive" else khat
            a = np.array([self.conv.apply_hat(shat, fh).reshape(-1)[idx] for fh in fhat]).T
            U = linalg.lu_solve(table.factor(i), a, check_finite=False)
            phi = v[:, None] * U
            if not field:
                # <R0 V U, f> = <V U, R0 f> on the support (symmetric kernel)
                yield i, lam, -np.sum(phi * a, axis=0) * h3
                continue
            corr = np.array([-self.conv.convolve(khat, embed(self.box, self.grid, phi[:, j]))
                             for j in range(len(fs))])
            yield i, lam, corr

    def apply(self, specs, fs, taper=None):
        """m(sqrt H) P_c f for every (spec, f) combination; returns (n_spec, n_f, n, n, n).

        ``taper`` (samples on the lambda grid) overrides the dyadic cutoff of
        the remainder integral.
        """
        specs = list(specs)
        fs = [np.asarray(f, float) for f in fs]
        lam = self.table.lambda_grid
        taper = _lambda_taper(self.table, lam) if taper is None else np.asarray(taper, float)
        W = np.array([stone_weights(s, lam) * taper for s in specs])
        complex_out = np.iscomplexobj(W)
        out = np.zeros((len(specs), len(fs)) + self.box.shape, complex if complex_out else float)
        for si, s in enumerate(specs):
            sym = _free_symbol(s)
            for fi, f in enumerate(fs):
                val = self.conv.multiplier(sym, f)
                out[si, fi] = val if complex_out else val.real
        if not self.table.is_free:
            for i, _, corr in self.lambda_sweep(fs):
                im = corr.imag
                for si in range(len(specs)):
                    if W[si, i] != 0:
                        out[si] += W[si, i] * im
        return out

    def quadratic_forms(self, fs, powers):
        """<H^s P_c f, f> for each f and each exponent s in ``powers`` -> (n_s, n_f)."""
        fs = [np.asarray(f, float) for f in fs]
        lam = self.table.lambda_grid
        taper = _lambda_taper(self.table, lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
        W = np.array([TWO_OVER_PI * power_weights(lam, 2 + 2 * s) * taper * inv for s in powers]).real
        out = np.array([[self.free_sobolev_sq(f, s) for f in fs] for s in powers])
        if not self.table.is_free:
            for i, _, b in self.lambda_sweep(fs, field=False):
                out += W[:, i][:, None] * b.imag[None, :]
        return out

    def free_sobolev_sq(self, f, s):
        from .function_norms import sobolev_norm
        return sobolev_norm(f, self.box, s) ** 2


def _free_symbol(spec: MultiplierSpec):
    def sym(xi):
        out = spec.m(xi).astype(complex)
        if spec.power != 0:
            out[xi == 0] = 0.0
        return out
    return sym


def apply_multiplier(spec: MultiplierSpec, table: ResolventTable, spectrum: SpectrumInfo | None, f):
    """m(sqrt H) P_c f on the box of a cartesian table."""
    box = _box_of(table)
    f = np.asarray(f, float)
    if f.shape != box.shape:
        raise InvalidArgument("f must be sampled on the table's box")
    out = BoxEngine(table, spectrum).apply([spec], [f])[0, 0]
    return out


def square_function(f, k_range, table: ResolventTable, spectrum: SpectrumInfo | None,
                    coverage_min: float = 0.99, engine: BoxEngine | None = None):
    """(sum_k |chi(2^-k sqrt H) f|^2)^(1/2) on the box, with the coverage check.

    Coverage is <sum_k chi_k(sqrt H) f, f> / ||P_c f||^2 (the chi_k sum to one).
    """
    res = square_functions([f], k_range, table, spectrum, coverage_min, engine)
    return res[0][0], res[1][0]


def square_functions(fs, k_range, table, spectrum, coverage_min: float = 0.99, engine=None):
    eng = engine or BoxEngine(table, spectrum)
    ks = list(range(k_range[0], k_range[1] + 1))
    if not ks:
        raise InvalidArgument("empty k range")
    specs = [MultiplierSpec(lambda l, k=k: windows.chi(np.asarray(l, float) * 2.0 ** (-k)),
                            f"chi_{k}", cutoff=3 * 2.0 ** k) for k in ks]
    blocks = eng.apply(specs, fs)             # (n_k, n_f, ...)
    S = np.sqrt(np.sum(np.abs(blocks) ** 2, axis=0))
    cover = []
    for j, f in enumerate(fs):
        pc = eng.project_continuous(f)
        tot = np.sum(blocks[:, j], axis=0)
        c = float(np.real(eng.inner(tot, f)) / np.real(eng.inner(pc, pc)))
        cover.append(c)
        if c < coverage_min:
            from .errors import NumericalError
            raise NumericalError(f"k range {k_range} covers only {c:.4f} of the spectral mass")
    return S, np.array(cover)


def weak_type_ratio(spec: MultiplierSpec, table: ResolventTable, spectrum: SpectrumInfo | None, f_family,
                    engine: BoxEngine | None = None) -> float:
    """max over f of sup_t t |{|m(sqrt H) f| > t}| / ||f||_1 on the box."""
    eng = engine or BoxEngine(table, spectrum)
    fs = [np.asarray(f, float) for f in f_family]
    out = eng.apply([spec], fs)[0]
    h3 = eng.box.cell_volume
    best = 0.0
    for f, g in zip(fs, out):
        l1 = np.sum(np.abs(f)) * h3
        best = max(best, distribution_sup(g, h3, 1.0) / l1)
    return best
