"""Compactly supported potentials and the scaling-critical norms used to classify them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgument
from .function_norms import distribution_sup
from .quadrature import SpatialGrid, ball_probe_matrix, integrate_singular


@dataclass(frozen=True)
class Potential:
    """Real potential V on R^3, zero outside the ball of radius ``support_radius``."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    label: str = "potential"
    params: dict = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        r = np.linalg.norm(pts, axis=1)
        v = np.asarray(self.evaluator(pts), float)
        return np.where(r <= self.support_radius, v, 0.0)

    @property
    def is_zero(self) -> bool:
        return bool(self.params.get("zero", False))


def _radius(p):
    return np.linalg.norm(p, axis=1)


def _smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, float)
    def f(x):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    a, b = f(u), f(1.0 - u)
    return a / (a + b)


def zero_potential(radius: float = 1.0) -> Potential:
    return Potential(lambda p: np.zeros(len(p)), radius, "zero", {"zero": True})


def square_well(amplitude: float, radius: float = 1.0) -> Potential:
    """amplitude times the indicator of the ball of given radius (negative = attractive)."""
    return Potential(lambda p: np.full(len(p), float(amplitude)), radius, "square-well",
                     {"amplitude": amplitude, "radius": radius, "constant": True})


def square_well_levels(amplitude: float, radius: float = 1.0) -> list:
    """Decay rates mu of the radial (l = 0) bound states of amplitude * 1_B(0, radius).

    Roots of k cos(kR) + sqrt(q^2 - k^2) sin(kR) with q^2 = -amplitude,
    returned as mu = sqrt(q^2 - k^2), largest first.
    """
    from scipy.optimize import brentq
    if amplitude >= 0:
        return []
    q = np.sqrt(-amplitude)

    def f(k):
        return k * np.cos(k * radius) + np.sqrt(max(q * q - k * k, 0.0)) * np.sin(k * radius)

    ks = np.linspace(1e-12, q, 4000)
    vals = np.array([f(k) for k in ks])
    roots = [brentq(f, a, b, xtol=1e-15) for a, b, fa, fb in zip(ks[:-1], ks[1:], vals[:-1], vals[1:])
             if fa * fb < 0]
    return [float(np.sqrt(q * q - k * k)) for k in roots if k < q * (1 - 1e-12)]


def smooth_bump(amplitude: float, radius: float = 1.0) -> Potential:
    def ev(p):
        s = (_radius(p) / radius) ** 2
        out = np.zeros(len(p))
        m = s < 1
        out[m] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[m]))
        return out
    return Potential(ev, radius, "smooth-bump", {"amplitude": amplitude, "radius": radius})


def gaussian_bump(amplitude: float, width: float = 0.4, radius: float = 1.0) -> Potential:
    """Gaussian exp(-|x|^2/(2 width^2)) rolled off smoothly over the outer fifth."""
    def ev(p):
        r = _radius(p)
        return amplitude * np.exp(-r ** 2 / (2 * width ** 2)) * (1.0 - _smooth_step((r / radius - 0.8) / 0.2))
    return Potential(ev, radius, "gaussian-bump", {"amplitude": amplitude, "width": width, "radius": radius})


def smooth_annulus(amplitude: float, inner: float = 0.4, radius: float = 1.0) -> Potential:
    mid, half = 0.5 * (inner + radius), 0.5 * (radius - inner)
    def ev(p):
        s = ((_radius(p) - mid) / half) ** 2
        out = np.zeros(len(p))
        m = s < 1
        out[m] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[m]))
        return out
    return Potential(ev, radius, "smooth-annulus", {"amplitude": amplitude, "inner": inner, "radius": radius})


def double_bump(amplitude: float, offset: float = 0.5, width: float = 0.45, radius: float = 1.0) -> Potential:
    """Two smooth bumps of opposite sign centred at +-offset on the x axis."""
    def ev(p):
        out = np.zeros(len(p))
        for sgn in (1.0, -1.0):
            s = (np.linalg.norm(p - np.array([sgn * offset, 0, 0]), axis=1) / width) ** 2
            m = s < 1
            out[m] += sgn * amplitude * np.exp(1.0 - 1.0 / (1.0 - s[m]))
        return out
    return Potential(ev, radius, "double-bump",
                     {"amplitude": amplitude, "offset": offset, "width": width, "radius": radius})


def truncated_inverse_square(cap: float = 100.0, radius: float = 1.0) -> Potential:
    """min(|x|^-2, cap) on the ball."""
    def ev(p):
        r = _radius(p)
        with np.errstate(divide="ignore"):
            return np.minimum(np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0) ** 2, np.inf), cap)
    return Potential(ev, radius, "inverse-square", {"cap": cap, "radius": radius})


def scaled(V: Potential, s: float) -> Potential:
    """The critically rescaled potential s^2 V(s x)."""
    return Potential(lambda p: s * s * V.evaluator(s * np.asarray(p)), V.support_radius / s,
                     f"{V.label}*{s:g}", dict(V.params, scale=s))


LIBRARY = {
    "zero": zero_potential,
    "square-well": square_well,
    "smooth-bump": smooth_bump,
    "gaussian-bump": gaussian_bump,
    "smooth-annulus": smooth_annulus,
    "double-bump": double_bump,
    "inverse-square": truncated_inverse_square,
}


def make_potential(name: str, **params) -> Potential:
    try:
        factory = LIBRARY[name]
    except KeyError:
        raise InvalidArgument(f"unknown potential '{name}'; known: {sorted(LIBRARY)}") from None
    return factory(**params)


@dataclass(frozen=True)
class NormReport:
    kato: float
    modified_kato: float
    lorentz32: float
    sup_location: tuple


def default_probes(grid: SpatialGrid) -> np.ndarray:
    return np.vstack([grid.center[None, :], grid.nodes])


def _singular_integrals(values, grid, probes):
    """Integrals of values[l](z)/|z - y_p| for every probe p and row l (ball grids)."""
    values = np.atleast_2d(values)
    if grid.kind != "nystrom-ball":
        return np.array([[integrate_singular(v, y, grid) for v in values] for y in probes])
    inv, nearest, exact = ball_probe_matrix(grid, probes)
    wv = values * grid.weights[None, :]
    smooth = inv @ wv.T                         # (P, L)
    c = values[:, nearest].T                    # (P, L)
    return smooth - c * (inv @ grid.weights)[:, None] + c * exact[:, None]


def kato_norm(V: Potential, grid: SpatialGrid, probes=None, return_location=False):
    """sup over probes y of the integral of |V(z)|/|z - y|."""
    probes = default_probes(grid) if probes is None else np.atleast_2d(np.asarray(probes, float))
    if probes.size == 0:
        raise InvalidArgument("probe set is empty")
    absv = np.abs(V(grid.nodes))
    vals = _singular_integrals(absv, grid, probes)[:, 0]
    k = int(np.argmax(vals))
    out = float(max(vals[k], 0.0))
    return (out, tuple(probes[k])) if return_location else out


def default_shell_range(grid: SpatialGrid):
    lo = int(np.floor(np.log2(grid.spacing)))
    hi = int(np.ceil(np.log2(2 * grid.support_radius)))
    return range(lo, hi + 1)


def modified_kato_norm(V: Potential, grid: SpatialGrid, probes=None, shell_range=None,
                       centers=None) -> float:
    """sup over centres x of the sum over dyadic shells around x of the Kato norm
    of V restricted to that shell.

    The lowest shell also absorbs the ball inside it, so the sum covers all of
    supp V.  ``centers`` defaults to every 4th probe.
    """
    probes = default_probes(grid) if probes is None else np.atleast_2d(np.asarray(probes, float))
    shells = list(default_shell_range(grid) if shell_range is None else shell_range)
    if not shells:
        raise InvalidArgument("shell_range is empty")
    if probes.size == 0:
        raise InvalidArgument("probe set is empty")
    centers = probes[::4] if centers is None else np.atleast_2d(np.asarray(centers, float))
    absv = np.abs(V(grid.nodes))
    if not absv.any():
        return 0.0
    lo, hi = shells[0], shells[-1]
    best = 0.0
    for x in centers:
        d = np.linalg.norm(grid.nodes - x, axis=1)
        with np.errstate(divide="ignore"):
            ell = np.floor(np.log2(np.where(d > 0, d, 2.0 ** lo)))
        ell = np.clip(ell, lo, None)
        rows = [absv * (ell == e) for e in shells]
        rows = [r for r in rows if r.any()]
        if (ell > hi).any() and (absv * (ell > hi)).any():
            rows.append(absv * (ell > hi))
        vals = _singular_integrals(np.array(rows), grid, probes)
        best = max(best, float(np.sum(np.max(vals, axis=0))))
    return best


def lorentz32_quasinorm(V: Potential, grid: SpatialGrid) -> float:
    """Weak-L^{3/2} quasinorm sup_t t * |{|V| > t}|^{2/3} on the grid measure."""
    return distribution_sup(V(grid.nodes), grid.weights, 2.0 / 3.0)


def norm_report(V: Potential, grid: SpatialGrid, probes=None) -> NormReport:
    k, loc = kato_norm(V, grid, probes, return_location=True)
    return NormReport(k, modified_kato_norm(V, grid, probes), lorentz32_quasinorm(V, grid), loc)
