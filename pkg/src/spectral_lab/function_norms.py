"""Lebesgue, weak Lebesgue, mixed space-time and homogeneous Sobolev norms on grids."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import InvalidArgument
from .quadrature import CartesianGrid, SpatialGrid


@dataclass(frozen=True)
class NormRequest:
    kind: str                     # "lebesgue", "lorentz-weak", "sobolev", "mixed"
    p: float = 2.0
    q: float = 2.0
    s: float = 0.0
    ir_cutoff: float | None = None

    def __post_init__(self):
        if self.kind not in ("lebesgue", "lorentz-weak", "sobolev", "mixed"):
            raise InvalidArgument(f"unknown norm kind {self.kind}")
        if not 1 <= self.p <= np.inf or not 1 <= self.q <= np.inf:
            raise InvalidArgument("exponents must lie in [1, inf]")
        if self.kind == "sobolev" and not -1.5 < self.s < 1.5:
            raise InvalidArgument("Sobolev order must lie in (-3/2, 3/2)")


def _weights(grid, shape):
    if isinstance(grid, CartesianGrid):
        return np.full(shape, grid.cell_volume)
    if isinstance(grid, SpatialGrid):
        return grid.weights.reshape(shape)
    return np.broadcast_to(np.asarray(grid, float), shape)


def lebesgue_norm(f, grid, p: float) -> float:
    if p < 1:
        raise InvalidArgument("p must be >= 1")
    a = np.abs(np.asarray(f))
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    w = _weights(grid, a.shape)
    return float(np.sum(w * a ** p) ** (1.0 / p))


def distribution_sup(values, weights, exponent: float) -> float:
    """sup over thresholds t of t * measure{|f| > t}^exponent for a weighted sample.

    Thresholds sit at geometric midpoints between consecutive distinct sample
    values, plus just below the smallest positive value.  A node weight stands
    for a whole cell, so thresholds right below a sample value would credit the
    full cell to the level set and overestimate steep profiles.
    """
    a = np.abs(np.asarray(values)).ravel().astype(float)
    w = np.broadcast_to(np.asarray(weights, float), np.asarray(values).shape).ravel()
    m = a > 0
    if not m.any():
        return 0.0
    a, w = a[m], w[m]
    order = np.argsort(-a, kind="stable")
    a, w = a[order], w[order]
    mass = np.cumsum(w)
    # values equal up to rounding form one level
    last = np.r_[a[1:] < a[:-1] * (1 - 1e-9), True]
    levels, cum = a[last], mass[last]
    best = levels[-1] * cum[-1] ** exponent
    if len(levels) > 1:
        mid = np.sqrt(levels[:-1] * levels[1:])
        best = max(best, float(np.max(mid * cum[:-1] ** exponent)))
    return float(best)


def lorentz_weak_norm(f, grid, p: float) -> float:
    """sup_t t * measure{|f| > t}^(1/p)."""
    if not 1 <= p < np.inf:
        raise InvalidArgument("p must lie in [1, inf)")
    f = np.asarray(f)
    return distribution_sup(f, _weights(grid, f.shape), 1.0 / p)


def mixed_norm(u, t_weights, grid, p: float, q: float) -> float:
    """L^p_t L^q_x norm of samples u[t, ...]."""
    u = np.asarray(u)
    inner = np.array([lebesgue_norm(ut, grid, q) for ut in u])
    return lebesgue_norm(inner, np.asarray(t_weights, float), p)


def fundamental_frequency(box: CartesianGrid) -> float:
    return np.pi / box.half_width


def sobolev_norm(f, box: CartesianGrid, s: float, ir_cutoff: float | None = None, pad: int = 1) -> float:
    """Homogeneous H^s norm via the discrete Fourier transform on the box.

    Modes below ``ir_cutoff`` (default: the box's fundamental frequency for
    s < 0, nothing otherwise) are dropped; the zero mode never counts for s != 0.
    """
    if not -1.5 < s < 1.5:
        raise InvalidArgument("Sobolev order must lie in (-3/2, 3/2)")
    f = np.asarray(f)
    n = box.points_per_axis
    if pad > 1:
        g = np.zeros((n * pad,) * 3, dtype=f.dtype)
        g[:n, :n, :n] = f
        f = g
    F = sfft.fftn(f)
    xi = box.frequencies(pad=pad)
    if ir_cutoff is None:
        ir_cutoff = fundamental_frequency(box) if s < 0 else 0.0
    keep = xi >= ir_cutoff
    if s != 0:
        keep &= xi > 0
    with np.errstate(divide="ignore"):
        wgt = np.where(keep, np.where(xi > 0, xi, 1.0) ** (2 * s), 0.0)
    total = np.sum(wgt * np.abs(F) ** 2) * box.cell_volume / f.size
    return float(np.sqrt(total))
