"""Smooth dyadic partition of unity on (0, inf)."""
from __future__ import annotations

import numpy as np


def _f(x):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def smooth_step(u):
    """C-infinity step rising from 0 at u = 0 to 1 at u = 1."""
    u = np.asarray(u, float)
    a, b = _f(u), _f(1.0 - u)
    return a / (a + b)


def _log2(lam):
    lam = np.asarray(lam, float)
    with np.errstate(divide="ignore"):
        return np.where(lam > 0, np.log2(np.where(lam > 0, lam, 1.0)), -np.inf)


def phi(lam):
    """Dyadic window supported on [1/2, 2]; its dilates 2^k sum to one."""
    u = _log2(lam)
    u = np.where(np.isfinite(u), u, -10.0)
    return smooth_step(u + 1.0) - smooth_step(u)


def block(lam, k: int):
    """phi(2^-k lam)."""
    return phi(np.asarray(lam, float) * 2.0 ** (-k))


def lowpass(lam, K: int):
    """Sum of the blocks k <= K: 1 below 2^K, 0 above 2^(K+1)."""
    u = _log2(lam)
    u = np.where(np.isfinite(u), u, -np.inf)
    return 1.0 - smooth_step(np.where(np.isfinite(u), u - K, -1.0))


def highpass(lam, K: int):
    """Sum of the blocks k > K."""
    return 1.0 - lowpass(lam, K)


def chi(lam):
    """Square-function window phi(lam / sqrt 2), supported in [2^-1/2, 2^3/2]."""
    return phi(np.asarray(lam, float) / np.sqrt(2.0))


def taper_order(lam_max: float) -> int:
    """Largest K with the lowpass lump vanishing before lam_max."""
    return int(np.floor(np.log2(lam_max))) - 1
