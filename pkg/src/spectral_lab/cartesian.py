"""FFT machinery for the free resolvent and free multipliers on a CartesianGrid.

Convolutions use a box zero-padded to twice its width, so products of the
sampled kernel are linear (not cyclic) convolutions for points in the box.
The sampled kernel matches the cartesian Nystrom matrix, including the
exact self-cell value at zero displacement.
"""
from __future__ import annotations

import os

import numpy as np
from scipy import fft as sfft

from .errors import InvalidArgument
from .potentials import Potential
from .quadrature import CartesianGrid, SpatialGrid, yukawa_cell

FOUR_PI = 4 * np.pi
WORKERS_ENV = "SPECTRAL_LAB_WORKERS"


def workers() -> int:
    """FFT worker count from the environment (default 1)."""
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise InvalidArgument(f"{WORKERS_ENV} must be an integer") from None


def support_grid(box: CartesianGrid, V: Potential) -> SpatialGrid:
    if box.half_width < 3 * V.support_radius * (1 - 1e-12):
        raise InvalidArgument("box must contain supp V with a margin of one diameter")
    mask = np.linalg.norm(box.points(), axis=1) < V.support_radius
    return box.support_grid(mask.reshape(box.shape), V.support_radius)


class BoxConvolver:
    """Linear convolution with radial kernels on a CartesianGrid."""

    def __init__(self, box: CartesianGrid):
        self.box = box
        n = box.points_per_axis
        self.m = 2 * n
        d = box.spacing * np.fft.fftfreq(self.m, d=1.0 / self.m)
        DX, DY, DZ = np.meshgrid(d, d, d, indexing="ij")
        self.r = np.sqrt(DX ** 2 + DY ** 2 + DZ ** 2)
        self.r[0, 0, 0] = 1.0
        self.xi = box.frequencies(pad=2)

    def kernel_hat(self, kappa):
        """FFT of the sampled free resolvent kernel exp(-kappa r)/(4 pi r), times h^3."""
        k = complex(kappa)
        K = np.exp(-k * self.r) / (FOUR_PI * self.r)
        K[0, 0, 0] = yukawa_cell(self.box.spacing, k) / self.box.cell_volume
        return sfft.fftn(K, workers=workers()) * self.box.cell_volume

    def radial_hat(self, profile, center_value):
        K = profile(self.r)
        K[0, 0, 0] = center_value
        return sfft.fftn(K, workers=workers()) * self.box.cell_volume

    def pad(self, f):
        n = self.box.points_per_axis
        out = np.zeros((self.m,) * 3, dtype=np.result_type(f, float))
        out[:n, :n, :n] = f
        return out

    def forward(self, f):
        return sfft.fftn(self.pad(f), workers=workers())

    def apply_hat(self, khat, fhat):
        n = self.box.points_per_axis
        return sfft.ifftn(khat * fhat, workers=workers())[:n, :n, :n]

    def convolve(self, khat, f):
        return self.apply_hat(khat, self.forward(f))

    def multiplier(self, symbol, f):
        """symbol(|xi|) applied to f via the padded FFT (returns complex)."""
        n = self.box.points_per_axis
        out = sfft.ifftn(symbol(self.xi) * self.forward(f), workers=workers())
        return out[:n, :n, :n]


def embed(box: CartesianGrid, grid: SpatialGrid, values):
    """Scatter nodal values of a cartesian support grid into a box array."""
    out = np.zeros(box.points_per_axis ** 3, dtype=np.result_type(values, float))
    out[grid.meta["flat_index"]] = values
    return out.reshape(box.shape)


def restrict(grid: SpatialGrid, field):
    return np.asarray(field).reshape(-1)[grid.meta["flat_index"]]
