"""Grids, weights and weakly singular integration in three dimensions."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

from .errors import InvalidArgument, NumericalSingularity

# Lebedev orders in scipy with all-positive weights, and their point counts.
_LEBEDEV = [(3, 6), (5, 14), (7, 26), (9, 38), (11, 50), (15, 86), (17, 110),
            (19, 146), (21, 170), (23, 194), (29, 302), (31, 350), (35, 434),
            (41, 590), (47, 770)]

MIN_BALL_NODES = 50


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Quadrature nodes and positive weights on a region of R^3.

    ``kind`` is ``"nystrom-ball"`` (product rule on a ball of radius
    ``support_radius``) or ``"cartesian-box"`` (uniform cells of side
    ``spacing``; weights are the cell volumes).
    """

    nodes: np.ndarray
    weights: np.ndarray
    support_radius: float
    kind: str = "nystrom-ball"
    cell: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return len(self.weights)

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @property
    def spacing(self) -> float:
        """Mean node spacing (cube root of the average cell volume)."""
        if self.kind == "cartesian-box":
            return self.cell
        return float(np.cbrt(self.volume / len(self)))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(np.float64(self.support_radius).tobytes())
        h.update(np.ascontiguousarray(self.nodes, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        return h.hexdigest()[:32]

    def translated(self, shift) -> "SpatialGrid":
        """Same weights, nodes moved by ``shift`` (kind becomes a tag only)."""
        shift = np.asarray(shift, float)
        meta = dict(self.meta, center=np.asarray(self.meta.get("center", np.zeros(3))) + shift)
        return SpatialGrid(self.nodes + shift, self.weights.copy(), self.support_radius,
                           self.kind, self.cell, meta)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.meta.get("center", np.zeros(3)), float)


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform grid on the cube [-half_width, half_width)^3."""

    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.half_width <= 0:
            raise InvalidArgument("half_width must be positive")
        if self.points_per_axis < 8:
            raise InvalidArgument("points_per_axis must be at least 8")

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / self.points_per_axis

    @property
    def shape(self):
        n = self.points_per_axis
        return (n, n, n)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        return -self.half_width + self.spacing * np.arange(n)

    def mesh(self):
        a = self.axis()
        return np.meshgrid(a, a, a, indexing="ij")

    def points(self) -> np.ndarray:
        X, Y, Z = self.mesh()
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def radius(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        X, Y, Z = self.mesh()
        c = np.asarray(center, float)
        return np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2)

    def frequencies(self, pad: int = 1):
        """Angular frequencies of an FFT on the grid zero-padded ``pad`` times."""
        m = self.points_per_axis * pad
        k = 2 * np.pi * np.fft.fftfreq(m, d=self.spacing)
        KX, KY, KZ = np.meshgrid(k, k, k, indexing="ij")
        return np.sqrt(KX ** 2 + KY ** 2 + KZ ** 2)

    def support_grid(self, mask: np.ndarray, support_radius: float) -> SpatialGrid:
        """Nodes of the masked cells as a cartesian-box SpatialGrid."""
        idx = np.flatnonzero(mask.ravel())
        pts = self.points()[idx]
        w = np.full(len(idx), self.cell_volume)
        return SpatialGrid(pts, w, float(support_radius), "cartesian-box", self.spacing,
                           {"flat_index": idx, "box": self})


def _ball_layout(target: int):
    """Radial count and Lebedev order for roughly ``target`` nodes.

    Angular resolution dominates the error of the singular Nystrom sums,
    so about a third of the budget on shells of size ~N^(2/3) works well.
    """
    best = None
    for order, n_ang in _LEBEDEV:
        n_r = max(2, int(round(target / n_ang)))
        total = n_r * n_ang
        if abs(total - target) > 0.2 * target:
            continue
        # prefer angular count close to 3*n_r^2
        score = abs(np.log(n_ang / (3.0 * n_r ** 2)))
        if best is None or score < best[0]:
            best = (score, n_r, order)
    if best is None:
        raise InvalidArgument(f"cannot lay out {target} nodes")
    return best[1], best[2]


def build_ball_grid(radius: float, target_nodes: int, center=(0.0, 0.0, 0.0)) -> SpatialGrid:
    """Gauss-Legendre (in r, weight r^2) times Lebedev product grid on a ball."""
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    if target_nodes < MIN_BALL_NODES:
        raise InvalidArgument(f"target_nodes must be >= {MIN_BALL_NODES}")
    n_r, order = _ball_layout(int(target_nodes))
    return _product_ball(float(radius), n_r, order, np.asarray(center, float))


@lru_cache(maxsize=32)
def _lebedev(order: int):
    pts, w = integrate.lebedev_rule(order)
    return pts.T.copy(), w.copy()


def _product_ball(radius, n_r, order, center):
    t, wt = roots_legendre(n_r)
    r = 0.5 * radius * (t + 1.0)
    wr = 0.5 * radius * wt * r ** 2
    dirs, wa = _lebedev(order)
    nodes = (r[:, None, None] * dirs[None]).reshape(-1, 3) + center
    weights = (wr[:, None] * wa[None]).ravel()
    return SpatialGrid(nodes, weights, radius, "nystrom-ball", 0.0,
                       {"n_radial": n_r, "lebedev_order": order, "center": center})


def newton_ball(dist, radius):
    """Integral of 1/|z - p| over the ball |z| <= radius, p at distance ``dist``."""
    d = np.asarray(dist, float)
    inner = 2 * np.pi * (radius ** 2 - d ** 2 / 3.0)
    outer = 4 * np.pi * radius ** 3 / (3.0 * np.where(d > 0, d, 1.0))
    return np.where(d < radius, inner, outer)


def yukawa_ball(dist, radius, kappa):
    """Integral of exp(-kappa|z-p|)/(4 pi |z-p|) over the ball |z| <= radius.

    ``kappa`` may be complex with Re(kappa) >= 0 (kappa = -i lambda gives the
    outgoing Helmholtz kernel).  Solves -u'' - 2u'/r + kappa^2 u = 1 on the
    ball with decay outside.
    """
    d = np.asarray(dist, float)
    R = float(radius)
    k = complex(kappa)
    if abs(k) * R < 2e-3:
        k2 = k * k
        inner = (R ** 2 / 2 - d ** 2 / 6 - k * R ** 3 / 3
                 + k2 * (R ** 4 / 8 + R ** 2 * d ** 2 / 12 - d ** 4 / 120))
        dd = np.where(d > 0, d, 1.0)
        outer = (R ** 3 / (3 * dd) - k * R ** 3 / 3
                 + k2 * (R ** 5 / (30 * dd) + R ** 3 * dd / 6))
        out = np.where(d < R, inner, outer)
        return out if k.imag != 0 or np.iscomplexobj(out) else out.astype(complex)
    kr = k * R
    dd = np.where(d > 1e-12, d, 1.0)
    # sinh(k d)/(k d) with the d -> 0 limit
    sinc = np.where(d > 1e-12, np.sinh(k * dd) / (k * dd), 1.0 + 0j)
    inner = (1.0 - (1 + kr) * np.exp(-kr) * sinc) / k ** 2
    dout = np.where(d >= R, d, R)
    outer = (kr * np.cosh(kr) - np.sinh(kr)) * np.exp(-k * dout) / (k ** 3 * dout)
    return np.where(d < R, inner, outer)


@lru_cache(maxsize=1)
def unit_cube_inverse_distance() -> float:
    """Integral of 1/|z| over the unit cube centred at the origin."""
    # six pyramids, each (d/2) * integral over its face of 1/|p|, d = 1/2
    face, _ = integrate.dblquad(lambda v, u: 1.0 / np.sqrt(0.25 + u * u + v * v),
                                -0.5, 0.5, -0.5, 0.5, epsabs=1e-14, epsrel=1e-13)
    return 6 * 0.25 * face


def yukawa_cell(h: float, kappa, order: int = 12) -> complex:
    """Integral of exp(-kappa|z|)/(4 pi |z|) over a cube of side h centred at 0."""
    k = complex(kappa)
    base = h ** 2 * unit_cube_inverse_distance()
    if k == 0:
        return base / (4 * np.pi)
    t, w = roots_legendre(order)
    # smooth part (exp(-k r) - 1)/r on one octant, times 8
    x = 0.25 * h * (t + 1)
    wx = 0.25 * h * w
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    r = np.sqrt(X ** 2 + Y ** 2 + Z ** 2)
    g = np.expm1(-k * r) / r
    W = wx[:, None, None] * wx[None, :, None] * wx[None, None, :]
    return (base + 8 * np.sum(W * g)) / (4 * np.pi)


def integrate_singular(f, pole, grid: SpatialGrid, subtract: bool = True) -> float:
    """Approximate the integral of f(z)/|z - pole| over the grid region.

    The value of f at the node nearest the pole is subtracted and its
    contribution is integrated exactly over the covered ball (or the pole's
    cell for cartesian grids); the smooth remainder uses the grid weights.
    """
    f = np.asarray(f, float)
    if not np.all(np.isfinite(f)):
        raise InvalidArgument("integrand must be finite at every node")
    p = np.asarray(pole, float)
    d = np.linalg.norm(grid.nodes - p, axis=1)
    j = int(np.argmin(d))
    on_node = d[j] == 0.0
    if on_node and not subtract:
        raise NumericalSingularity("pole coincides with a node and no subtraction cell is defined")
    inv = np.zeros_like(d)
    inv[~(d == 0)] = 1.0 / d[~(d == 0)]
    if not subtract:
        return float(np.dot(grid.weights * f, inv))
    if grid.kind == "nystrom-ball":
        c = f[j]
        dist = np.linalg.norm(p - grid.center)
        return float(np.dot(grid.weights * (f - c), inv) + c * newton_ball(dist, grid.support_radius))
    # cartesian: exact self cell when the pole sits on a node
    total = float(np.dot(grid.weights * f, inv))
    if on_node:
        total += f[j] * grid.cell ** 2 * unit_cube_inverse_distance()
    return total


def ball_probe_matrix(grid: SpatialGrid, probes):
    """Helper for many poles at once on a ball grid.

    Returns (inv, nearest, exact) with inv[p, j] = 1/|z_j - y_p| (0 on a node),
    nearest[p] the index of the closest node and exact[p] the exact integral
    of 1/|z - y_p| over the ball.
    """
    probes = np.atleast_2d(np.asarray(probes, float))
    diff = probes[:, None, :] - grid.nodes[None, :, :]
    d = np.sqrt(np.einsum("pjk,pjk->pj", diff, diff))
    nearest = np.argmin(d, axis=1)
    with np.errstate(divide="ignore"):
        inv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
    exact = newton_ball(np.linalg.norm(probes - grid.center, axis=1), grid.support_radius)
    return inv, nearest, exact
