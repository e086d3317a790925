"""Free and perturbed resolvent kernels, bound states and spectral projections.

All perturbed quantities come from one Nystrom discretisation of the
Lippmann-Schwinger operator u + R0(z) V u on a SpatialGrid.  Off-diagonal
entries are the free kernel times the node weight; the diagonal absorbs the
weak singularity by subtracting the local value and integrating it exactly
(ball grids) or by the exact self-cell integral (cartesian grids).
"""
from __future__ import annotations

import hashlib
import struct
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import brentq

from .errors import (
    EmbeddedSpectrumSuspected,
    InvalidArgument,
    NumericalError,
    NumericalSingularity,
    RefineNeeded,
)
from .potentials import Potential, kato_norm
from .quadrature import SpatialGrid, integrate_singular, yukawa_ball, yukawa_cell

FOUR_PI = 4 * np.pi


def free_resolvent_kernel(z, x, y) -> complex:
    """exp(-sqrt(-z)|x-y|)/(4 pi |x-y|) on the principal branch.

    The sign of a zero imaginary part selects the boundary value:
    ``complex(4, +0.0)`` is the outgoing limit 4 + i0.
    """
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    if r == 0.0:
        raise NumericalSingularity("free resolvent kernel is singular on the diagonal")
    k = np.sqrt(-complex(z))
    return complex(np.exp(-k * r) / (FOUR_PI * r))


def boundary_kappa(lam: float, sign: int = 1, eps: float = 0.0) -> complex:
    """Decay rate sqrt(-(lam + i sign eps)^2) with nonnegative real part."""
    if eps == 0.0:
        return complex(0.0, -sign * lam)
    return complex(np.sqrt(-complex(lam, sign * eps) ** 2))


class NystromOperator:
    """Discrete R0(kappa) on the nodes of a grid, with singular diagonal correction."""

    def __init__(self, grid: SpatialGrid, vvals):
        self.grid = grid
        self.v = np.asarray(vvals, float)
        self.nodes = grid.nodes
        self.w = grid.weights
        self.n = len(grid)
        diff = self.nodes[:, None, :] - self.nodes[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(d, 1.0)
        self.dist = d
        self.wv = self.w * self.v
        self._center_dist = np.linalg.norm(self.nodes - grid.center, axis=1)

    def local_integral(self, kappa, dist_to_center):
        """Exact integral of the free kernel over the whole grid region (ball kind)."""
        return yukawa_ball(dist_to_center, self.grid.support_radius, kappa)

    def green(self, kappa) -> np.ndarray:
        """Symmetric kernel matrix K with K @ (w * phi) approximating the integral of G phi.

        Off the diagonal K is the free kernel; K_ii is the local correction
        divided by the node weight.
        """
        k = complex(kappa)
        G = np.exp(-k * self.dist) / (FOUR_PI * self.dist)
        if k.imag == 0.0:
            G = G.real
        np.fill_diagonal(G, 0.0)
        np.fill_diagonal(G, self._diagonal(k, G))
        return G

    def _diagonal(self, k, G_off):
        if self.grid.kind == "nystrom-ball":
            B = self.local_integral(k, self._center_dist)
            diag = (B - G_off @ self.w) / self.w
        else:
            diag = np.full(self.n, yukawa_cell(self.grid.cell, k) / self.grid.cell ** 3)
        return diag.real if k.imag == 0.0 else diag

    def system(self, kappa) -> np.ndarray:
        """I + R0 V as a matrix acting on nodal values."""
        A = self.green(kappa) * self.wv[None, :]
        A[np.diag_indices(self.n)] += 1.0
        return A

    def green_derivative_energy(self, kappa: float) -> np.ndarray:
        """d/dE of the corrected matrix at E = -kappa^2 (kappa > 0 real)."""
        k = float(kappa)
        Gp = np.exp(-k * self.dist) / (8 * np.pi * k)
        np.fill_diagonal(Gp, 0.0)
        h = 1e-4 * max(k, 1e-2)
        dk = (self._diagonal_only(k + h) - self._diagonal_only(k - h)) / (2 * h)
        np.fill_diagonal(Gp, -dk / (2 * k))
        return Gp

    def _diagonal_only(self, k):
        G = np.exp(-k * self.dist) / (FOUR_PI * self.dist)
        np.fill_diagonal(G, 0.0)
        return self._diagonal(complex(k), G).real

    # off-grid evaluation -------------------------------------------------
    def point_data(self, points):
        """Distances from points to nodes and their location relative to the support."""
        pts = np.atleast_2d(np.asarray(points, float))
        diff = pts[:, None, :] - self.nodes[None, :, :]
        d = np.sqrt(np.einsum("pjk,pjk->pj", diff, diff))
        rc = np.linalg.norm(pts - self.grid.center, axis=1)
        R = self.grid.support_radius
        h = self.grid.spacing
        if self.grid.kind == "nystrom-ball":
            inside = rc < R
            near = (~inside) & (rc < R + 2 * h)
        else:
            inside = np.zeros(len(pts), bool)
            near = np.zeros(len(pts), bool)
        if np.any(d == 0.0):
            d = np.where(d == 0.0, 1e-300, d)
        return {"points": pts, "dist": d, "rc": rc, "inside": inside, "near": near,
                "nearest": np.argmin(d, axis=1)}

    def potential_at(self, pdata, V: Potential | None):
        if V is None:
            return np.zeros(len(pdata["points"]))
        return V(pdata["points"])

    def apply_potential_layer(self, kappa, pdata, phi, vx):
        """Given nodal density phi = V u, return sum_j G(x,z_j) w_j phi_j with
        singular correction, as (coef, rhs) so that u(x) = (a(x) - rhs) / coef.

        ``phi`` has shape (n, m); ``vx`` is V at the points.
        """
        k = complex(kappa)
        d = pdata["dist"]
        Gx = np.exp(-k * d) / (FOUR_PI * d)
        s = Gx @ (self.w[:, None] * phi)                     # (P, m)
        coef = np.ones(len(d), dtype=complex)
        corr = pdata["inside"] | pdata["near"]
        if corr.any():
            B = self.local_integral(k, pdata["rc"][corr])
            beta = B - Gx[corr] @ self.w
            idx = np.flatnonzero(corr)
            ins = pdata["inside"][corr]
            # inside: implicit local value V(x) u(x); near: nearest nodal density
            coef[idx[ins]] += vx[idx[ins]] * beta[ins]
            nb = ~ins
            if nb.any():
                c = phi[pdata["nearest"][idx[nb]]]
                s[idx[nb]] += c * beta[nb][:, None]
        return Gx, s, coef


@dataclass
class Eigenspace:
    """Bound states sharing one decay rate mu (energy -mu^2)."""

    mu: float
    charges: np.ndarray      # (n, m): w V u on the nodes
    nodal: np.ndarray        # (n, m): eigenfunction values on the nodes
    roots: tuple = ()

    @property
    def multiplicity(self) -> int:
        return self.charges.shape[1]


@dataclass
class SpectrumInfo:
    bound_states: list
    resonance_sigma_min: float
    resonance_flag: bool
    operator: NystromOperator | None = None
    potential: Potential | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def mus(self):
        return [e.mu for e in self.bound_states]

    def eigenfunctions(self, j: int, points) -> np.ndarray:
        """Off-grid values (P, m) of the orthonormal eigenfunctions of eigenspace j."""
        e = self.bound_states[j]
        op = self.operator
        pd = op.point_data(points)
        vx = op.potential_at(pd, self.potential)
        phi = e.charges / op.w[:, None]
        _, s, coef = op.apply_potential_layer(e.mu, pd, phi, vx)
        return (-s / coef[:, None]).real

    def all_eigenfunctions(self, points) -> np.ndarray:
        cols = [self.eigenfunctions(j, points) for j in range(len(self.bound_states))]
        if not cols:
            return np.zeros((len(np.atleast_2d(points)), 0))
        return np.hstack(cols)


def empty_spectrum(op: NystromOperator | None = None, V: Potential | None = None) -> SpectrumInfo:
    return SpectrumInfo([], np.inf, False, op, V)


def _bs_matrix(op: NystromOperator, sup: np.ndarray, mu: float) -> np.ndarray:
    """Symmetric Birman-Schwinger form sign(V) + D G D on the support, D = sqrt(w|V|)."""
    G = op.green(complex(mu)).real[np.ix_(sup, sup)]
    D = np.sqrt(op.w[sup] * np.abs(op.v[sup]))
    Q = D[:, None] * G * D[None, :]
    Q[np.diag_indices(len(sup))] += np.sign(op.v[sup])
    return 0.5 * (Q + Q.T)


def _eig_at(op, sup, mu, idx, vectors=False):
    Q = _bs_matrix(op, sup, mu)
    if vectors:
        return linalg.eigh(Q, subset_by_index=list(idx))
    return linalg.eigh(Q, eigvals_only=True, subset_by_index=list(idx))


def find_bound_states(V: Potential, grid: SpatialGrid, mu_search_interval=None, n_scan: int = 12,
                      cluster_rtol: float = 1e-6, resonance_tol: float = 1e-2,
                      operator: NystromOperator | None = None) -> SpectrumInfo:
    """All mu > 0 with I + R0(-mu^2) V singular, with eigenfunctions.

    Uses the symmetric form Q(mu) = sign(V) + D R0(-mu^2) D, whose eigenvalues
    are nonincreasing in mu; the number of bound states above mu is the
    number of negative nodes minus the negative inertia of Q(mu).
    """
    op = operator or NystromOperator(grid, V(grid.nodes))
    v = op.v
    sup = np.flatnonzero(v != 0)
    n_neg = int(np.sum(v < 0))
    sigma0 = _zero_energy_sigma(op)
    info = SpectrumInfo([], sigma0, bool(sigma0 < resonance_tol), op, V,
                        {"n_negative_nodes": n_neg})
    if n_neg == 0:
        return info
    vmax = float(np.max(-v[v < 0]))
    if mu_search_interval is None:
        mu_search_interval = (1e-3, 1.05 * np.sqrt(vmax) + 1.0)
    lo, hi = map(float, mu_search_interval)
    if not (0 < lo < hi):
        raise InvalidArgument("mu search interval must satisfy 0 < mu_min < mu_max")
    if hi * hi <= vmax:
        raise InvalidArgument("mu_max^2 must exceed sup |V_-|")

    def count_above(mu):
        ev = linalg.eigh(_bs_matrix(op, sup, mu), eigvals_only=True)
        return n_neg - int(np.sum(ev < 0))

    scan = np.geomspace(lo, hi, n_scan)
    counts = np.array([count_above(m) for m in scan])
    if np.any(np.diff(counts) > 0):
        raise RefineNeeded("bound-state count is not monotone in mu; refine the grid")
    if counts[-1] != 0:
        raise RefineNeeded("bound states persist at mu_max; enlarge the search interval")
    total = int(counts[0])
    roots = []
    for k in range(1, total + 1):
        i = int(np.max(np.flatnonzero(counts >= k)))
        idx = n_neg - k
        f = lambda m: _eig_at(op, sup, m, (idx, idx))[0]
        roots.append((brentq(f, scan[i], scan[i + 1], xtol=1e-13, rtol=4e-15), idx))
    roots.sort(key=lambda t: -t[0])
    clusters = []
    for mu, idx in roots:
        if clusters and abs(clusters[-1][-1][0] - mu) <= cluster_rtol * mu:
            clusters[-1].append((mu, idx))
        else:
            clusters.append([(mu, idx)])
    for cl in clusters:
        info.bound_states.append(_eigenspace(op, sup, cl))
    info.diagnostics["scan"] = (scan, counts)
    return info


def _eigenspace(op, sup, cluster) -> Eigenspace:
    mus = [m for m, _ in cluster]
    mu = float(np.mean(mus))
    idx = sorted(i for _, i in cluster)
    _, vecs = _eig_at(op, sup, mu, (idx[0], idx[-1]), vectors=True)
    D = np.sqrt(op.w[sup] * np.abs(op.v[sup]))
    charges = np.zeros((op.n, len(idx)))
    charges[sup] = D[:, None] * vecs          # w V u = D theta
    Gp = op.green_derivative_energy(mu)
    gram = charges.T @ Gp @ charges
    ev, U = np.linalg.eigh(0.5 * (gram + gram.T))
    if np.any(ev <= 0):
        raise NumericalError("non-positive residue norm for a bound state")
    charges = charges @ (U / np.sqrt(ev)) @ U.T
    # fix a deterministic sign: largest-magnitude charge positive
    for a in range(charges.shape[1]):
        j = int(np.argmax(np.abs(charges[:, a])))
        if charges[j, a] < 0:
            charges[:, a] *= -1
    nodal = -(op.green(complex(mu)).real @ charges)
    return Eigenspace(mu, charges, nodal, tuple(mus))


def _zero_energy_sigma(op: NystromOperator) -> float:
    if not np.any(op.v):
        return 1.0
    return float(linalg.svdvals(op.system(0.0).real)[-1])


def residue_gram(spectrum: SpectrumInfo, j: int) -> np.ndarray:
    """R^3 inner products of the eigenfunctions of eigenspace j (identity if normalised)."""
    e = spectrum.bound_states[j]
    Gp = spectrum.operator.green_derivative_energy(e.mu)
    return e.charges.T @ Gp @ e.charges


def eigen_residual(spectrum: SpectrumInfo, j: int) -> float:
    """Relative residual of u + R0(-mu^2) V u = 0 on the nodes."""
    e = spectrum.bound_states[j]
    op = spectrum.operator
    u = e.nodal
    r = op.system(complex(e.mu)).real @ u
    return float(np.linalg.norm(r) / np.linalg.norm(u))


def projection_kernel(spectrum: SpectrumInfo, j: int, x, y) -> float:
    """Kernel of the orthogonal projection onto eigenspace j at (x, y)."""
    if not 0 <= j < len(spectrum.bound_states):
        raise InvalidArgument(f"bound state index {j} out of range")
    f = spectrum.eigenfunctions(j, np.vstack([np.asarray(x, float), np.asarray(y, float)]))
    return float(f[0] @ f[1])


def projection_kernels(spectrum: SpectrumInfo, xs, ys) -> np.ndarray:
    """Sum over all eigenspaces, per eigenspace: array (n_states, n_pairs)."""
    xs, ys = np.atleast_2d(xs), np.atleast_2d(ys)
    out = np.zeros((len(spectrum.bound_states), len(xs)))
    for j in range(len(spectrum.bound_states)):
        fx = spectrum.eigenfunctions(j, xs)
        fy = spectrum.eigenfunctions(j, ys)
        out[j] = np.sum(fx * fy, axis=1)
    return out


# ----------------------------------------------------------------------------
# resolvent tables

CACHE_MAGIC = b"SPLBRT\x00\x01"
CACHE_VERSION = 1


class CacheMismatch(NumericalError):
    pass


def richardson_weights(eps) -> np.ndarray:
    """Weights extrapolating samples at eps_k to eps = 0 (polynomial fit through all rungs)."""
    e = np.asarray(eps, float)
    w = np.ones(len(e))
    for k in range(len(e)):
        for m in range(len(e)):
            if m != k:
                w[k] *= e[m] / (e[m] - e[k])
    return w


@dataclass
class ResolventTable:
    """Boundary values R_V^{sign}((lambda)^2) on a lambda grid, factored lazily.

    With an empty ``eps_ladder`` the systems are assembled at eps = 0; a compact
    potential keeps the Nystrom kernel bounded there.  Otherwise values are
    Richardson-extrapolated from the ladder.
    """

    potential: Potential
    grid: SpatialGrid
    lambda_grid: np.ndarray
    eps_ladder: tuple
    sign: int
    operator: NystromOperator
    richardson: np.ndarray
    zero_sigma_min: float = np.inf
    near_singular_at_zero: bool = False
    rcond_min: float = 1e-12
    memory_budget: int = 512 * 2 ** 20
    _factors: OrderedDict = field(default_factory=OrderedDict, repr=False)
    _sweeps: OrderedDict = field(default_factory=OrderedDict, repr=False)

    @property
    def is_free(self) -> bool:
        return not np.any(self.operator.v)

    @property
    def dlambda(self) -> float:
        g = self.lambda_grid
        return float(g[1] - g[0]) if len(g) > 1 else np.inf

    @property
    def t_max(self) -> float:
        return np.pi / self.dlambda

    def kappas(self, i):
        lam = float(self.lambda_grid[i])
        if not self.eps_ladder:
            return [boundary_kappa(lam, self.sign)]
        return [boundary_kappa(lam, self.sign, e) for e in self.eps_ladder]

    def factor(self, i: int, rung: int = 0):
        key = (i, rung)
        if key in self._factors:
            self._factors.move_to_end(key)
            return self._factors[key]
        kappa = self.kappas(i)[rung]
        A = self.operator.system(kappa)
        lu = linalg.lu_factor(A, check_finite=False)
        anorm = np.abs(A).sum(axis=0).max()
        gecon = linalg.lapack.zgecon if np.iscomplexobj(lu[0]) else linalg.lapack.dgecon
        rcond = gecon(lu[0], anorm, norm="1")[0]
        lam = float(self.lambda_grid[i])
        if rcond < self.rcond_min and lam > 0:
            raise EmbeddedSpectrumSuspected(lam, rcond)
        self._factors[key] = lu
        size = sum(v[0].nbytes for v in self._factors.values())
        while size > self.memory_budget and len(self._factors) > 1:
            _, old = self._factors.popitem(last=False)
            size -= old[0].nbytes
        return lu

    def _pair_plan(self, xs, ys):
        xs = np.atleast_2d(np.asarray(xs, float))
        ys = np.atleast_2d(np.asarray(ys, float))
        if xs.shape != ys.shape:
            raise InvalidArgument("x and y lists must have equal length")
        if np.any(np.linalg.norm(xs - ys, axis=1) == 0):
            raise NumericalSingularity("kernel requested on the diagonal x = y")
        c, R = self.grid.center, self.potential.support_radius
        rx = np.linalg.norm(xs - c, axis=1)
        ry = np.linalg.norm(ys - c, axis=1)
        if np.any((rx < R) & (ry < R)) and not self.is_free:
            raise InvalidArgument("both points inside supp V; place at least one outside")
        # the target gets the local correction, so the source is the point
        # farther from the support; ties broken lexicographically
        tie = rx == ry
        later = np.array([tuple(a) > tuple(b) for a, b in zip(xs, ys)], bool)
        swap = (ry < rx) | (tie & later)
        X = np.where(swap[:, None], ys, xs)
        Y = np.where(swap[:, None], xs, ys)
        uy, yinv = np.unique(Y, axis=0, return_inverse=True)
        ux, xinv = np.unique(X, axis=0, return_inverse=True)
        return ux, xinv.ravel(), uy, yinv.ravel()

    def kernel_sweep(self, xs, ys, lam_indices=None, remainder: bool = False) -> np.ndarray:
        """R_V^{sign}(lambda^2)(x_p, y_p) for every lambda index, shape (n_lambda, n_pairs).

        With ``remainder=True`` the free kernel is left out (returns R_V - R_0).
        Results are memoised per request.
        """
        xs = np.atleast_2d(np.asarray(xs, float))
        ys = np.atleast_2d(np.asarray(ys, float))
        key = (xs.tobytes(), ys.tobytes(), bool(remainder),
               None if lam_indices is None else tuple(int(i) for i in lam_indices))
        if key in self._sweeps:
            self._sweeps.move_to_end(key)
            return self._sweeps[key].copy()
        out = self._kernel_sweep(xs, ys, lam_indices, remainder)
        self._sweeps[key] = out
        while len(self._sweeps) > 16:
            self._sweeps.popitem(last=False)
        return out.copy()

    def _kernel_sweep(self, xs, ys, lam_indices, remainder):
        ux, xinv, uy, yinv = self._pair_plan(xs, ys)
        idx = range(len(self.lambda_grid)) if lam_indices is None else lam_indices
        op = self.operator
        px = op.point_data(ux)
        vx = self.potential(ux)
        ryz = np.sqrt(np.sum((uy[:, None, :] - op.nodes[None]) ** 2, axis=-1)).T   # (n, ny)
        r = np.linalg.norm(ux[xinv] - uy[yinv], axis=1)
        out = np.zeros((len(idx), len(xinv)), complex)
        for row, i in enumerate(idx):
            vals = 0.0
            for rung, kappa in enumerate(self.kappas(i)):
                free = np.exp(-kappa * r) / (FOUR_PI * r)
                if self.is_free:
                    val = np.zeros_like(free) if remainder else free
                else:
                    a = np.exp(-kappa * ryz) / (FOUR_PI * ryz)
                    U = linalg.lu_solve(self.factor(i, rung), a, check_finite=False)
                    _, s, coef = op.apply_potential_layer(kappa, px, op.v[:, None] * U, vx)
                    corr = s[xinv, yinv]
                    # x inside: u(x) = (G(x,y) - layer) / (1 + V beta)
                    co = coef[xinv]
                    val = (free - corr) / co
                    if remainder:
                        val = val - free
                vals = vals + self.richardson[rung] * val
            out[row] = vals
        return out


def build_resolvent_table(V: Potential, grid: SpatialGrid, lambda_grid, eps_ladder=(), sign: int = 1,
                          resonance_tol: float = 1e-2, check_zero: bool = True) -> ResolventTable:
    lam = np.asarray(lambda_grid, float)
    if lam.ndim != 1 or len(lam) == 0 or np.any(lam < 0) or np.any(np.diff(lam) <= 0):
        raise InvalidArgument("lambda grid must be nonnegative and strictly increasing")
    if sign not in (1, -1):
        raise InvalidArgument("sign must be +1 or -1")
    eps = tuple(float(e) for e in eps_ladder)
    if eps and (any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:]))):
        raise InvalidArgument("eps ladder must be positive and strictly decreasing")
    if V.support_radius > grid.support_radius * (1 + 1e-12) and grid.kind == "nystrom-ball":
        raise InvalidArgument("potential support exceeds the grid")
    op = NystromOperator(grid, V(grid.nodes))
    rich = richardson_weights(eps) if eps else np.ones(1)
    table = ResolventTable(V, grid, lam, eps, sign, op, rich)
    if check_zero and lam[0] == 0.0:
        s = _zero_energy_sigma(op)
        table.zero_sigma_min = s
        table.near_singular_at_zero = bool(s < resonance_tol)
    return table


def uniform_lambda_grid(lam_max: float, dlam: float) -> np.ndarray:
    n = int(round(lam_max / dlam))
    return dlam * np.arange(n + 1)


def resolution_spacing(diameter: float, mu1: float | None = None) -> float:
    """Largest lambda spacing resolving exp(i lambda |x-y|) and the pole features."""
    d = np.pi / (4 * diameter)
    if mu1:
        d = min(d, mu1 / 8)
    return d


def perturbed_kernel(table: ResolventTable, spectrum: SpectrumInfo | None, x, y, lam_index: int) -> complex:
    """R_V^{sign}(lambda^2)(x, y) at one lambda of the table."""
    if not 0 <= lam_index < len(table.lambda_grid):
        raise InvalidArgument("lambda index outside the table")
    return complex(table.kernel_sweep([x], [y], [lam_index])[0, 0])


def born_series_kernel(V: Potential, grid: SpatialGrid, x, y, order: int = 6, kappa=0.0) -> complex:
    """Truncated Neumann series sum_n (-R0 V)^n R0 evaluated at (x, y) off the support."""
    op = NystromOperator(grid, V(grid.nodes))
    G = op.green(kappa)
    k = complex(kappa)
    x, y = np.asarray(x, float), np.asarray(y, float)
    ry = np.linalg.norm(op.nodes - y, axis=1)
    rx = np.linalg.norm(op.nodes - x, axis=1)
    a = np.exp(-k * ry) / (FOUR_PI * ry)
    gx = np.exp(-k * rx) / (FOUR_PI * rx)
    total = np.exp(-k * np.linalg.norm(x - y)) / (FOUR_PI * np.linalg.norm(x - y))
    term = a
    for _ in range(order):
        total = total - gx @ (op.wv * term)
        term = -(G @ (op.wv * term))
    return complex(total)


def verify_kato_composition(V: Potential, grid: SpatialGrid, sample_pairs, kato=None) -> float:
    """max over pairs of |x-y| int |V(z)| / (4 pi |x-z||z-y|) dz divided by ||V||_K / (2 pi)."""
    absv = np.abs(V(grid.nodes))
    if not absv.any():
        return 0.0
    kn = kato_norm(V, grid) if kato is None else kato
    best = 0.0
    for x, y in sample_pairs:
        x, y = np.asarray(x, float), np.asarray(y, float)
        rxy = np.linalg.norm(x - y)
        dx = np.linalg.norm(grid.nodes - x, axis=1)
        dy = np.linalg.norm(grid.nodes - y, axis=1)
        g = absv / (dx + dy)
        # 1/(ab) = (1/(a+b)) (1/a + 1/b): two single-pole integrals
        val = rxy / FOUR_PI * (integrate_singular(g, x, grid) + integrate_singular(g, y, grid))
        best = max(best, val / (kn / (2 * np.pi)))
    return best


# ----------------------------------------------------------------------------
# binary cache

CACHE_MAX_BYTES = 256 * 2 ** 20


def table_bytes(table: ResolventTable) -> int:
    n = table.operator.n
    blocks = len(table.lambda_grid) * max(1, len(table.eps_ladder))
    return 8 + 20 + 32 + 8 * (len(table.lambda_grid) + len(table.eps_ladder)) + blocks * (16 * n * n + 8 * n) + 32


def save_table(table: ResolventTable, path, max_bytes: int = CACHE_MAX_BYTES) -> int:
    """Stream header and per-lambda LU factors (little-endian float64) to ``path``.

    Returns bytes written, or 0 when the table would exceed ``max_bytes``.
    """
    if table_bytes(table) > max_bytes:
        return 0
    n = table.operator.n
    h = hashlib.sha256()
    with open(path, "wb") as fh:
        def put(b):
            h.update(b)
            fh.write(b)
        put(CACHE_MAGIC)
        put(struct.pack("<IiIII", CACHE_VERSION, table.sign, len(table.lambda_grid), len(table.eps_ladder), n))
        put(table.grid.digest().encode("ascii"))
        put(np.asarray(table.lambda_grid, "<f8").tobytes())
        put(np.asarray(table.eps_ladder, "<f8").tobytes())
        for i in range(len(table.lambda_grid)):
            for rung in range(max(1, len(table.eps_ladder))):
                lu, piv = table.factor(i, rung)
                z = np.asarray(lu, complex)
                put(np.ascontiguousarray(np.stack([z.real, z.imag], -1), "<f8").tobytes())
                put(np.asarray(piv, "<f8").tobytes())
        fh.write(h.digest())
    return table_bytes(table)


def load_table(path, V: Potential, grid: SpatialGrid, lambda_grid, eps_ladder=(), sign=1) -> ResolventTable:
    """Read a cache written by save_table; any mismatch or corruption raises CacheMismatch."""
    with open(path, "rb") as fh:
        raw = fh.read()
    data, tail = raw[:-32], raw[-32:]
    if len(raw) < 64 or hashlib.sha256(data).digest() != tail:
        raise CacheMismatch("cache checksum mismatch")
    if data[:8] != CACHE_MAGIC:
        raise CacheMismatch("bad cache magic")
    off = 8
    ver, sgn, nl, ne, n = struct.unpack_from("<IiIII", data, off)
    off += 20
    digest = data[off:off + 32].decode("ascii")
    off += 32
    if ver != CACHE_VERSION or digest != grid.digest() or sgn != sign or n != len(grid):
        raise CacheMismatch("cache header does not match the requested grid")
    lam = np.frombuffer(data, "<f8", nl, off)
    off += 8 * nl
    eps = np.frombuffer(data, "<f8", ne, off)
    off += 8 * ne
    if not (np.array_equal(lam, np.asarray(lambda_grid, float)) and
            np.array_equal(eps, np.asarray(eps_ladder, float))):
        raise CacheMismatch("cache lambda grid or eps ladder differs")
    table = build_resolvent_table(V, grid, lam.copy(), tuple(eps), sign)
    table.memory_budget = max(table.memory_budget, len(data) * 2)
    for i in range(nl):
        for rung in range(max(1, ne)):
            z = np.frombuffer(data, "<f8", 2 * n * n, off).reshape(n, n, 2)
            off += 16 * n * n
            piv = np.frombuffer(data, "<f8", n, off).astype(np.int32)
            off += 8 * n
            table._factors[(i, rung)] = (z[..., 0] + 1j * z[..., 1], piv)
    return table
