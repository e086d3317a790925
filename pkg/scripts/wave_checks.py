"""Light-cone identity and conical ratios for the sine propagator near the -4 well."""
import argparse

import numpy as np

from spectral_lab.potentials import square_well
from spectral_lab.quadrature import build_ball_grid
from spectral_lab.resolvent import (
    build_resolvent_table,
    find_bound_states,
    projection_kernels,
    uniform_lambda_grid,
)
from spectral_lab.wave import conical_ratios, sine_propagator_kernel


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=430)
    ap.add_argument("--lam-max", type=float, default=40.0)
    ap.add_argument("--dlam", type=float, default=40.0 / 512)
    ap.add_argument("--times", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    args = ap.parse_args()

    grid = build_ball_grid(1.0, args.nodes)
    V = square_well(-4.0)
    sp = find_bound_states(V, grid)
    tab = build_resolvent_table(V, grid, uniform_lambda_grid(args.lam_max, args.dlam))

    # inside the cone only the bound-state part survives
    x, y = np.array([[1.5, 0.0, 0.0]]), np.array([[-1.5, 1.0, 0.0]])
    r = float(np.linalg.norm(x - y))
    P = projection_kernels(sp, x, y)[:, 0]
    print(f"light cone, r = {r:.3f}")
    for frac in (0.2, 0.4, 0.6, 0.8):
        t = frac * r
        got = sine_propagator_kernel(tab, sp, x, y, [t]).smooth[0, 0]
        ref = -sum(np.sinh(mu * t) / mu * p for mu, p in zip(sp.mus, P))
        print(f"  t/r = {frac:.1f}   kernel {got: .6e}   bound-state part {ref: .6e}   rel {abs(got / ref - 1):.1e}")

    ratios = conical_ratios(tab, sp, (1.5, 0.0, 0.0), args.times)
    print("conical ratios at y = (1.5, 0, 0); free value 2 pi = 6.2832")
    for t, q in zip(args.times, ratios):
        print(f"  t = {t:4.1f}   {q:.4f}")


if __name__ == "__main__":
    main()
