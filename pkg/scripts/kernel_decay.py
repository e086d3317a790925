"""Decay profiles of multiplier kernels near the -4 well.

Prints |K(x, y)| |x - y|^3 for the imaginary power H^{i sigma} and the
log-log slopes of the fractional kernels H^{-alpha/2}, free and perturbed.
"""
import argparse

import numpy as np

from spectral_lab.potentials import square_well, zero_potential
from spectral_lab.quadrature import build_ball_grid
from spectral_lab.resolvent import (
    build_resolvent_table,
    find_bound_states,
    uniform_lambda_grid,
)
from spectral_lab.spectral_calculus import (
    assemble_fractional_kernel,
    assemble_multiplier_kernel,
    constant,
    imaginary_power,
)


def line_pairs(center, distances):
    c, e = np.asarray(center, float), np.array([0.0, 1.0, 0.0])
    return [(c - 0.5 * d * e, c + 0.5 * d * e) for d in distances]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=430)
    ap.add_argument("--lam-max", type=float, default=40.0)
    ap.add_argument("--dlam", type=float, default=40.0 / 512)
    ap.add_argument("--sigma", type=float, default=1.0)
    args = ap.parse_args()

    grid = build_ball_grid(1.0, args.nodes)
    lam = uniform_lambda_grid(args.lam_max, args.dlam)
    V = square_well(-4.0)
    sp = find_bound_states(V, grid)
    tab = build_resolvent_table(V, grid, lam)
    free = build_resolvent_table(zero_potential(), grid, lam)

    d = np.geomspace(0.5, 4.0, 10)
    K = assemble_multiplier_kernel(imaginary_power(args.sigma), tab, sp, line_pairs((2.5, 0, 0), d), tail_budget=None)
    print(f"H^(i {args.sigma:g}) kernel, centre (2.5, 0, 0)")
    for r, k in zip(d, K.values):
        print(f"  r = {r:6.3f}   |K| r^3 = {abs(k) * r ** 3:.5f}")

    d = np.geomspace(0.2, 1.0, 8)
    pairs = line_pairs((3.9, 0, 0), d)
    print("fractional kernels, centre (3.9, 0, 0): fitted slope vs alpha - 3")
    for label, t, s in (("V = 0 ", free, None), ("V = -4", tab, sp)):
        for alpha in (0.5, 1.0, 2.0):
            K = assemble_fractional_kernel(alpha, constant(), t, s, pairs, tail_budget=None)
            slope = np.polyfit(np.log(d), np.log(np.abs(K.values)), 1)[0]
            print(f"  {label} alpha = {alpha:3.1f}   slope {slope:7.3f}   target {alpha - 3:5.2f}")


if __name__ == "__main__":
    main()
