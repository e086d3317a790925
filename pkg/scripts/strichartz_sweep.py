"""Strichartz ratios for random free-wave data over the sharp admissible segment."""
import argparse

import numpy as np

from spectral_lab.cartesian import support_grid
from spectral_lab.cli import random_data
from spectral_lab.potentials import zero_potential
from spectral_lab.quadrature import CartesianGrid
from spectral_lab.resolvent import build_resolvent_table, uniform_lambda_grid
from spectral_lab.spectral_calculus import BoxEngine
from spectral_lab.wave import evolve, strichartz_ratio


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=32)
    ap.add_argument("--half-width", type=float, default=3.0)
    ap.add_argument("--samples", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    box = CartesianGrid(args.half_width, args.points)
    V = zero_potential()
    tab = build_resolvent_table(V, support_grid(box, V), uniform_lambda_grid(20.0, 0.075))
    eng = BoxEngine(tab, None)
    t = np.linspace(0.0, args.half_width / 3, 9)
    sols = [evolve(tab, None, u0, u1, t_grid=t, engine=eng) for u0, u1 in random_data(box, args.samples, args.seed)]
    print(f"{'p':>6} {'q':>8} {'s':>6} {'min':>8} {'max':>8} {'spread':>7}")
    for q in (4.0, 6.0, 10.0, 30.0):
        p = 2 * q / (q - 2)  # 1/p + 1/q = 1/2
        s = 1.5 - 3 / q - 1 / p
        r = strichartz_ratio(sols, p, q, s)
        print(f"{p:6.3f} {q:8.3f} {s:6.3f} {r.min():8.4f} {r.max():8.4f} {r.max() / r.min():7.3f}")


if __name__ == "__main__":
    main()
