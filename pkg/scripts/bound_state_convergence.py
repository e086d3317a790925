"""mu_1 of the -4 square well against the exact root, for a ladder of ball grids."""
import argparse
import time

from spectral_lab.potentials import square_well, square_well_levels
from spectral_lab.quadrature import build_ball_grid
from spectral_lab.resolvent import find_bound_states


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--amplitude", type=float, default=-4.0)
    ap.add_argument("--nodes", type=int, nargs="+", default=[120, 240, 430, 860, 1600])
    args = ap.parse_args()
    V = square_well(args.amplitude)
    exact = square_well_levels(args.amplitude)
    print(f"exact s-wave mu: {', '.join(f'{m:.8f}' for m in exact)}")
    print(f"{'nodes':>6} {'h':>8} {'mu_1':>12} {'error':>10} {'seconds':>8}")
    for n in args.nodes:
        g = build_ball_grid(1.0, n)
        t0 = time.perf_counter()
        sp = find_bound_states(V, g)
        dt = time.perf_counter() - t0
        mu = sp.mus[0]
        print(f"{len(g.nodes):6d} {g.spacing:8.4f} {mu:12.8f} {mu - exact[0]:10.2e} {dt:8.2f}")


if __name__ == "__main__":
    main()
