"""Tail slope of lambda for advection-diffusion at nu = 1/2 and nu = 1 over a
range of diffusivities.

A chart label "zero" for nu < 1 needs a negative tail slope at nu = 1/2 while
nu = 1 stays "infinity".  The scan shows whether any shared kappa gives both.

    python scripts/chart_kappa_scan.py [--n 256] [--half-width 8] [--t-final 100]
"""
import argparse
from dataclasses import replace
from fractions import Fraction

from mixbound import harness as H
from mixbound.spectral import Grid


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="chart_sweep")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--half-width", type=float, default=8.0)
    p.add_argument("--t-final", type=float, default=100.0)
    p.add_argument("--kappas", type=float, nargs="+", default=(1e-3, 1e-2, 5e-2))
    args = p.parse_args()
    base = H.load_config(args.config)
    base = replace(base, grid=Grid(2, args.n, args.half_width), t_final=args.t_final,
                   mode="advection_diffusion", sweep_equations=(), sweep_nus=(), output_dir=None)
    print(f"{'kappa':>8} {'nu':>5} {'slope':>9} {'class':>9} {'chart':>9}")
    for kappa in args.kappas:
        for nu in (Fraction(1, 2), Fraction(1)):
            cfg = replace(base, kappa=kappa, velocity=replace(base.velocity, nu=nu), bounds=())
            c = H.run_experiment(cfg).classification
            print(f"{kappa:>8g} {str(nu):>5} {c['observed']['slope']:>+9.4f} "
                  f"{c['observed_label']:>9} {c['chart_label']:>9}")


if __name__ == "__main__":
    main()
