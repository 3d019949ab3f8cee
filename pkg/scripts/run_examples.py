"""Run the bundled single-experiment configs and summarise their verdicts.

    python scripts/run_examples.py [--out runs] [name ...]
"""
import argparse
import time
from pathlib import Path

from mixbound import harness as H

DEFAULT = ("heat_gaussian_2d", "heat_dipole_2d", "heat_powerlaw_2d", "heat_gaussian_3d",
           "ad_shear_nu2_2d", "pure_advection_2d")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", default=DEFAULT)
    p.add_argument("--out", default="runs")
    args = p.parse_args()
    for name in args.names:
        t0 = time.perf_counter()
        rep = H.run_experiment(H.load_config(name), Path(args.out) / name)
        slope = rep.fit("theta_l2").slope
        verdicts = ", ".join(f"{v.bound}={v.status}" for v in rep.verdicts)
        print(f"{name:<20} theta slope {slope:+.4f}  lambda {rep.classification['observed_label']:<8} "
              f"{verdicts}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
