"""Compare step-size moduli on the paper preset.

``min`` uses the smallest sensor curvature (the literal schedule), ``mean``
the average regular curvature; numbers are used as given.
"""

import argparse

import numpy as np

from resilient_ogd.config import preset
from resilient_ogd.experiment import run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--choices", nargs="+", default=["min", "mean", "0.5", "4"])
    args = p.parse_args()
    for choice in args.choices:
        res = run_experiment(preset("paper", seed=args.seed, step_rho=choice, plot=False))
        r = res.regret.network
        print(f"step_rho={choice:>5} (rho={res.rho_step:.4g})  max|x|={np.max(np.abs(res.sim.states)):.3g}  "
              f"Reg/T@100={r[99] / 100:.4g}  Reg/T@1000={r[999] / 1000:.4g}")


if __name__ == "__main__":
    main()
