"""Paper-scale sensor experiment over several seeds.

Writes every run to ``<out>/seed_<k>/`` and prints time-averaged regret at
the checkpoints plus the (1 + ln T)^2 fit for each seed.

    python3 scripts/run_paper_experiment.py --seeds 10 --out runs/paper
"""

import argparse
import time
from pathlib import Path

import numpy as np

from resilient_ogd.config import load_config, preset
from resilient_ogd.experiment import run_experiment
from resilient_ogd.regret import log_square_fit


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--config", help="config file (default: paper preset)")
    p.add_argument("--out", default="runs/paper")
    args = p.parse_args()

    base = load_config(args.config) if args.config else preset("paper")
    cps = [c for c in base.checkpoints if c <= base.T]
    print(f"{'seed':>4} {'F':>2} {'sec':>5}  " + "  ".join(f"{'T=' + str(c):>9}" for c in cps)
          + f"  {'c':>9} {'R^2':>7}")
    for seed in range(args.seeds):
        t0 = time.perf_counter()
        res = run_experiment(base.replace(seed=seed), out_dir=Path(args.out) / f"seed_{seed}")
        net = np.array([res.regret.network[c - 1] for c in cps])
        coef, r2 = log_square_fit(cps, net)
        cells = "  ".join(f"{v / c:9.4g}" for v, c in zip(net, cps))
        print(f"{seed:4d} {res.placement.F:2d} {time.perf_counter() - t0:5.1f}  {cells}  "
              f"{coef[2]:9.3g} {r2:7.4f}")


if __name__ == "__main__":
    main()
