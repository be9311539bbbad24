"""Exact robustness of preferential-attachment graphs versus their target.

For every target r and size n (n <= --max-n) the script builds graphs for a
range of seeds and reports the smallest and largest exact robustness seen.
"""

import argparse

from resilient_ogd.graph import build_robust_graph, max_robustness


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--max-n", type=int, default=12)
    args = p.parse_args()
    print(f"{'r':>2} {'n':>3} {'min':>4} {'max':>4}")
    for r in range(1, (args.max_n - 1) // 2 + 1):
        for n in range(2 * r + 1, args.max_n + 1):
            rob = [max_robustness(build_robust_graph(n, r, s), limit=args.max_n) for s in range(args.seeds)]
            flag = "" if min(rob) >= r else "  below target"
            print(f"{r:2d} {n:3d} {min(rob):4d} {max(rob):4d}{flag}")


if __name__ == "__main__":
    main()
