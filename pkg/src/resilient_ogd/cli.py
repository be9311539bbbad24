"""Command line entry point.

Exit codes: 0 success, 1 assumption failure or replay mismatch, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, coerce, load_config, parse_overrides, preset
from .experiment import OUTPUT_FILES, AssumptionFailure, run_experiment, summarize
from .graph import (
    AdversaryPlacement,
    build_robust_graph,
    check_assumptions,
    place_adversaries,
    read_graph,
    write_graph,
)
from .plot import emit_plot
from .regret import log_square_fit


def _config_from_args(args) -> RunConfig:
    if args.preset:
        cfg = preset(args.preset)
    else:
        cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = coerce(k.strip(), v)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    return cfg.replace(**overrides)


def cmd_graph_gen(args) -> int:
    g = build_robust_graph(args.n, 2 * args.F + 1, args.seed)
    if args.adversaries:
        pl = place_adversaries(g, args.adversaries, args.F, args.seed)
    else:
        pl = AdversaryPlacement.of((), args.F)
    write_graph(args.out, g, pl)
    print(f"wrote {args.out}: n={g.n} edges={len(g.edges)} adversaries={sorted(pl.adversarial)}")
    return 0


def cmd_graph_check(args) -> int:
    g, pl = read_graph(args.path)
    if args.F is not None:
        pl = AdversaryPlacement(pl.adversarial, args.F)
    rep = check_assumptions(g, pl, args.limit)
    for line in rep.lines():
        print(line)
    return 0 if rep.ok else 1


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    try:
        res = run_experiment(cfg, out_dir=cfg.out_dir)
    except AssumptionFailure as exc:
        print(exc, file=sys.stderr)
        return 1
    print(summarize(res))
    print(f"outputs in {cfg.out_dir}")
    return 0


def _read_regret(run_dir: Path):
    with open(run_dir / "regret.csv") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([int(r["t"]) for r in rows])
    cols = {k: np.array([float(r[k]) for r in rows]) for k in ("network", "agent_min", "agent_max", "bound")}
    return t, cols


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    t, cols = _read_regret(run_dir)
    cfg = parse_overrides((run_dir / "manifest.txt").read_text(), strict=False)
    cps = [c for c in cfg.get("checkpoints", (100, 250, 500, 1000)) if c <= t[-1]]
    idx = {int(v): k for k, v in enumerate(t)}
    vals = []
    for c in cps:
        k = idx[c]
        vals.append(cols["network"][k])
        print(f"T={c:6d}  network/T={cols['network'][k] / c:.6g}  "
              f"agent_max/T={cols['agent_max'][k] / c:.6g}  agent_min/T={cols['agent_min'][k] / c:.6g}  "
              f"bound={cols['bound'][k]:.6g}")
    ratios = [v / c for v, c in zip(vals, cps)]
    print("network regret / T decreasing:", all(b < a for a, b in zip(ratios, ratios[1:])))
    if len(cps) >= 3:
        coef, r2 = log_square_fit(cps, vals)
        print(f"fit a+b(1+lnT)+c(1+lnT)^2: a={coef[0]:.4g} b={coef[1]:.4g} c={coef[2]:.4g} R^2={r2:.4f}")
    return 0


def cmd_plot(args) -> int:
    run_dir = Path(args.run_dir)
    t, cols = _read_regret(run_dir)
    series = {
        "network regret / T": cols["network"] / t,
        "max agent regret / T": cols["agent_max"] / t,
        "min agent regret / T": cols["agent_min"] / t,
    }
    out = Path(args.out) if args.out else run_dir / "regret.svg"
    emit_plot(series, out, x=t, logx=not args.linear, title="Time-averaged regret",
              xlabel="T", ylabel="regret / T")
    print(f"wrote {out}")
    return 0


def cmd_replay(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = RunConfig().replace(**parse_overrides((run_dir / "manifest.txt").read_text(), strict=False))
    out = Path(args.out) if args.out else run_dir / "replay"
    run_experiment(cfg.replace(out_dir=str(out)), out_dir=out)
    mismatched = []
    for name in OUTPUT_FILES:
        a, b = run_dir / name, out / name
        if a.exists() != b.exists() or (a.exists() and a.read_bytes() != b.read_bytes()):
            mismatched.append(name)
    if mismatched:
        print("replay differs in: " + ", ".join(mismatched))
        return 1
    print(f"replay identical ({', '.join(n for n in OUTPUT_FILES if (out / n).exists())})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resilient-ogd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", help="generate or check communication graphs")
    gsub = g.add_subparsers(dest="graph_command", required=True)
    gen = gsub.add_parser("gen", help="write a (2F+1)-robust graph in edge-list format")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--F", type=int, required=True)
    gen.add_argument("--adversaries", type=int, default=0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_graph_gen)
    chk = gsub.add_parser("check", help="diagnose network assumptions of a graph file")
    chk.add_argument("path")
    chk.add_argument("--F", type=int, default=None, help="override F from the file")
    chk.add_argument("--limit", type=int, default=14, help="largest n for exact robustness")
    chk.set_defaults(func=cmd_graph_check)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--preset", choices=("desk", "paper", "smoke"))
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analyze", help="summarize regret of a finished run")
    an.add_argument("run_dir")
    an.set_defaults(func=cmd_analyze)

    pl = sub.add_parser("plot", help="draw regret/T curves of a finished run as SVG")
    pl.add_argument("run_dir")
    pl.add_argument("--out")
    pl.add_argument("--linear", action="store_true", help="linear instead of log x axis")
    pl.set_defaults(func=cmd_plot)

    rp = sub.add_parser("replay", help="re-run from a manifest and compare outputs byte for byte")
    rp.add_argument("run_dir")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
