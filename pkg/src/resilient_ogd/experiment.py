"""End-to-end experiment: network, simulation, matrix analysis, regret, files."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ADVERSARY_SEED,
    GRAPH_SEED,
    INIT_SEED,
    NOISE_SEED,
    PLACEMENT_SEED,
    REDUCED_SEED,
    TRUTH_SEED,
    RunConfig,
    derive_seed,
    format_config,
    format_value,
)
from .costs import (
    CostTable,
    SensorModel,
    SensorStream,
    StreamConfig,
    SyntheticStream,
    cost_table,
    gradient,
    step_size,
    stream_constants,
)
from .equivalence import (
    ConsensusTrace,
    ThetaEstimate,
    build_M,
    consensus_trace,
    estimate_q_all,
    estimate_theta,
    sublinearity_constants,
)
from .graph import (
    AdversaryPlacement,
    AssumptionReport,
    Graph,
    build_robust_graph,
    check_assumptions,
    enumerate_reduced_graphs,
    place_adversaries,
    read_graph,
)
from .plot import emit_plot
from .protocol import AdversaryStrategy, RoundRecord, format_round_records, run_round
from .regret import (
    HorizonRegret,
    RegretBounds,
    WeightSchedule,
    alpha_quality,
    horizon_regret,
    log_square_fit,
    offline_optimum,
    theoretical_bounds,
)

log = logging.getLogger(__name__)

OUTPUT_FILES = ("states.csv", "regret.csv", "weights.csv", "regret.svg")


class AssumptionFailure(RuntimeError):
    def __init__(self, report: AssumptionReport):
        super().__init__("network assumptions violated:\n  " + "\n  ".join(report.lines()))
        self.report = report


class NumericOverflow(FloatingPointError):
    pass


@dataclass
class Simulation:
    states: np.ndarray  # (K+1, R): x(0..K)
    gradients: np.ndarray  # (K, R)
    etas: np.ndarray  # (K,)
    matrices: np.ndarray  # (K, R, R)
    equivalence_error: float  # max |M x - eta g - x(t+1)|
    records: list = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: RunConfig
    graph: Graph
    placement: AdversaryPlacement
    report: AssumptionReport
    regular: list
    sim: Simulation
    q: np.ndarray
    spread: np.ndarray
    trace: ConsensusTrace
    table: CostTable
    schedule: WeightSchedule
    regret: HorizonRegret
    theta: ThetaEstimate
    bounds: np.ndarray  # network bound per horizon (NaN when unavailable)
    L: float
    rho: float
    rho_step: float
    manifest: dict
    sensor: SensorModel | None = None

    @property
    def T(self) -> int:
        return self.config.T

    def checkpoint(self, T: int) -> dict:
        k = T - 1
        r = self.regret
        return dict(
            T=T,
            z_star=float(r.z_star[k]),
            network=float(r.network[k]),
            agent_min=float(r.agent_min[k]),
            agent_max=float(r.agent_max[k]),
        )


# --------------------------------------------------------------------------
# setup


def build_network(config: RunConfig) -> tuple[Graph, AdversaryPlacement, dict]:
    """Load or generate the graph and an F-local adversary set."""
    if config.graph_file:
        g, pl = read_graph(config.graph_file)
        return g, pl, {"graph_source": config.graph_file}
    Fs = [config.F] if config.F is not None else list(range(1, 8))
    last_err = None
    for F in Fs:
        r = 2 * F + 1
        if config.n < 2 * r + 1:
            break
        for attempt in range(20):
            gseed = (
                config.graph_seed + attempt
                if config.graph_seed is not None
                else derive_seed(config.seed, GRAPH_SEED, attempt)
            )
            g = build_robust_graph(config.n, r, gseed)
            pseed = config.resolved_seed(PLACEMENT_SEED, config.placement_seed)
            try:
                pl = place_adversaries(g, config.adversaries, F, pseed)
            except ValueError as exc:
                last_err = exc
                continue
            return g, pl, {"graph_seed": gseed, "graph_attempt": attempt,
                           "placement_seed": pseed}
    raise ValueError(f"no F-local placement found: {last_err}")


def make_stream(config: RunConfig, n: int):
    if config.stream == "sensor":
        true_x = config.true_x
        if true_x is None:
            rng = np.random.default_rng(derive_seed(config.seed, TRUTH_SEED))
            true_x = float(rng.uniform(-config.K2 / 2, config.K2 / 2))
        model = SensorModel.sample(
            n, true_x, config.sigma, derive_seed(config.seed, NOISE_SEED),
            h_min=config.h_min, resample=config.h_resample,
        )
        return SensorStream(model), model
    sc = StreamConfig(
        kind=config.stream, K1=config.K1, K2=config.K2, rho=config.synthetic_rho,
        seed=derive_seed(config.seed, NOISE_SEED), kink=config.synthetic_kink,
    )
    return SyntheticStream(sc, n), None


def curvature_constants(config: RunConfig, stream, model, regular) -> tuple[float, float, float]:
    """``(L, rho, rho_step)``: Lipschitz bound, strong convexity modulus, step-size modulus."""
    if model is not None:
        L, rho = stream_constants(model, regular, config.K1)
        curv = model.H[regular] ** 2
    else:
        sc = stream.config
        L, rho = sc.synthetic_lipschitz, sc.rho
        curv = stream.params(0)[0][regular]
    if config.step_rho == "min":
        rho_step = rho
    elif config.step_rho == "mean":
        rho_step = float(np.mean(curv))
    else:
        rho_step = float(config.step_rho)
    return L, rho, rho_step


# --------------------------------------------------------------------------
# simulation


def simulate(
    graph: Graph,
    placement: AdversaryPlacement,
    stream,
    strategies,
    x0: np.ndarray,
    rounds: int,
    rho_step: float,
    mode: str = "literal",
    cap: float = 1e6,
    keep_records: bool = False,
    K1: float | None = None,
) -> Simulation:
    """Run ``rounds`` rounds from ``x0`` (indexed by vertex) and build ``M(t)`` as it goes."""
    regular = placement.regular(graph)
    R = len(regular)
    x = np.array(x0, dtype=float)
    states = np.empty((rounds + 1, R))
    states[0] = x[regular]
    grads = np.empty((rounds, R))
    etas = np.empty(rounds)
    mats = np.empty((rounds, R, R))
    err = 0.0
    records = []
    outside = 0
    for t in range(rounds):
        a, m, b, _ = stream.params(t)
        g = gradient(a, m, b, x)
        eta = step_size(t, rho_step)
        x_new, rec = run_round(graph, placement, x, strategies, g, eta, t, mode, cap)
        xr = x_new[regular]
        if not np.all(np.isfinite(xr)):
            raise NumericOverflow(f"non-finite state in round {t}")
        M = build_M(rec, regular, mode).entries
        err = max(err, float(np.max(np.abs(M @ states[t] - eta * g[regular] - xr))))
        mats[t] = M
        grads[t] = g[regular]
        etas[t] = eta
        states[t + 1] = xr
        if K1 is not None and np.max(np.abs(xr)) > K1:
            outside += 1
        if keep_records:
            records.append(rec)
        x = x_new
    if outside:
        log.warning("states left the ball |x| <= %g in %d rounds", K1, outside)
    return Simulation(states, grads, etas, mats, err, records)


# --------------------------------------------------------------------------
# driver


def run_experiment(config: RunConfig, out_dir: str | Path | None = None, keep_records: bool = False) -> ExperimentResult:
    """Simulate, analyse and (if ``out_dir`` is given) write all outputs."""
    t_start = time.perf_counter()
    graph, placement, net_info = build_network(config)
    report = check_assumptions(graph, placement, config.exhaustive_limit)
    if not report.ok and not config.force:
        raise AssumptionFailure(report)
    config = config.replace(F=placement.F)
    regular = placement.regular(graph)
    R = len(regular)

    stream, model = make_stream(config, graph.n)
    L, rho, rho_step = curvature_constants(config, stream, model, regular)
    adv_seed = derive_seed(config.seed, ADVERSARY_SEED)
    strategies = {
        a: AdversaryStrategy.parse(config.strategy, config.strategy_params, adv_seed)
        for a in placement.adversarial
    }
    init_rng = np.random.default_rng(derive_seed(config.seed, INIT_SEED))
    x0 = np.full(graph.n, np.nan)
    x0[regular] = init_rng.uniform(-config.init, config.init, size=R)

    T = config.T
    K = T + config.tail
    sim = simulate(
        graph, placement, stream, strategies, x0, K, rho_step,
        config.filter, config.cap, keep_records or config.write_rounds, config.K1,
    )

    # q(s) for s < K from Phi(K-1, s); alpha(t) = q(t+1) for t = 1..T
    q, spread = estimate_q_all(sim.matrices)
    trace = consensus_trace(sim.states, q, sim.gradients, sim.etas)
    schedule = WeightSchedule(q[2:T + 2])
    table = cost_table(stream, regular, T)
    xs = sim.states[1:T + 1]
    bounds_box = (-config.K1, config.K1)
    regret = horizon_regret(xs, table, schedule, range(1, T + 1), bounds_box)

    theta = estimate_theta(sim.matrices)
    bound_series = np.full(T, np.nan)
    C_used = config.safety_factor * theta.C
    if theta.ok and C_used > 0:
        C1, C2 = sublinearity_constants(C_used, theta.theta, L, rho, R, sim.states[0])
        y0 = trace.y[0]
        for k in range(T):
            bnd = theoretical_bounds(L, rho, C1, C2, abs(y0 - regret.z_star[k]))
            bound_series[k] = bnd.network_bound(k + 1)
    else:
        C1 = C2 = float("nan")

    reduced = enumerate_reduced_graphs(
        graph, placement, config.reduced_budget, derive_seed(config.seed, REDUCED_SEED)
    )
    gamma_hat = min(r.size for r in reduced)
    reduced_connected = all(r.is_connected() for r in reduced)
    positive = schedule.alpha[schedule.alpha > 0]
    beta = 0.5 * float(positive.min())
    gamma_count = alpha_quality(schedule, beta)

    dev = trace.deviation[1:T + 1]
    dominance_gap = float(regret.agent_max[-1] - regret.network[-1])
    dominance_limit = float(2 * L * np.sum(dev))

    realized = {
        "R": R,
        "F": placement.F,
        "adversaries": " ".join(str(a) for a in sorted(placement.adversarial)),
        "max_adversarial_neighbors": report.max_adversarial_neighbors,
        "robustness": report.robustness,
        "robust_clause": report.robust,
        "kappa": graph.kappa,
        "edges": len(graph.edges),
        "rho": rho,
        "rho_step": rho_step,
        "L": L,
        "gamma_hat": gamma_hat,
        "reduced_graphs_checked": len(reduced),
        "reduced_graphs_connected": reduced_connected,
        "C_hat": theta.C,
        "theta_hat": theta.theta,
        "theta_fit_ok": theta.ok,
        "C1": C1,
        "C2": C2,
        "beta": beta,
        "gamma_count": gamma_count,
        "z_star": float(regret.z_star[-1]),
        "network_regret": float(regret.network[-1]),
        "bound_at_T": float(bound_series[-1]),
        "bound_holds": bool(regret.network[-1] <= bound_series[-1]) if theta.ok else "n/a",
        "dominance_gap": dominance_gap,
        "dominance_limit": dominance_limit,
        "dominance_holds": dominance_gap <= dominance_limit,
        "equivalence_error": sim.equivalence_error,
        "y_discrepancy": trace.discrepancy,
        "max_abs_state": float(np.max(np.abs(sim.states))),
        "cap": config.cap,
        **{k: v for k, v in net_info.items()},
    }
    if model is not None:
        z = np.array([model.measurements(t) for t in range(1, T + 1)])
        realized["true_x"] = model.true_x
        realized["offline_all"] = offline_optimum(model.H, z)
        realized["offline_regular"] = offline_optimum(model.H, z, regular)
        realized["H"] = " ".join(repr(float(h)) for h in model.H)
    for c in config.checkpoints:
        if c <= T:
            realized[f"regret_over_T@{c}"] = float(regret.network[c - 1] / c)
    realized["software_version"] = __version__

    result = ExperimentResult(
        config=config, graph=graph, placement=placement, report=report,
        regular=regular, sim=sim, q=q, spread=spread, trace=trace, table=table,
        schedule=schedule, regret=regret, theta=theta, bounds=bound_series,
        L=L, rho=rho, rho_step=rho_step, manifest=realized, sensor=model,
    )
    if out_dir is not None:
        write_outputs(result, out_dir)
        elapsed = time.perf_counter() - t_start
        with open(Path(out_dir) / "manifest.txt", "a") as fh:
            fh.write(f"wall_clock_s = {elapsed:.3f}\n")
    return result


# --------------------------------------------------------------------------
# output files


def _csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(r if isinstance(r, str) else repr(r) for r in row) + "\n")


def write_outputs(result: ExperimentResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg, T = result.config, result.config.T
    reg = result.regular

    _csv(out / "states.csv", "t,agent,value", (
        (t, reg[k], float(result.sim.states[t, k]))
        for t in range(T + 1) for k in range(len(reg))
    ))
    r = result.regret
    _csv(out / "regret.csv", "t,network,agent_min,agent_max,bound", (
        (int(h), float(r.network[k]), float(r.agent_min[k]), float(r.agent_max[k]),
         float(result.bounds[k]))
        for k, h in enumerate(r.horizons)
    ))
    K = len(result.q)
    qcols = ",".join(f"q_{v}" for v in reg)
    _csv(out / "weights.csv", f"s,t_end,row_spread,y,y_recursive,deviation,{qcols}", (
        (s, K - 1, float(result.spread[s]), float(result.trace.y[s]),
         float(result.trace.y_recursive[s]), float(result.trace.deviation[s]),
         *(float(v) for v in result.q[s]))
        for s in range(K)
    ))
    if cfg.write_matrices:
        cols = ",".join(f"w_{v}" for v in reg)
        _csv(out / "matrices.csv", f"t,agent,{cols}", (
            (t, reg[i], *(float(v) for v in result.sim.matrices[t, i]))
            for t in range(len(result.sim.matrices)) for i in range(len(reg))
        ))
    if cfg.write_rounds and result.sim.records:
        (out / "rounds.csv").write_text(format_round_records(result.sim.records))
    if cfg.plot:
        ts = np.arange(1, T + 1)
        emit_plot(
            {
                "network regret / T": r.network / ts,
                "max agent regret / T": r.agent_max / ts,
                "min agent regret / T": r.agent_min / ts,
            },
            out / "regret.svg",
            x=ts,
            logx=True,
            title="Time-averaged regret",
            xlabel="T",
            ylabel="regret / T",
        )
    lines = ["# run configuration (resolved)\n", format_config(cfg), "# realized\n"]
    lines += [f"realized.{k} = {format_value(v)}\n" for k, v in result.manifest.items()]
    lines += [f"# check: {ln}\n" for ln in result.report.lines()]
    (out / "manifest.txt").write_text("".join(lines))


def summarize(result: ExperimentResult) -> str:
    T = result.config.T
    cps = [c for c in result.config.checkpoints if c <= T]
    regs = [float(result.regret.network[c - 1]) for c in cps]
    lines = [f"R={len(result.regular)} F={result.placement.F} rho={result.rho:.4g} "
             f"rho_step={result.rho_step:.4g} L={result.L:.4g}"]
    for c, v in zip(cps, regs):
        k = c - 1
        lines.append(
            f"T={c:6d}  network/T={v / c:.6g}  agent_max/T={result.regret.agent_max[k] / c:.6g}"
            f"  agent_min/T={result.regret.agent_min[k] / c:.6g}"
        )
    if len(cps) >= 3:
        coef, r2 = log_square_fit(cps, regs)
        lines.append(f"fit a+b(1+lnT)+c(1+lnT)^2: c={coef[2]:.4g} R^2={r2:.4f}")
    return "\n".join(lines)
