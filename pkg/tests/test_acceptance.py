"""End-to-end acceptance checks.

Each test carries a ``criterion`` marker; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the session. The "acceptance
runs" are the paper-scale sensor experiment for seeds 0..9.
"""

import itertools
import math
import time

import numpy as np
import pytest

from resilient_ogd.config import preset
from resilient_ogd.costs import CostTable, SensorModel, SensorStream, step_size
from resilient_ogd.equivalence import (
    EquivalentMatrix,
    estimate_q_all,
    sublinearity_constants,
    zeta_series,
)
from resilient_ogd.experiment import run_experiment, simulate
from resilient_ogd.graph import (
    AdversaryPlacement,
    Graph,
    build_robust_graph,
    check_assumptions,
    cycle_graph,
    is_r_robust,
    path_graph,
    place_adversaries,
)
from resilient_ogd.protocol import AdversaryStrategy, regular_update, run_round
from resilient_ogd.regret import (
    WeightSchedule,
    log_square_fit,
    offline_optimum,
    solve_z_star,
    theoretical_bounds,
    weighted_objective,
)

SEEDS = range(10)
CHECKPOINTS = (100, 250, 500, 1000)
BUDGET_S = 300.0


def criterion(num, label):
    return pytest.mark.criterion(num, label)


# --------------------------------------------------------------------------
# paper-scale runs shared by several criteria


def _summarize_run(seed):
    t0 = time.perf_counter()
    res = run_experiment(preset("paper", seed=seed, plot=False))
    elapsed = time.perf_counter() - t0
    T = res.T
    k = np.array(CHECKPOINTS) - 1
    F_obj, _ = weighted_objective(res.table, res.schedule)
    z = float(res.regret.z_star[-1])
    _, spread_T = estimate_q_all(res.sim.matrices[:T + 1])
    q_used = res.q[:T + 2]
    return dict(
        seed=seed,
        F=res.placement.F,
        n=res.graph.n,
        adversaries=len(res.placement.adversarial),
        f_local=res.placement.is_f_local(res.graph),
        seconds=elapsed,
        network=res.regret.network[k],
        agent_max=res.regret.agent_max[k],
        agent_min=res.regret.agent_min[k],
        dev50=float(res.trace.deviation[50]),
        dev1000=float(res.trace.deviation[1000]),
        z_gap=(F_obj(z + 1e-4) - F_obj(z), F_obj(z - 1e-4) - F_obj(z)),
        q_sum_err=float(np.max(np.abs(q_used.sum(axis=1) - 1))),
        spread_T=float(np.max(spread_T[:T - 200 + 1])),
        q_positive=int(np.min(np.sum(q_used > 1e-12, axis=1))),
    )


@pytest.fixture(scope="module")
def paper_runs():
    return [_summarize_run(s) for s in SEEDS]


# --------------------------------------------------------------------------
# criteria 1 and 2: randomized round suite


def _suite_config(k):
    rng = np.random.default_rng(1000 + k)
    F = int(rng.integers(1, 3))
    r = 2 * F + 1
    n = int(rng.integers(2 * r + 1, 25))
    g = build_robust_graph(n, r, seed=k)
    count = int(rng.integers(1, max(2, n // 5) + 1))
    try:
        pl = place_adversaries(g, count, F, seed=k)
    except ValueError:
        pl = place_adversaries(g, 1, F, seed=k)
    kind = ("constant", "uniform", "conflicting", "tracking")[k % 4]
    params = {"constant": "40", "uniform": "-25 25", "conflicting": "-100 100", "tracking": "5"}[kind]
    strat = {a: AdversaryStrategy.parse(kind, params, seed=k) for a in pl.adversarial}
    model = SensorModel.sample(n, float(rng.uniform(-5, 5)), 1.0, seed=k)
    x0 = np.full(n, np.nan)
    reg = pl.regular(g)
    x0[reg] = rng.uniform(-10, 10, len(reg))
    rho_step = float(np.mean(model.H[reg] ** 2))
    return g, pl, strat, SensorStream(model), x0, rho_step


@pytest.fixture(scope="module")
def round_suite():
    runs = []
    for k in range(24):
        g, pl, strat, stream, x0, rho_step = _suite_config(k)
        rep = check_assumptions(g, pl)
        sim = simulate(g, pl, stream, strat, x0, 60, rho_step, keep_records=True)
        runs.append((g, pl, rep, sim))
    return runs


@criterion(1, "equivalence oracle")
def test_equivalence_oracle(round_suite):
    rounds = sum(len(sim.records) for *_, sim in round_suite)
    assert len(round_suite) >= 20 and rounds >= 1000
    worst = 0.0
    for g, pl, rep, sim in round_suite:
        assert rep.ok and rep.robust is not False
        reg = pl.regular(g)
        for t, rec in enumerate(sim.records):
            M = sim.matrices[t]
            resid = M @ sim.states[t] - sim.etas[t] * sim.gradients[t] - sim.states[t + 1]
            worst = max(worst, float(np.max(np.abs(resid))))
            EquivalentMatrix(M, t).check(g, reg, pl.F, tol=1e-12)
    assert worst < 1e-9


@criterion(2, "safety")
def test_safety(round_suite):
    violations = 0
    for g, pl, _, sim in round_suite:
        for rec in sim.records:
            for i, oc in rec.outcomes.items():
                pre = regular_update(oc, {j: oc.value_of(j) for j in (i, *oc.received)}, 0.0, 0.0)
                hood = [rec.states[j] for j in g.neighbors(i) if j not in pl.adversarial] + [rec.states[i]]
                lo, hi = min(hood), max(hood)
                slack = 1e-12 * max(1.0, abs(lo), abs(hi))
                if not lo - slack <= pre <= hi + slack:
                    violations += 1
    assert violations == 0


# --------------------------------------------------------------------------
# criterion 3


@criterion(3, "robustness oracle agreement")
def test_robustness_oracle():
    t0 = time.perf_counter()
    failures = []
    checked = 0
    for seed in range(50):
        for r in range(1, 5):
            for n in range(2 * r + 1, 11):
                checked += 1
                if not is_r_robust(build_robust_graph(n, r, seed), r):
                    failures.append((seed, r, n))
    assert checked == 1000
    assert failures == []
    assert time.perf_counter() - t0 < BUDGET_S


# --------------------------------------------------------------------------
# criteria 4 and 5


@criterion(4, "paper experiment sublinearity")
def test_paper_experiment(paper_runs):
    for run in paper_runs:
        assert run["n"] == 100 and run["adversaries"] == 15 and run["f_local"]
        assert run["seconds"] < BUDGET_S
        cps = np.array(CHECKPOINTS)
        for key in ("network", "agent_max", "agent_min"):
            avg = run[key] / cps
            assert np.all(np.diff(avg) < 0), (run["seed"], key, avg)


@criterion(5, "functional form")
def test_functional_form(paper_runs):
    fits = []
    for run in paper_runs:
        coef, r2 = log_square_fit(CHECKPOINTS, run["network"])
        fits.append((run["seed"], float(coef[2]), r2))
    bad = [f for f in fits if not (f[2] >= 0.95 and f[1] >= 0)]
    assert bad == [], f"(seed, c, R^2) failing: {bad}"


# --------------------------------------------------------------------------
# criterion 6


def _consensus_graphs():
    graphs = [(cycle_graph(8), 0), (cycle_graph(12), 0), (path_graph(6), 0)]
    rng = np.random.default_rng(7)
    while len(graphs) < 8:
        n = int(rng.integers(5, 13))
        es = [p for p in itertools.combinations(range(n), 2) if rng.random() < 0.35]
        g = Graph.from_edges(n, es)
        if g.is_connected():
            graphs.append((g, 0))
    for s in range(3):
        graphs.append((build_robust_graph(20, 3, s), 1))
        graphs.append((build_robust_graph(40, 5, s), 2))
    return graphs


@criterion(6, "consensus contraction")
def test_consensus_contraction(paper_runs):
    for run in paper_runs:
        assert run["dev1000"] < run["dev50"]
    for g, F in _consensus_graphs():
        assert g.is_connected()
        pl = AdversaryPlacement.of([], F)
        x = np.random.default_rng(g.n).uniform(-10, 10, g.n)
        for _ in range(500):
            x, _ = run_round(g, pl, x, {}, np.zeros(g.n), 0.0)
        assert np.ptp(x) < 1e-9


# --------------------------------------------------------------------------
# criterion 7


@criterion(7, "analytic cross-checks")
def test_analytic_cross_checks():
    t = np.arange(1, 10**6 + 1)
    for rho in (0.01, 0.5, 1.0, 7.0):
        etas = 1.0 / (rho * t)
        for s in (1, 17, 10**6):
            assert etas[s - 1] == step_size(s, rho)
        assert np.all(np.cumsum(etas) <= (1 + np.log(t)) / rho)

    rng = np.random.default_rng(2024)
    for _ in range(100):
        C = rng.uniform(0.1, 10)
        theta = rng.uniform(0, 0.99)
        L = rng.uniform(0.1, 50)
        rho = rng.uniform(0.01, 5)
        T = int(rng.integers(1, 5000))
        R = int(rng.integers(1, 100))
        x0 = rng.uniform(-10, 10, R)
        z = zeta_series(T, C, theta, L, R, lambda r: step_size(r, rho), x0)
        C1, C2 = sublinearity_constants(C, theta, L, rho, R, x0)
        bound = C1 + C2 * (1 + math.log(T))
        assert z.sum() <= bound * (1 + 1e-12)

        b = theoretical_bounds(L, rho, C1, C2, rng.uniform(0, 20))
        assert b.B1 - b.A1 == pytest.approx(2 * L * C1, rel=1e-12, abs=1e-12)
        assert b.B2 - b.A2 == pytest.approx(2 * L * C2, rel=1e-12, abs=1e-12)


# --------------------------------------------------------------------------
# criterion 8


@criterion(8, "z* solver")
def test_z_star_solver(paper_runs):
    rng = np.random.default_rng(88)
    worst = 0.0
    for _ in range(100):
        T, R = int(rng.integers(1, 50)), int(rng.integers(1, 20))
        H = rng.uniform(0.1, 2, (T, R))
        z = rng.normal(scale=5, size=(T, R))
        zeros = np.zeros((T, R))
        tab = CostTable(H**2, z / H, zeros, zeros)
        sch = WeightSchedule(rng.dirichlet(np.ones(R), size=T))
        closed = solve_z_star(tab, sch, method="closed")
        general = solve_z_star(tab, sch, method="general")
        worst = max(worst, abs(closed - general))
    assert worst < 1e-8
    for run in paper_runs:
        up, down = run["z_gap"]
        assert up >= 0 and down >= 0


# --------------------------------------------------------------------------
# criteria 9 and 10


@criterion(9, "q-vector quality")
def test_q_quality(paper_runs):
    for run in paper_runs:
        assert run["q_sum_err"] <= 1e-10
        assert run["spread_T"] < 1e-6
        assert run["q_positive"] >= run["F"] + 1


@criterion(10, "offline noiseless recovery")
def test_offline_noiseless():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        truth = float(rng.uniform(-50, 50))
        model = SensorModel.sample(int(rng.integers(1, 120)), truth, 0.0, seed=seed)
        z = np.array([model.measurements(t) for t in range(1, 201)])
        assert abs(offline_optimum(model.H, z) - truth) < 1e-10
    res = run_experiment(preset("smoke", sigma=0.0, true_x=3.25, plot=False))
    assert abs(res.manifest["offline_all"] - 3.25) < 1e-10
    assert abs(res.manifest["offline_regular"] - 3.25) < 1e-10
