"""Weighted regret against the hindsight point of a weighted objective.

Rounds are 1-based: row ``k`` of a schedule or cost table is round ``k+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import CostTable

GOLDEN = (math.sqrt(5) - 1) / 2


class DegenerateObjective(ValueError):
    pass


@dataclass(frozen=True)
class WeightSchedule:
    alpha: np.ndarray  # (T, R); row k is alpha(k+1)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 2:
            raise ValueError("alpha must be a (T, R) array")
        if np.any(a < -1e-15) or np.any(a > 1 + 1e-12):
            raise ValueError("alpha entries must lie in [0, 1]")
        if np.max(np.abs(a.sum(axis=1) - 1)) > 1e-10:
            raise ValueError("alpha rows must sum to 1")
        object.__setattr__(self, "alpha", a)

    @property
    def T(self) -> int:
        return self.alpha.shape[0]

    def head(self, T: int) -> "WeightSchedule":
        return WeightSchedule(self.alpha[:T])


def minimize_convex(f, df, lo: float, hi: float, tol: float = 1e-10, coarse: float = 1e-3):
    """Minimise a convex scalar function on ``[lo, hi]``.

    Golden-section search narrows the bracket to ``coarse`` relative width,
    then bisection on the sign of the (sub)derivative finishes to ``tol``.
    """
    a, b = float(lo), float(hi)
    width = coarse * max(1.0, b - a)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    # for unimodal f the minimiser stays inside [a, b], boundary included
    while b - a > tol:
        mid = 0.5 * (a + b)
        g = df(mid)
        if g > 0:
            b = mid
        elif g < 0:
            a = mid
        else:
            return mid
    return 0.5 * (a + b)


def weighted_objective(table: CostTable, schedule: WeightSchedule):
    """``F(x) = sum_t sum_j alpha_j(t) f_t^j(x)`` and its (sub)derivative."""
    A = schedule.alpha
    wa, m, wb = A * table.a, table.m, A * table.b
    const = float(np.sum(A * table.c))

    def F(x: float) -> float:
        d = x - m
        return float(np.sum(0.5 * wa * d * d + wb * np.abs(d))) + const

    def dF(x: float) -> float:
        d = x - m
        return float(np.sum(wa * d + wb * np.sign(d)))

    return F, dF


def solve_z_star(
    table: CostTable,
    schedule: WeightSchedule,
    bounds: tuple[float, float] = (-100.0, 100.0),
    method: str = "auto",
    tol: float = 1e-10,
) -> float:
    """Minimiser of the alpha-weighted cumulative cost.

    Quadratic tables use the closed form ``sum(alpha a m) / sum(alpha a)``;
    anything else (or ``method="general"``) goes through
    :func:`minimize_convex` on ``bounds``.
    """
    if schedule.T != table.T:
        raise ValueError("schedule and cost table cover different horizons")
    if table.T < 1:
        raise ValueError("need at least one round")
    A = schedule.alpha
    den = float(np.sum(A * table.a))
    if den <= 0:
        raise DegenerateObjective("weighted curvature vanishes")
    if method == "closed" or (method == "auto" and table.quadratic):
        if not table.quadratic:
            raise ValueError("closed form needs a quadratic table")
        return float(np.sum(A * table.a * table.m)) / den
    F, dF = weighted_objective(table, schedule)
    return minimize_convex(F, dF, bounds[0], bounds[1], tol=tol)


def _round_costs_at(table: CostTable, schedule: WeightSchedule, points: np.ndarray) -> np.ndarray:
    """``out[t, k] = sum_i alpha_i(t) f_t^i(points[t, k])``."""
    P = points[:, None, :]  # (T, 1, K)
    vals = 0.5 * table.a[:, :, None] * (P - table.m[:, :, None]) ** 2
    vals += table.b[:, :, None] * np.abs(P - table.m[:, :, None])
    vals += table.c[:, :, None]
    return np.einsum("ti,tik->tk", schedule.alpha, vals)


def _reference_costs(table: CostTable, schedule: WeightSchedule, z: float) -> np.ndarray:
    return np.sum(schedule.alpha * table.values(z), axis=1)


def agent_regret_all(states: np.ndarray, table: CostTable, schedule: WeightSchedule, z_star: float) -> np.ndarray:
    """Cumulative ``Reg^j_{alpha,t}`` for every agent ``j``: shape ``(T, R)``.

    ``states[k, j]`` is ``x_j(k+1)``.
    """
    own = _round_costs_at(table, schedule, states)
    ref = _reference_costs(table, schedule, z_star)
    return np.cumsum(own - ref[:, None], axis=0)


def agent_regret(j: int, states: np.ndarray, table: CostTable, schedule: WeightSchedule, z_star: float) -> np.ndarray:
    own = _round_costs_at(table, schedule, states[:, [j]])[:, 0]
    return np.cumsum(own - _reference_costs(table, schedule, z_star))


def network_regret(states: np.ndarray, table: CostTable, schedule: WeightSchedule, z_star: float) -> np.ndarray:
    """Cumulative ``Reg_{alpha,t}``: every agent evaluated at its own state."""
    own = np.sum(schedule.alpha * table.values(states), axis=1)
    return np.cumsum(own - _reference_costs(table, schedule, z_star))


@dataclass
class HorizonRegret:
    horizons: np.ndarray
    z_star: np.ndarray
    network: np.ndarray
    agent_min: np.ndarray
    agent_max: np.ndarray


def horizon_regret(
    states: np.ndarray,
    table: CostTable,
    schedule: WeightSchedule,
    horizons,
    bounds: tuple[float, float] = (-100.0, 100.0),
) -> HorizonRegret:
    """Regret for several horizons ``T``, each against its own ``z*_T``."""
    hs = np.asarray(sorted(set(int(h) for h in horizons)))
    own_agent = np.cumsum(_round_costs_at(table, schedule, states), axis=0)
    own_net = np.cumsum(np.sum(schedule.alpha * table.values(states), axis=1))
    if table.quadratic:
        # z*_T from running sums; F_T(z) from running moments
        wa = schedule.alpha * table.a
        s0 = np.cumsum(wa.sum(axis=1))
        s1 = np.cumsum((wa * table.m).sum(axis=1))
        s2 = np.cumsum((wa * table.m**2).sum(axis=1))
        sc = np.cumsum((schedule.alpha * table.c).sum(axis=1))
        k = hs - 1
        z = s1[k] / s0[k]
        ref = 0.5 * (z * z * s0[k] - 2 * z * s1[k] + s2[k]) + sc[k]
    else:
        z = np.array([solve_z_star(table.head(h), schedule.head(h), bounds) for h in hs])
        ref = np.array([
            float(np.sum(_reference_costs(table.head(h), schedule.head(h), zz)))
            for h, zz in zip(hs, z)
        ])
        k = hs - 1
    agents = own_agent[k] - ref[:, None]
    return HorizonRegret(hs, z, own_net[k] - ref, agents.min(axis=1), agents.max(axis=1))


def alpha_quality(schedule: WeightSchedule, beta: float) -> int:
    """``min_t #{i : alpha_i(t) >= beta}``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return int(np.min(np.sum(schedule.alpha >= beta, axis=1)))


@dataclass(frozen=True)
class RegretBounds:
    A1: float
    A2: float
    A3: float
    B1: float
    B2: float
    B3: float

    def network_bound(self, T) -> np.ndarray | float:
        u = 1 + np.log(T)
        return self.A1 + self.A2 * u + self.A3 * u * u

    def agent_bound(self, T) -> np.ndarray | float:
        u = 1 + np.log(T)
        return self.B1 + self.B2 * u + self.B3 * u * u


def theoretical_bounds(L: float, rho: float, C1: float, C2: float, y0_dist: float) -> RegretBounds:
    """Constants of the ``(1 + ln T)^2`` network and agent regret bounds."""
    if L <= 0 or rho <= 0:
        raise ValueError("L and rho must be positive")
    if C1 < 0 or C2 < 0 or y0_dist < 0:
        raise ValueError("C1, C2 and the initial distance must be non-negative")
    d = y0_dist
    A1 = L * C1 + rho * C1 * d + rho / 2 * d * d
    A2 = L * (C1 + C2) + L * L / (2 * rho) + (L + rho * C2) * d
    A3 = L * L / (2 * rho) + L * C2
    B1 = 3 * L * C1 + rho * C1 * d + rho / 2 * d * d
    B2 = L * (C1 + 3 * C2) + L * L / (2 * rho) + (L + rho * C2) * d
    return RegretBounds(A1, A2, A3, B1, B2, A3)


def offline_optimum(H: np.ndarray, z: np.ndarray, agents=None) -> float:
    """Per-round least-squares estimate averaged over rounds.

    ``z[t, i]`` is sensor ``i``'s measurement in round ``t``; ``agents``
    restricts the sums (default: every sensor).
    """
    H = np.asarray(H, dtype=float)
    z = np.asarray(z, dtype=float)
    if agents is not None:
        idx = list(agents)
        H, z = H[idx], z[:, idx]
    den = float(np.sum(H * H))
    if den <= 0:
        raise DegenerateObjective("all observation gains are zero")
    return float(np.mean(z @ H) / den)


def log_square_fit(T, reg) -> tuple[np.ndarray, float]:
    """Least-squares ``reg ~ a + b u + c u^2`` with ``u = 1 + ln T``; returns coefficients and R^2."""
    u = 1 + np.log(np.asarray(T, dtype=float))
    X = np.column_stack([np.ones_like(u), u, u * u])
    y = np.asarray(reg, dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return coef, r2
