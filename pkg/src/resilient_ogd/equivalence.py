"""Regular-agent matrix form of the filtered update and its products.

A surviving adversarial value always lies between two regular values the
agent discarded, so it can be rewritten as a convex combination of them.
Doing this for every agent gives a row-stochastic matrix ``M(t)`` over the
regular agents with ``x(t+1) = M(t) x(t) - eta(t) g(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .protocol import FilterOutcome, RoundRecord


class AdversaryBudgetViolated(RuntimeError):
    """A surviving adversarial value has no regular value bracketing it."""


@dataclass(frozen=True)
class EquivalentMatrix:
    entries: np.ndarray
    round: int

    def row_sums_error(self) -> float:
        return float(np.max(np.abs(self.entries.sum(axis=1) - 1.0)))

    def check(self, graph, regular: Sequence[int], F: int, tol: float = 1e-12) -> None:
        """Raise ``AssertionError`` if a structural invariant fails."""
        M = self.entries
        assert np.all(M >= 0), "negative entry"
        assert self.row_sums_error() <= tol, "row not stochastic"
        for a, i in enumerate(regular):
            w = 1.0 / (graph.degree(i) - 2 * F + 1)
            assert M[a, a] >= w - tol, f"self weight of {i} below {w}"
            for b in np.flatnonzero(M[a]):
                j = regular[b]
                assert j == i or graph.has_edge(i, j), f"weight on non-edge ({i},{j})"


def build_equivalent_row(
    outcome: FilterOutcome,
    index: Mapping[int, int],
    divisor: int | None = None,
    mode: str = "literal",
) -> np.ndarray:
    """Row ``M_i(t)`` over the regular agents listed in ``index`` (vertex -> column).

    Each regular member of ``J_i(t)`` gets weight ``1/divisor``. An
    adversarial value ``v`` in ``J_i(t)`` is split between the closest
    regular values ``u >= v`` among ``U_i(t)`` and ``l <= v`` among
    ``L_i(t)``: ``l`` gets ``lambda/divisor`` and ``u`` gets
    ``(1-lambda)/divisor`` with ``lambda = (u - v)/(u - l)``. With the
    relative filter the agent's own value is also a bracketing candidate.
    """
    R = len(index)
    row = np.zeros(R)
    w = 1.0 / (divisor if divisor is not None else outcome.divisor)
    for j in outcome.kept:
        if j in index:
            row[index[j]] += w
            continue
        v = outcome.received[j]
        upper = [s for s in outcome.removed_top if s in index]
        lower = [s for s in outcome.removed_bottom if s in index]
        if mode == "relative":
            upper.append(outcome.agent)
            lower.append(outcome.agent)
        upper = [s for s in upper if outcome.value_of(s) >= v]
        lower = [s for s in lower if outcome.value_of(s) <= v]
        if not upper or not lower:
            raise AdversaryBudgetViolated(
                f"agent {outcome.agent}: value {v} from {j} has no regular bracket"
            )
        ru = min(upper, key=lambda s: (outcome.value_of(s), s))
        rl = min(lower, key=lambda s: (-outcome.value_of(s), s))
        xu, xl = outcome.value_of(ru), outcome.value_of(rl)
        lam = 1.0 if xu == xl else (xu - v) / (xu - xl)
        row[index[rl]] += lam * w
        row[index[ru]] += (1.0 - lam) * w
    return row


def build_M(record: RoundRecord, regular: Sequence[int], mode: str = "literal") -> EquivalentMatrix:
    index = {v: k for k, v in enumerate(regular)}
    rows = [build_equivalent_row(record.outcomes[i], index, mode=mode) for i in regular]
    return EquivalentMatrix(np.vstack(rows), record.t)


# --------------------------------------------------------------------------
# transition products


def _by_round(matrices) -> dict[int, np.ndarray]:
    if isinstance(matrices, Mapping):
        return {k: getattr(m, "entries", m) for k, m in matrices.items()}
    out = {}
    for k, m in enumerate(matrices):
        if isinstance(m, EquivalentMatrix):
            out[m.round] = m.entries
        else:
            out[k] = np.asarray(m)
    return out


def phi_product(matrices, s: int, t: int) -> np.ndarray:
    """``Phi(t, s) = M(t) M(t-1) ... M(s)``."""
    if s > t:
        raise ValueError("need s <= t")
    by = _by_round(matrices)
    missing = [k for k in range(s, t + 1) if k not in by]
    if missing:
        raise ValueError(f"rounds {missing[:5]} not recorded")
    P = by[s].copy()
    for k in range(s + 1, t + 1):
        P = by[k] @ P
    return P


def row_spread(P: np.ndarray) -> float:
    """Largest column range of ``P`` (zero once all rows agree)."""
    return float(np.max(P.max(axis=0) - P.min(axis=0)))


@dataclass(frozen=True)
class WeightEstimate:
    q: np.ndarray
    anchor: int
    horizon: int
    row_spread: float


def estimate_q(matrices, s: int, t_end: int) -> WeightEstimate:
    """Limit weights ``q(s)`` as the column means of ``Phi(t_end, s)``."""
    P = phi_product(matrices, s, t_end)
    return WeightEstimate(P.mean(axis=0), s, t_end, row_spread(P))


def estimate_q_all(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``q(s)`` and row spread of ``Phi(K-1, s)`` for every ``s < K``.

    ``stack[k]`` is ``M(k)``. Works backwards with
    ``Phi(K-1, s) = Phi(K-1, s+1) M(s)`` so the whole sweep is ``K`` matrix
    products.
    """
    K, R, _ = stack.shape
    q = np.empty((K, R))
    spread = np.empty(K)
    P = np.eye(R)
    for s in range(K - 1, -1, -1):
        P = P @ stack[s]
        q[s] = P.mean(axis=0)
        spread[s] = row_spread(P)
    return q, spread


def forward_spreads(stack: np.ndarray) -> np.ndarray:
    """Row spread of ``Phi(t, 0)`` for ``t = 0..K-1``."""
    P = np.eye(stack.shape[1])
    out = np.empty(len(stack))
    for t, M in enumerate(stack):
        P = M @ P
        out[t] = row_spread(P)
    return out


# --------------------------------------------------------------------------
# consensus surrogate


@dataclass
class ConsensusTrace:
    y: np.ndarray  # direct: <q(t), x(t)>
    y_recursive: np.ndarray
    deviation: np.ndarray  # max_i |x_i(t) - y(t)|

    @property
    def discrepancy(self) -> float:
        return float(np.max(np.abs(self.y - self.y_recursive)))


def consensus_trace(
    states: np.ndarray, q: np.ndarray, gradients: np.ndarray, etas: np.ndarray
) -> ConsensusTrace:
    """``y(t)`` computed directly and through ``y(t+1) = y(t) - eta(t) q(t+1).g(t)``.

    ``states[t]`` is ``x(t)`` over regular agents; ``q[t]`` the estimate of
    ``q(t)``; ``gradients[t]`` and ``etas[t]`` belong to round ``t``.
    """
    K = len(q)
    y = np.einsum("tr,tr->t", q, states[:K])
    yr = np.empty(K)
    yr[0] = y[0]
    for t in range(K - 1):
        yr[t + 1] = yr[t] - etas[t] * float(q[t + 1] @ gradients[t])
    dev = np.max(np.abs(states[:K] - y[:, None]), axis=1)
    return ConsensusTrace(y, yr, dev)


# --------------------------------------------------------------------------
# deviation bounds


def _eta_fn(eta) -> Callable[[int], float]:
    if callable(eta):
        return eta
    seq = np.asarray(eta, dtype=float)
    return lambda r: float(seq[r])


def zeta_bound(k: int, C: float, theta: float, L: float, R: int, eta, initial_norms) -> float:
    """Bound on ``|x_i(k) - y(k)|`` that holds for every regular agent ``i``."""
    if C <= 0:
        raise ValueError("C must be positive")
    if not 0 <= theta < 1:
        raise ValueError("theta must lie in [0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    et = _eta_fn(eta)
    x0 = float(np.sum(np.abs(initial_norms)))
    tail = sum(et(r) * theta ** (k - r - 2) for r in range(0, k - 1))
    return C * theta ** (k - 1) * x0 + R * C * L * tail + 2 * et(k - 1) * L


def zeta_series(T: int, C: float, theta: float, L: float, R: int, eta, initial_norms) -> np.ndarray:
    """``zeta(1..T)`` in O(T) using the geometric recursion of the middle sum."""
    if C <= 0 or not 0 <= theta < 1:
        raise ValueError("need C > 0 and theta in [0, 1)")
    et = _eta_fn(eta)
    x0 = float(np.sum(np.abs(initial_norms)))
    out = np.empty(T)
    acc = 0.0  # sum_{r=0}^{k-2} eta(r) theta^(k-r-2)
    for k in range(1, T + 1):
        if k >= 2:
            acc = acc * theta + et(k - 2)
        out[k - 1] = C * theta ** (k - 1) * x0 + R * C * L * acc + 2 * et(k - 1) * L
    return out


def sublinearity_constants(
    C: float, theta: float, L: float, rho: float, R: int, initial_norms
) -> tuple[float, float]:
    """``(C1, C2)`` with ``sum_{t<=T} zeta(t) <= C1 + C2 (1 + ln T)`` for ``eta = 1/(rho t)``."""
    x0 = float(np.sum(np.abs(initial_norms)))
    C1 = C / (1 - theta) * x0
    C2 = 2 * L / rho + R * C * L / (rho * (1 - theta))
    return C1, C2


@dataclass(frozen=True)
class ThetaEstimate:
    C: float
    theta: float
    ok: bool
    points: int
    message: str = ""


def estimate_theta(stack, floor: float = 1e-13) -> ThetaEstimate:
    """Fit ``spread(Phi(t, 0)) ~ C theta^t`` by least squares on the log spread.

    Points at or below ``floor`` (round-off) are left out of the fit.
    """
    mats = np.asarray([getattr(m, "entries", m) for m in stack])
    if len(mats) < 10:
        raise ValueError("need at least 10 rounds")
    sp = forward_spreads(mats)
    t = np.arange(len(sp))
    keep = sp > floor
    if not np.any(keep):
        return ThetaEstimate(0.0, 0.0, True, 0, "spread vanished")
    if keep.sum() < 2:
        return ThetaEstimate(float(sp[keep][0]), 0.0, True, 1, "single point above floor")
    slope, intercept = np.polyfit(t[keep], np.log(sp[keep]), 1)
    theta = float(np.exp(slope))
    if theta >= 1:
        return ThetaEstimate(float(np.exp(intercept)), theta, False, int(keep.sum()),
                             "spread does not decay")
    return ThetaEstimate(float(np.exp(intercept)), theta, True, int(keep.sum()))
