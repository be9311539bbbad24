"""One synchronous round of trimmed-mean online gradient descent.

Every regular agent broadcasts its state, drops the ``F`` largest and ``F``
smallest values it received, averages the rest together with its own
state, and takes a gradient step. Adversarial agents may send a different
value to every neighbour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .graph import AdversaryPlacement, Graph

ADVERSARY_STREAM = 3
FILTERS = ("literal", "relative")


class ProtocolViolation(RuntimeError):
    """A regular agent has fewer than ``2F+1`` neighbours."""


class Transmission(NamedTuple):
    sender: int
    receiver: int
    value: float


@dataclass(frozen=True)
class FilterOutcome:
    agent: int
    own_value: float
    received: Mapping[int, float]
    kept: tuple  # J_i(t), includes ``agent``
    removed_top: tuple
    removed_bottom: tuple
    divisor: int

    def value_of(self, v: int) -> float:
        return self.own_value if v == self.agent else self.received[v]


def trim_filter(
    own_value: float,
    neighbor_transmissions: Sequence[Transmission],
    F: int,
    agent: int | None = None,
    mode: str = "literal",
) -> FilterOutcome:
    """Sort received values by ``(value, sender)`` and trim both ends.

    ``literal`` always removes exactly ``F`` values at each end and divides by
    ``|N_i| - 2F + 1``. ``relative`` only removes values strictly above
    (below) the agent's own value, at most ``F`` per side, and divides by
    the number of kept values.
    """
    if agent is None:
        agent = neighbor_transmissions[0].receiver if neighbor_transmissions else -1
    k = len(neighbor_transmissions)
    if k < 2 * F + 1:
        raise ProtocolViolation(
            f"agent {agent} has {k} neighbours, needs at least {2 * F + 1}"
        )
    order = sorted(neighbor_transmissions, key=lambda tr: (tr.value, tr.sender))
    if mode == "literal":
        n_low = n_high = F
    elif mode == "relative":
        n_low = min(F, sum(1 for tr in order if tr.value < own_value))
        n_high = min(F, sum(1 for tr in order if tr.value > own_value))
    else:
        raise ValueError(f"unknown filter {mode!r}")
    bottom = tuple(tr.sender for tr in order[:n_low])
    top = tuple(tr.sender for tr in order[k - n_high:])
    middle = tuple(tr.sender for tr in order[n_low:k - n_high])
    kept = middle + (agent,)
    divisor = k - 2 * F + 1 if mode == "literal" else len(kept)
    received = {tr.sender: float(tr.value) for tr in neighbor_transmissions}
    return FilterOutcome(agent, float(own_value), received, kept, top, bottom, divisor)


def regular_update(
    outcome: FilterOutcome, values: Mapping[int, float], gradient: float, eta_t: float
) -> float:
    """Trimmed average over ``J_i(t)`` minus ``eta_t * gradient``."""
    if not math.isfinite(gradient):
        raise FloatingPointError(f"non-finite gradient at agent {outcome.agent}")
    if eta_t < 0:
        raise ValueError("step size must be non-negative")
    s = 0.0
    for j in outcome.kept:
        s += values[j]
    return s / outcome.divisor - eta_t * gradient


# --------------------------------------------------------------------------
# adversaries


@dataclass(frozen=True)
class AdversaryStrategy:
    """Byzantine behaviour selected by name.

    kinds:
      constant     -- ``value`` to everyone
      uniform      -- one draw from ``[lo, hi]`` per round, sent to everyone
      conflicting  -- an independent draw from ``[lo, hi]`` for every receiver
      tracking     -- receiver's own state plus ``offset`` (sign alternates
                      with receiver id parity)
    """

    kind: str
    params: tuple = ()
    seed: int = 0

    KINDS = ("constant", "uniform", "conflicting", "tracking")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown adversary strategy {self.kind!r}")
        need = {"constant": 1, "uniform": 2, "conflicting": 2, "tracking": 1}[self.kind]
        if len(self.params) != need:
            raise ValueError(f"{self.kind} strategy takes {need} parameter(s)")

    @classmethod
    def parse(cls, kind: str, params: str, seed: int = 0) -> "AdversaryStrategy":
        vals = tuple(float(p) for p in params.replace(",", " ").split())
        return cls(kind, vals, seed)

    def _rng(self, sender: int, round: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(ADVERSARY_STREAM, sender, round))
        return np.random.default_rng(ss)


def adversary_transmissions(
    strategy: AdversaryStrategy,
    sender: int,
    neighbors: Sequence[int],
    round: int,
    states: Sequence[float] | None = None,
) -> list[Transmission]:
    """One transmission per neighbour, reproducible from ``(seed, round, receiver)``."""
    nbrs = list(neighbors)
    kind, p = strategy.kind, strategy.params
    if kind == "constant":
        vals = [p[0]] * len(nbrs)
    elif kind == "uniform":
        v = strategy._rng(sender, round).uniform(p[0], p[1])
        vals = [float(v)] * len(nbrs)
    elif kind == "conflicting":
        if not nbrs:
            return []
        # draws are indexed by receiver id, so a receiver's value does not
        # depend on who else is in the neighbourhood
        draws = strategy._rng(sender, round).uniform(p[0], p[1], size=max(nbrs) + 1)
        vals = [float(draws[j]) for j in nbrs]
    else:
        if states is None:
            raise ValueError("tracking adversary needs the current states")
        vals = [float(states[j]) + (p[0] if j % 2 == 0 else -p[0]) for j in nbrs]
    return [Transmission(sender, j, float(v)) for j, v in zip(nbrs, vals)]


# --------------------------------------------------------------------------
# rounds


@dataclass
class RoundRecord:
    t: int
    eta: float
    states: np.ndarray  # x(t) over all vertices, NaN at adversaries
    gradients: np.ndarray  # g(t) over all vertices, NaN at adversaries
    outcomes: dict = field(default_factory=dict)  # regular vertex -> FilterOutcome
    next_states: np.ndarray | None = None

    def transmissions(self) -> list[Transmission]:
        """Transmissions into regular agents (outgoing regular values are their states)."""
        out = []
        for i, oc in sorted(self.outcomes.items()):
            out.extend(Transmission(s, i, v) for s, v in sorted(oc.received.items()))
        return out


def run_round(
    graph: Graph,
    placement: AdversaryPlacement,
    states: np.ndarray,
    strategies: Mapping[int, AdversaryStrategy],
    gradients: np.ndarray,
    eta_t: float,
    t: int = 0,
    mode: str = "literal",
    cap: float = 1e6,
) -> tuple[np.ndarray, RoundRecord]:
    """Synchronous round: every transmission uses the states at time ``t``.

    ``states`` and ``gradients`` are indexed by vertex; adversarial entries
    are ignored. Adversarial values are clipped to ``[-cap, cap]``.
    """
    adv = placement.adversarial
    inbox: dict[int, list[Transmission]] = {i: [] for i in range(graph.n) if i not in adv}
    for i in inbox:
        for j in graph.neighbors(i):
            if j not in adv:
                inbox[i].append(Transmission(j, i, float(states[j])))
    for a in sorted(adv):
        regular_nbrs = [j for j in graph.neighbors(a) if j not in adv]
        for tr in adversary_transmissions(strategies[a], a, regular_nbrs, t, states):
            v = min(max(tr.value, -cap), cap)
            inbox[tr.receiver].append(Transmission(a, tr.receiver, v))

    new = np.full(graph.n, np.nan)
    record = RoundRecord(t, float(eta_t), np.array(states, dtype=float), np.array(gradients, dtype=float))
    for i in sorted(inbox):
        oc = trim_filter(float(states[i]), inbox[i], placement.F, agent=i, mode=mode)
        record.outcomes[i] = oc
        new[i] = regular_update(oc, _Values(oc), float(gradients[i]), eta_t)
    for a in adv:
        record.states[a] = np.nan
        record.gradients[a] = np.nan
    record.next_states = new.copy()
    return new, record


class _Values(Mapping):
    """Read-only view of the values agent ``i`` saw (its own plus received)."""

    def __init__(self, oc: FilterOutcome):
        self._oc = oc

    def __getitem__(self, v):
        return self._oc.value_of(v)

    def __iter__(self):
        yield self._oc.agent
        yield from self._oc.received

    def __len__(self):
        return len(self._oc.received) + 1


def replay_round(record: RoundRecord) -> np.ndarray:
    """Recompute ``x(t+1)`` from the transmissions and gradients stored in a record."""
    new = np.full(len(record.states), np.nan)
    for i, oc in record.outcomes.items():
        new[i] = regular_update(oc, _Values(oc), float(record.gradients[i]), record.eta)
    return new


# --------------------------------------------------------------------------
# line-oriented CSV for round records
#
# columns: t, receiver, sender, value, status
#   status "eta"     step size of the round (receiver = sender = -1)
#   status "size"    number of vertices (receiver = sender = -1)
#   status "self"    receiver's own state
#   status "grad"    receiver's gradient (sender = -1)
#   status "divisor" receiver's averaging divisor (sender = -1)
#   status kept / top / bottom   a received value and what the filter did with it

RECORD_HEADER = "t,receiver,sender,value,status"


def format_round_records(records) -> str:
    lines = [RECORD_HEADER]
    for rec in records:
        t = rec.t
        lines.append(f"{t},-1,-1,{rec.eta!r},eta")
        lines.append(f"{t},-1,-1,{len(rec.states)},size")
        for i in sorted(rec.outcomes):
            oc = rec.outcomes[i]
            lines.append(f"{t},{i},{i},{oc.own_value!r},self")
            lines.append(f"{t},{i},-1,{float(rec.gradients[i])!r},grad")
            lines.append(f"{t},{i},-1,{oc.divisor},divisor")
            for s in oc.kept:
                if s != i:
                    lines.append(f"{t},{i},{s},{oc.received[s]!r},kept")
            for s in oc.removed_top:
                lines.append(f"{t},{i},{s},{oc.received[s]!r},top")
            for s in oc.removed_bottom:
                lines.append(f"{t},{i},{s},{oc.received[s]!r},bottom")
    return "\n".join(lines) + "\n"


def parse_round_records(text: str) -> list[RoundRecord]:
    rows = text.strip().splitlines()
    if not rows or rows[0].strip() != RECORD_HEADER:
        raise ValueError("not a round-record file")
    per_round: dict[int, dict] = {}
    for row in rows[1:]:
        t_s, r_s, s_s, v_s, status = row.split(",")
        t, r, s = int(t_s), int(r_s), int(s_s)
        d = per_round.setdefault(t, {"eta": 0.0, "size": 0, "agents": {}})
        if status == "eta":
            d["eta"] = float(v_s)
            continue
        if status == "size":
            d["size"] = int(v_s)
            continue
        a = d["agents"].setdefault(r, {"kept": [], "top": [], "bottom": [], "recv": {}})
        if status in ("self", "grad", "divisor"):
            a[status] = float(v_s)
        else:
            a[status].append(s)
            a["recv"][s] = float(v_s)
    out = []
    for t in sorted(per_round):
        d = per_round[t]
        states = np.full(d["size"], np.nan)
        grads = np.full(d["size"], np.nan)
        rec = RoundRecord(t, d["eta"], states, grads)
        for i, a in sorted(d["agents"].items()):
            states[i] = a["self"]
            grads[i] = a["grad"]
            rec.outcomes[i] = FilterOutcome(
                i, a["self"], a["recv"], tuple(a["kept"]) + (i,),
                tuple(a["top"]), tuple(a["bottom"]), int(a["divisor"]),
            )
        out.append(rec)
    return out
