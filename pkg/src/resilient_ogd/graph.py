"""Communication graphs, adversary placement and robustness certification.

Graphs are static and undirected. Robustness is certified exactly by a
subset dynamic program over all ``2**n`` vertex subsets, so it is only
available for small graphs (``n <= exhaustive_limit``).
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_EXHAUSTIVE_LIMIT = 14


class GraphSizeError(ValueError):
    """Raised when an exhaustive check is requested on a graph that is too large."""


def _edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on vertices ``0..n-1`` without self-loops."""

    n: int
    edges: frozenset
    weights: dict = field(default_factory=dict, compare=False)
    _nbrs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            if i > j:
                raise ValueError("edges must be stored as (low, high) pairs")
            nbrs[i].append(j)
            nbrs[j].append(i)
        for e in self.edges:
            w = self.weights.setdefault(e, 1.0)
            if not w > 0:
                raise ValueError(f"edge {e} has non-positive weight {w}")
        object.__setattr__(self, "_nbrs", tuple(tuple(sorted(a)) for a in nbrs))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, weights: dict | None = None) -> "Graph":
        es = frozenset(_edge(int(i), int(j)) for i, j in edges)
        ws = {}
        if weights:
            ws = {_edge(int(i), int(j)): float(w) for (i, j), w in weights.items()}
        return cls(n, es, ws)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._nbrs[i]

    def degree(self, i: int) -> int:
        return len(self._nbrs[i])

    def has_edge(self, i: int, j: int) -> bool:
        return _edge(i, j) in self.edges

    @property
    def kappa(self) -> float:
        """Smallest edge weight (``inf`` for an edgeless graph)."""
        return min(self.weights[e] for e in self.edges) if self.edges else float("inf")

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for (i, j) in self.edges:
            a[i, j] = a[j, i] = self.weights[(i, j)]
        return a

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the isomorphic graph with vertex ``v`` renamed to ``perm[v]``."""
        return Graph.from_edges(
            self.n,
            ((perm[i], perm[j]) for i, j in self.edges),
            {(perm[i], perm[j]): w for (i, j), w in self.weights.items()},
        )

    def is_connected(self) -> bool:
        return _connected(range(self.n), self.edges)


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)))


def _connected(vertices: Iterable[int], edges: Iterable[tuple[int, int]]) -> bool:
    vs = list(vertices)
    if len(vs) <= 1:
        return True
    adj: dict[int, list[int]] = {v: [] for v in vs}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {vs[0]}
    queue = deque([vs[0]])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == len(vs)


# --------------------------------------------------------------------------
# robustness


def is_r_reachable(graph: Graph, subset: Iterable[int], r: int) -> bool:
    """True iff some vertex of ``subset`` has at least ``r`` neighbours outside it."""
    s = set(subset)
    if not s:
        raise ValueError("subset must be nonempty")
    if not s <= set(range(graph.n)):
        raise ValueError("subset contains unknown vertices")
    return any(sum(1 for j in graph.neighbors(i) if j not in s) >= r for i in s)


def _max_outside_degree(graph: Graph) -> np.ndarray:
    """For every vertex subset S (as a bitmask), max over i in S of |N_i minus S|.

    The empty set gets a sentinel larger than any degree.
    """
    n = graph.n
    masks = np.arange(1 << n, dtype=np.int64)
    best = np.full(1 << n, -1, dtype=np.int64)
    for i in range(n):
        nb = 0
        for j in graph.neighbors(i):
            nb |= 1 << j
        outside = np.bitwise_count(np.int64(nb) & ~masks).astype(np.int64)
        inside = ((masks >> i) & 1).astype(bool)
        best = np.where(inside, np.maximum(best, outside), best)
    best[0] = n + 1
    return best


def _robustness_dp(graph: Graph) -> int:
    n = graph.n
    m = _max_outside_degree(graph)
    # sub_min[mask] = min over nonempty subsets T of mask of m[T]
    sub_min = m.copy()
    for i in range(n):
        view = sub_min.reshape(-1, 2, 1 << i)
        np.minimum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    full = (1 << n) - 1
    s1 = np.arange(1, full, dtype=np.int64)
    return int(np.min(np.maximum(m[s1], sub_min[full ^ s1])))


def _check_size(graph: Graph, limit: int) -> None:
    if graph.n > limit:
        raise GraphSizeError(
            f"exhaustive robustness check refused for n={graph.n} (limit {limit})"
        )


def max_robustness(graph: Graph, limit: int = DEFAULT_EXHAUSTIVE_LIMIT) -> int:
    """Largest r for which ``graph`` is r-robust (0 if it is not even 1-robust)."""
    _check_size(graph, limit)
    if graph.n < 2:
        raise ValueError("robustness of a single-vertex graph is unbounded")
    return _robustness_dp(graph)


def is_r_robust(graph: Graph, r: int, limit: int = DEFAULT_EXHAUSTIVE_LIMIT) -> bool:
    """Exact r-robustness check over all pairs of disjoint nonempty subsets."""
    if r < 1:
        raise ValueError("r must be a positive integer")
    _check_size(graph, limit)
    if graph.n < 2:
        return True
    return _robustness_dp(graph) >= r


def build_robust_graph(n: int, r: int, seed: int) -> Graph:
    """Grow an r-robust graph by seeded preferential attachment.

    Starts from the complete graph on ``2r+1`` vertices; every further vertex
    connects to ``r`` distinct existing vertices drawn with probability
    proportional to their current degree.
    """
    if r < 1:
        raise ValueError("target robustness must be >= 1")
    base = 2 * r + 1
    if n < base:
        raise ValueError(f"need n >= 2r+1 = {base}, got n={n}")
    rng = np.random.default_rng(seed)
    edges = set(itertools.combinations(range(base), 2))
    deg = np.zeros(n)
    deg[:base] = base - 1
    for v in range(base, n):
        p = deg[:v] / deg[:v].sum()
        targets = rng.choice(v, size=r, replace=False, p=p)
        for u in sorted(int(t) for t in targets):
            edges.add((u, v))
            deg[u] += 1
        deg[v] = r
    return Graph.from_edges(n, edges)


# --------------------------------------------------------------------------
# adversaries


@dataclass(frozen=True)
class AdversaryPlacement:
    adversarial: frozenset
    F: int

    def __post_init__(self):
        if self.F < 0:
            raise ValueError("F must be non-negative")

    @classmethod
    def of(cls, adversarial: Iterable[int], F: int) -> "AdversaryPlacement":
        return cls(frozenset(int(a) for a in adversarial), int(F))

    def regular(self, graph: Graph) -> list[int]:
        return [v for v in range(graph.n) if v not in self.adversarial]

    def is_f_local(self, graph: Graph) -> bool:
        return self.max_adversarial_neighbors(graph) <= self.F

    def max_adversarial_neighbors(self, graph: Graph) -> int:
        counts = [
            sum(1 for j in graph.neighbors(i) if j in self.adversarial)
            for i in self.regular(graph)
        ]
        return max(counts, default=0)


def place_adversaries(
    graph: Graph, count: int, F: int, seed: int, attempts: int = 500
) -> AdversaryPlacement:
    """Pick ``count`` adversaries so that the set is F-local.

    Greedy over a seeded random order that favours low-degree vertices,
    restarted with a fresh order up to ``attempts`` times.
    """
    rng = np.random.default_rng(seed)
    deg = np.array([graph.degree(v) for v in range(graph.n)])
    best = 0
    for _ in range(attempts):
        order = np.lexsort((rng.random(graph.n), deg))
        chosen: set[int] = set()
        hits = np.zeros(graph.n, dtype=int)
        for v in order:
            if len(chosen) == count:
                break
            v = int(v)
            if any(hits[j] + 1 > F for j in graph.neighbors(v) if j not in chosen):
                continue
            chosen.add(v)
            for j in graph.neighbors(v):
                hits[j] += 1
        if len(chosen) == count:
            return AdversaryPlacement.of(chosen, F)
        best = max(best, len(chosen))
    raise ValueError(
        f"could not place {count} adversaries F-locally with F={F} (best {best})"
    )


# --------------------------------------------------------------------------
# reduced graphs


@dataclass(frozen=True)
class ReducedGraph:
    vertices: tuple
    edges: frozenset

    @property
    def size(self) -> int:
        return len(self.vertices)

    def is_connected(self) -> bool:
        return _connected(self.vertices, self.edges)


def _regular_edges(graph: Graph, placement: AdversaryPlacement) -> list[tuple[int, int]]:
    a = placement.adversarial
    return sorted(e for e in graph.edges if e[0] not in a and e[1] not in a)


def _deletion_sets(edges: list[tuple[int, int]], F: int, n: int) -> Iterator[tuple]:
    """All edge subsets in which every vertex loses at most F incident edges."""
    load = [0] * n
    chosen: list[tuple[int, int]] = []

    def rec(k: int):
        if k == len(edges):
            yield tuple(chosen)
            return
        yield from rec(k + 1)
        i, j = edges[k]
        if load[i] < F and load[j] < F:
            load[i] += 1
            load[j] += 1
            chosen.append(edges[k])
            yield from rec(k + 1)
            chosen.pop()
            load[i] -= 1
            load[j] -= 1

    yield from rec(0)


def enumerate_reduced_graphs(
    graph: Graph, placement: AdversaryPlacement, budget: int = 1000, seed: int = 0
) -> list[ReducedGraph]:
    """Reduced graphs: drop every adversary, then up to F edges at each regular vertex.

    Exhaustive when there are at most ``budget`` of them, otherwise a seeded
    random sample of ``budget`` reduced graphs.
    """
    verts = tuple(placement.regular(graph))
    base = _regular_edges(graph, placement)
    F = placement.F
    dels = list(itertools.islice(_deletion_sets(base, F, graph.n), budget + 1))
    if len(dels) > budget:
        rng = np.random.default_rng(seed)
        dels = []
        for _ in range(budget):
            load = np.zeros(graph.n, dtype=int)
            d = []
            for k in rng.permutation(len(base)):
                i, j = base[k]
                if load[i] < F and load[j] < F and rng.random() < 0.5:
                    load[i] += 1
                    load[j] += 1
                    d.append(base[k])
            dels.append(tuple(d))
    full = frozenset(base)
    return [ReducedGraph(verts, full - frozenset(d)) for d in dels]


# --------------------------------------------------------------------------
# assumption diagnostics


@dataclass
class AssumptionReport:
    undirected: bool
    robust: bool | None  # None when the graph is too large to certify
    robustness: int | None
    required_robustness: int
    f_local: bool
    max_adversarial_neighbors: int
    kappa: float
    kappa_bounded: bool
    min_regular_degree: int
    degree_ok: bool

    @property
    def ok(self) -> bool:
        """All clauses hold; an uncertified robustness clause is not a failure."""
        return (
            self.undirected
            and self.robust is not False
            and self.f_local
            and self.kappa_bounded
            and self.degree_ok
        )

    def lines(self) -> list[str]:
        def fmt(b):
            return "unverified" if b is None else ("pass" if b else "FAIL")

        rob = "n/a" if self.robustness is None else str(self.robustness)
        return [
            f"undirected: {fmt(self.undirected)}",
            f"{self.required_robustness}-robust: {fmt(self.robust)} (max robustness {rob})",
            f"F-local: {fmt(self.f_local)} (max adversarial neighbours "
            f"{self.max_adversarial_neighbors})",
            f"weights >= kappa > 0: {fmt(self.kappa_bounded)} (kappa {self.kappa:g})",
            f"regular degree >= {self.required_robustness}: {fmt(self.degree_ok)} "
            f"(min {self.min_regular_degree})",
        ]


def check_assumptions(
    graph: Graph, placement: AdversaryPlacement, limit: int = DEFAULT_EXHAUSTIVE_LIMIT
) -> AssumptionReport:
    F = placement.F
    need = 2 * F + 1
    # Graph stores each edge once as an unordered pair, so symmetry holds by construction.
    undirected = all(i < j for i, j in graph.edges)
    if graph.n <= limit and graph.n >= 2:
        rob = _robustness_dp(graph)
        robust = rob >= need
    else:
        rob, robust = None, None
    regular = placement.regular(graph)
    min_deg = min((graph.degree(i) for i in regular), default=0)
    kappa = graph.kappa
    return AssumptionReport(
        undirected=undirected,
        robust=robust,
        robustness=rob,
        required_robustness=need,
        f_local=placement.is_f_local(graph),
        max_adversarial_neighbors=placement.max_adversarial_neighbors(graph),
        kappa=kappa,
        kappa_bounded=kappa > 0,
        min_regular_degree=min_deg,
        degree_ok=min_deg >= need,
    )


# --------------------------------------------------------------------------
# edge-list files


def format_graph(graph: Graph, placement: AdversaryPlacement) -> str:
    lines = [f"{graph.n} {placement.F}"]
    for i, j in sorted(graph.edges):
        lines.append(f"{i} {j} {graph.weights[(i, j)]!r}")
    lines.append("A: " + " ".join(str(a) for a in sorted(placement.adversarial)))
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> tuple[Graph, AdversaryPlacement]:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ValueError("empty graph file")
    head = rows[0].split()
    if len(head) != 2:
        raise ValueError("first line must be 'N F'")
    n, F = int(head[0]), int(head[1])
    edges, weights, adv = [], {}, []
    for row in rows[1:]:
        if row.startswith("A:"):
            adv = [int(x) for x in row[2:].split()]
            continue
        parts = row.split()
        if len(parts) != 3:
            raise ValueError(f"bad edge line: {row!r}")
        i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        edges.append((i, j))
        weights[(i, j)] = w
    return Graph.from_edges(n, edges, weights), AdversaryPlacement.of(adv, F)


def write_graph(path: str | Path, graph: Graph, placement: AdversaryPlacement) -> None:
    Path(path).write_text(format_graph(graph, placement))


def read_graph(path: str | Path) -> tuple[Graph, AdversaryPlacement]:
    return parse_graph(Path(path).read_text())
