"""Graph ingestion, synthetic graphs, and cascade scenario generation.

A scenario is the vector of times at which a contagion starting from a
uniformly random source reaches each vertex, where each edge carries an
independent exponential propagation delay; reach times are therefore
single-source shortest-path distances on the sampled delays.  Unreachable
vertices are reassigned the maximum finite reach time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .objective import ScenarioTimes
from ._util import fmt

__all__ = [
    "Graph",
    "LoadStats",
    "simulate_ctic",
    "parse_edge_list",
    "load_edge_list",
    "generate_er_graph",
    "scenario_pool",
    "pool_to_csv",
    "pool_from_csv",
    "save_pool",
    "load_pool",
    "pool_stream",
    "fresh_stream",
]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph: n vertices, edges as (u, v) with u < v."""

    n: int
    edges: tuple

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range or not u < v")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")

    @property
    def m(self) -> int:
        return len(self.edges)


def simulate_ctic(graph: Graph, mean_prop_time: float, rng, source=None,
                  edge_times=None) -> ScenarioTimes:
    """Draw one cascade: uniform random source, exponential edge delays.

    source and edge_times may be forced for tests; edge_times follows the
    graph's edge order.  The scenario is degenerate (all zeros) when the
    source reaches nothing.
    """
    if mean_prop_time <= 0:
        raise ValueError("mean propagation time must be positive")
    if graph.n == 0:
        raise ValueError("empty graph")
    s = int(rng.integers(graph.n)) if source is None else int(source)
    if edge_times is None:
        w = rng.exponential(mean_prop_time, size=graph.m)
    else:
        w = np.asarray(edge_times, dtype=float)
        if w.shape != (graph.m,):
            raise ValueError("edge_times must match the edge count")
    if graph.m:
        us = np.fromiter((e[0] for e in graph.edges), dtype=int, count=graph.m)
        vs = np.fromiter((e[1] for e in graph.edges), dtype=int, count=graph.m)
        adj = coo_matrix((w, (us, vs)), shape=(graph.n, graph.n))
        dist = dijkstra(adj.tocsr(), directed=False, indices=s)
    else:
        dist = np.full(graph.n, np.inf)
        dist[s] = 0.0
    finite = np.isfinite(dist)
    z_max = float(dist[finite].max())
    z = np.where(finite, dist, z_max)
    return ScenarioTimes(z, z_max)


def parse_edge_list(lines):
    """Parse 'u v' pairs; returns (Graph, LoadStats).

    Lines starting with '#' or '%' are skipped; vertex ids are re-indexed
    densely in sorted order; self-loops and duplicate edges are dropped and
    counted.
    """
    raw = []
    self_loops = 0
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#%":
            continue
        tokens = stripped.split()
        if len(tokens) < 2:
            raise ValueError(f"line {lineno}: expected 'u v', got {stripped!r}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: malformed vertex id in {stripped!r}") from exc
        if u == v:
            self_loops += 1
            continue
        raw.append((u, v))
    ids = sorted({i for e in raw for i in e})
    remap = {orig: new for new, orig in enumerate(ids)}
    seen = set()
    duplicates = 0
    edges = []
    for u, v in raw:
        a, b = sorted((remap[u], remap[v]))
        if (a, b) in seen:
            duplicates += 1
        else:
            seen.add((a, b))
            edges.append((a, b))
    graph = Graph(len(ids), tuple(edges))
    return graph, LoadStats(duplicates, self_loops)


@dataclass(frozen=True)
class LoadStats:
    duplicates_dropped: int
    self_loops_dropped: int


def load_edge_list(stream) -> Graph:
    graph, _ = parse_edge_list(stream)
    return graph


def generate_er_graph(n: int, edge_prob: float, rng) -> Graph:
    """Each unordered pair included independently with probability edge_prob."""
    if n < 1:
        raise ValueError("need at least one vertex")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge probability must be in [0, 1]")
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = rng.random(len(pairs)) < edge_prob
    return Graph(n, tuple(p for p, k in zip(pairs, keep) if k))


def scenario_pool(graph: Graph, mean_prop_time: float, count: int, rng):
    """count independent cascades, each on its own spawned rng substream."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    streams = rng.spawn(count)
    return [simulate_ctic(graph, mean_prop_time, sub) for sub in streams]


def pool_to_csv(pool) -> str:
    lines = ["scenario_id,vertex,reach_time"]
    for sid, sc in enumerate(pool):
        for v, t in enumerate(sc.reach_time):
            lines.append(f"{sid},{v},{fmt(t)}")
    return "\n".join(lines) + "\n"


def pool_from_csv(text: str):
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "scenario_id,vertex,reach_time":
        raise ValueError("pool CSV must start with 'scenario_id,vertex,reach_time'")
    by_scenario: dict[int, dict[int, float]] = {}
    for ln in lines[1:]:
        sid_s, v_s, t_s = ln.split(",")
        by_scenario.setdefault(int(sid_s), {})[int(v_s)] = float(t_s)
    pool = []
    for sid in sorted(by_scenario):
        entries = by_scenario[sid]
        z = np.array([entries[v] for v in range(len(entries))])
        pool.append(ScenarioTimes(z, float(z.max())))  # z_max recomputed on load
    return pool


def save_pool(path, pool):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(pool_to_csv(pool))


def load_pool(path):
    with open(path, encoding="utf-8") as fh:
        return pool_from_csv(fh.read())


def pool_stream(pool, rng):
    """Endless stream drawing uniformly with replacement from a fixed pool."""
    if not pool:
        raise ValueError("empty pool")
    while True:
        yield pool[int(rng.integers(len(pool)))]


def fresh_stream(graph: Graph, mean_prop_time: float, rng):
    """Endless stream of newly simulated cascades."""
    while True:
        yield simulate_ctic(graph, mean_prop_time, rng)
