"""Instance generation and the no-coding routing baseline.

Random instances drop Poisson(intensity * L^2) nodes uniformly on an
L x L square and connect every pair strictly closer than the radius.
Reproducibility across platforms comes from a fixed generator (PCG64)
with three documented substreams spawned from the seed in order: node
count, positions, session endpoints.

The baseline routes every session alone on its cheapest path, paying
the broadcast cost of the source and of each relay (the destination
only listens).  Coding can never do worse, and for a single session it
can do no better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .model import (InfeasibleSessionError, Instance, Node, Session,
                    component_labels)


class GenerationError(RuntimeError):
    """Random instance generation exhausted its retry budget."""


@dataclass
class GeometricConfig:
    side: float
    sessions: int
    rate: float = 1.0
    cost: float = 1.0
    radius: float = 1.0
    intensity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.side > 0):
            raise ValueError(f"side must be > 0, got {self.side}")
        if self.sessions < 0:
            raise ValueError("sessions must be >= 0")
        if not (self.rate > 0):
            raise ValueError("rate must be > 0")
        if self.cost < 0:
            raise ValueError("cost must be >= 0")
        if not (self.radius > 0):
            raise ValueError("radius must be > 0")
        if not (self.intensity > 0):
            raise ValueError("intensity must be > 0")


def edges_within_radius(pos: np.ndarray, radius: float
                        ) -> list[tuple[int, int]]:
    """Unordered pairs strictly closer than radius (ties excluded)."""
    edges = []
    n = len(pos)
    for a in range(n):
        d = np.hypot(pos[a + 1:, 0] - pos[a, 0], pos[a + 1:, 1] - pos[a, 1])
        for off in np.nonzero(d < radius)[0]:
            edges.append((a, a + 1 + int(off)))
    return edges


RETRY_BUDGET = 100


def generate_geometric(cfg: GeometricConfig) -> Instance:
    count_ss, pos_ss, sess_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    n = int(np.random.Generator(np.random.PCG64(count_ss)).poisson(
        cfg.intensity * cfg.side ** 2))
    pos = np.random.Generator(np.random.PCG64(pos_ss)).uniform(
        0.0, cfg.side, size=(n, 2))
    edges = edges_within_radius(pos, cfg.radius)
    nodes = [Node(i, cfg.cost, (float(pos[i, 0]), float(pos[i, 1])))
             for i in range(n)]
    sessions: list[Session] = []
    if cfg.sessions > 0:
        if n < 2:
            raise GenerationError(
                f"seed {cfg.seed} drew only {n} node(s); "
                f"cannot place {cfg.sessions} session(s)")
        labels = component_labels(n, edges)
        rng = np.random.Generator(np.random.PCG64(sess_ss))
        used: set[tuple[int, int]] = set()
        for t in range(cfg.sessions):
            for _ in range(RETRY_BUDGET):
                s, d = (int(x) for x in rng.integers(0, n, size=2))
                if s != d and labels[s] == labels[d] and (s, d) not in used:
                    used.add((s, d))
                    sessions.append(Session(f"s{t + 1}", s, d, cfg.rate))
                    break
            else:
                raise GenerationError(
                    f"session sampling exhausted its {RETRY_BUDGET}-draw "
                    f"budget (seed {cfg.seed}, {n} nodes)")
    return Instance(nodes, edges, sessions)


def plain_routing_cost(inst: Instance) -> tuple[float, list[list[int]]]:
    """Cheapest independent route per session, no coding.

    Arc u -> v costs c_u (the transmitter pays), so a path's cost is the
    sum over its transmitting nodes; the destination is free.  Ties break
    toward fewer hops, then the smaller predecessor, as everywhere else.
    """
    n = inst.n
    costs = [nd.cost for nd in inst.nodes]
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in inst.edges:
        adj[a].append(b)
        adj[b].append(a)
    for lst in adj:
        lst.sort()
    total = 0.0
    paths = []
    for s in inst.sessions:
        dist = [math.inf] * n
        hops = [0] * n
        pred = [-1] * n
        dist[s.source] = 0.0
        heap = [(0.0, 0, s.source)]
        while heap:
            d, hp, u = heappop(heap)
            if d != dist[u] or hp != hops[u]:
                continue
            if u == s.dest:
                break
            for v in adj[u]:
                nd = d + costs[u]
                nh = hp + 1
                if nd < dist[v] or (nd == dist[v] and nh < hops[v]):
                    dist[v], hops[v], pred[v] = nd, nh, u
                    heappush(heap, (nd, nh, v))
                elif nd == dist[v] and nh == hops[v] and (
                        pred[v] == -1 or u < pred[v]):
                    if v != s.source:
                        pred[v] = u
        if dist[s.dest] == math.inf:
            raise InfeasibleSessionError(s.sid, "no route to destination")
        path = [s.dest]
        while path[-1] != s.source:
            path.append(pred[path[-1]])
        path.reverse()
        paths.append(path)
        total += s.rate * dist[s.dest]
    return total, paths


def _grid5(sessions: list[Session]) -> Instance:
    nodes = [Node(r * 5 + c, 1.0, (float(c), float(r)))
             for r in range(5) for c in range(5)]
    edges = []
    for r in range(5):
        for c in range(5):
            if c < 4:
                edges.append((r * 5 + c, r * 5 + c + 1))
            if r < 4:
                edges.append((r * 5 + c, (r + 1) * 5 + c))
    return Instance(nodes, edges, sessions)


# First seed whose 6x6 draw has 27+ nodes with all four endpoint pairs
# in one component.
GEO4_SEED = 68
GEO4_PAIRS = ((20, 13), (26, 7), (15, 23), (7, 22))


def builtin_instances() -> dict[str, Instance]:
    """Named regression instances.

    relay3    three nodes in a line, two opposing unit sessions; coding
              saves the relay one of its two broadcasts.
    grid2     5x5 unit grid, two crossing unit sessions that both bend
              onto a shared column to ride each other's reverse flow.
    grid2rate same, but the second session carries rate 4; only the
              light session finds deviation worthwhile.
    geo4      a seeded random geometric instance on a 6x6 square with
              four fixed unit-rate session pairs.
    """
    relay3 = Instance(
        [Node(0, 1.0, (0.0, 0.0)), Node(1, 1.0, (1.0, 0.0)),
         Node(2, 1.0, (2.0, 0.0))],
        [(0, 1), (1, 2)],
        [Session("s1", 0, 2, 1.0), Session("s2", 2, 0, 1.0)])
    grid2 = _grid5([Session("s1", 1, 23, 1.0), Session("s2", 24, 0, 1.0)])
    grid2rate = _grid5([Session("s1", 1, 23, 1.0), Session("s2", 24, 0, 4.0)])
    bare = generate_geometric(GeometricConfig(side=6.0, sessions=0,
                                              seed=GEO4_SEED))
    geo4 = Instance(
        bare.nodes, bare.edges,
        [Session(f"s{t + 1}", s, d, 1.0)
         for t, (s, d) in enumerate(GEO4_PAIRS)])
    return {"relay3": relay3, "grid2": grid2, "grid2rate": grid2rate,
            "geo4": geo4}
