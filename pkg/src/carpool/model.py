"""Graph model for coded multi-unicast routing.

A wireless node i delivers one broadcast to all of its neighbours at cost
c_i.  A relay holding packets that move in opposite directions through it
can XOR the pair and broadcast once, so for the unordered neighbour pair
{v, w} node i transmits max(forward sum, reverse sum) times rather than
the total.  Everything downstream (prices, shortest paths, the message
protocol) is indexed by ordered triples (v, i, w): a two-hop relay move
v -> i -> w.

Each session t gets two artificial degree-1 nodes: a source s'_t attached
to s_t and a destination d'_t attached to d_t.  On that expanded graph
every node is purely a source, a destination, or a relay, which makes the
transmission count a clean max() per neighbour pair.  The price of the
bookkeeping is one guaranteed broadcast by each physical destination; the
physical cost subtracts those c_{d_t} * R_t terms back out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InstanceError(ValueError):
    """Invalid instance data; the message names the offending element."""


class InfeasibleSessionError(RuntimeError):
    """A session's destination cannot be reached from its source."""

    def __init__(self, session: str, detail: str = ""):
        self.session = session
        msg = f"session {session} unreachable"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class Node:
    nid: int
    cost: float
    pos: tuple[float, float] | None = None


@dataclass(frozen=True)
class Session:
    sid: str
    source: int
    dest: int
    rate: float


def component_labels(n: int, edges: list[tuple[int, int]]) -> list[int]:
    """Connected-component label per node id, via union-find."""
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return [find(i) for i in range(n)]


@dataclass
class Instance:
    """Connectivity graph with per-node broadcast costs and unicast sessions."""

    nodes: list[Node]
    edges: list[tuple[int, int]]
    sessions: list[Session]

    def __post_init__(self):
        n = len(self.nodes)
        ids = sorted(nd.nid for nd in self.nodes)
        if ids != list(range(n)):
            raise InstanceError(f"node ids must be dense 0..{n - 1}, got {ids}")
        self.nodes = sorted(self.nodes, key=lambda nd: nd.nid)
        for nd in self.nodes:
            if not (nd.cost >= 0.0):
                raise InstanceError(f"node {nd.nid} has negative cost {nd.cost}")
            if nd.pos is not None and len(nd.pos) != 2:
                raise InstanceError(f"node {nd.nid} position must be 2-D")
        seen: set[tuple[int, int]] = set()
        norm: list[tuple[int, int]] = []
        for a, b in self.edges:
            if a == b:
                raise InstanceError(f"edge ({a},{b}) is a self-loop")
            if not (0 <= a < n and 0 <= b < n):
                raise InstanceError(f"edge ({a},{b}) references a missing node")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise InstanceError(f"duplicate edge {key}")
            seen.add(key)
            norm.append(key)
        self.edges = norm
        labels = component_labels(n, self.edges)
        sids: set[str] = set()
        for s in self.sessions:
            if s.sid in sids:
                raise InstanceError(f"duplicate session id {s.sid!r}")
            sids.add(s.sid)
            if not (0 <= s.source < n):
                raise InstanceError(f"session {s.sid} source {s.source} missing")
            if not (0 <= s.dest < n):
                raise InstanceError(f"session {s.sid} dest {s.dest} missing")
            if s.source == s.dest:
                raise InstanceError(
                    f"session {s.sid} has source = dest = {s.source}")
            if not (s.rate > 0.0):
                raise InstanceError(f"session {s.sid} rate must be > 0")
            if labels[s.source] != labels[s.dest]:
                raise InfeasibleSessionError(
                    s.sid,
                    f"source {s.source} and destination {s.dest} lie in "
                    f"different components")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def costs(self) -> np.ndarray:
        return np.array([nd.cost for nd in self.nodes], dtype=float)


@dataclass
class ExpandedGraph:
    """Instance plus one artificial source/destination pair per session.

    Artificial ids follow the physical ones: session t (0-based) owns
    s'_t = n + 2t and d'_t = n + 2t + 1.  Artificial nodes cost 0; they
    never relay (degree 1), so they never transmit.
    """

    base: Instance
    n_base: int
    n_nodes: int
    costs: np.ndarray
    edges: list[tuple[int, int]]
    adj: list[list[int]]
    terminals: list[tuple[int, int]]  # (s'_t, d'_t) per session

    def is_artificial(self, v: int) -> bool:
        return v >= self.n_base

    def source_vertex(self, t: int) -> tuple[int, int]:
        return (self.terminals[t][0], self.base.sessions[t].source)

    def dest_vertex(self, t: int) -> tuple[int, int]:
        return (self.base.sessions[t].dest, self.terminals[t][1])


def build_expanded_graph(inst: Instance) -> ExpandedGraph:
    n = inst.n
    n_total = n + 2 * len(inst.sessions)
    costs = np.zeros(n_total)
    costs[:n] = inst.costs()
    edges = list(inst.edges)
    terminals = []
    for t, s in enumerate(inst.sessions):
        sp, dp = n + 2 * t, n + 2 * t + 1
        terminals.append((sp, dp))
        edges.append((s.source, sp))
        edges.append((s.dest, dp))
    adj: list[list[int]] = [[] for _ in range(n_total)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    for lst in adj:
        lst.sort()
    return ExpandedGraph(inst, n, n_total, costs, edges, adj, terminals)


@dataclass
class TripleIndex:
    """Canonical enumeration of relay triples (v, i, w), both orientations.

    Order is lexicographic by (i, v, w), so triples sharing a middle node
    are contiguous, as are the forward rows (v < w) in the pair arrays.
    A triple whose tail and head are both artificial can never carry flow
    (its end pairs have no inflow and no demand), so those are dropped to
    keep the index aligned with meaningful unknowns.
    """

    triples: list[tuple[int, int, int]]
    index: dict[tuple[int, int, int], int]
    v: np.ndarray
    mid: np.ndarray
    w: np.ndarray
    rev: np.ndarray          # rev[k] indexes (w, i, v)
    cost: np.ndarray         # c of the middle node, per triple
    pair_fwd: np.ndarray     # triple rows with v < w, one per unordered pair
    pair_rev: np.ndarray
    pair_cost: np.ndarray
    pair_rows_of_mid: dict[int, tuple[int, int]] = field(default_factory=dict)
    pair_row_of_triple: dict[int, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.triples)


def enumerate_triples(g: ExpandedGraph) -> TripleIndex:
    triples: list[tuple[int, int, int]] = []
    for i in range(g.n_nodes):
        nbrs = g.adj[i]
        if len(nbrs) < 2:
            continue
        for v in nbrs:
            for w in nbrs:
                if v == w:
                    continue
                if g.is_artificial(v) and g.is_artificial(w):
                    continue
                triples.append((v, i, w))
    index = {tr: k for k, tr in enumerate(triples)}
    varr = np.array([tr[0] for tr in triples], dtype=np.int64)
    marr = np.array([tr[1] for tr in triples], dtype=np.int64)
    warr = np.array([tr[2] for tr in triples], dtype=np.int64)
    rev = np.array([index[(tr[2], tr[1], tr[0])] for tr in triples],
                   dtype=np.int64)
    cost = g.costs[marr] if len(triples) else np.zeros(0)
    fwd_mask = varr < warr
    pair_fwd = np.nonzero(fwd_mask)[0]
    pair_rev = rev[pair_fwd]
    pair_cost = cost[pair_fwd]
    # forward rows are contiguous per middle node (triples sorted by middle)
    rows_of_mid: dict[int, tuple[int, int]] = {}
    row_of_triple: dict[int, int] = {}
    for row, k in enumerate(pair_fwd):
        k = int(k)
        row_of_triple[k] = row
        row_of_triple[int(rev[k])] = row
        m = int(marr[k])
        if m not in rows_of_mid:
            rows_of_mid[m] = (row, row + 1)
        else:
            rows_of_mid[m] = (rows_of_mid[m][0], row + 1)
    return TripleIndex(triples, index, varr, marr, warr, rev, cost,
                       pair_fwd, pair_rev, pair_cost, rows_of_mid,
                       row_of_triple)


@dataclass
class FlowVector:
    """Per-session flow value for every triple, in packets per unit time."""

    session: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if (self.values < 0).any():
            k = int(np.argmin(self.values))
            raise ValueError(
                f"flow for session {self.session} negative at entry {k}")


@dataclass
class PriceVector:
    """Dual price per triple: what a unit of v->i->w flow pays node i."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def validate(self, idx: TripleIndex, tol: float = 1e-12) -> None:
        p = self.values
        if p.shape != (len(idx),):
            raise ValueError(f"price vector has shape {p.shape}, "
                             f"expected ({len(idx)},)")
        lo = p < -tol
        hi = p > idx.cost + tol
        if lo.any() or hi.any():
            k = int(np.argmax(lo | hi))
            raise ValueError(
                f"price out of [0, c] at triple {idx.triples[k]}: {p[k]}")
        gap = np.abs(p[idx.pair_fwd] + p[idx.pair_rev] - idx.pair_cost)
        if (gap > tol).any():
            r = int(np.argmax(gap))
            k = int(idx.pair_fwd[r])
            raise ValueError(
                f"price pair around {idx.triples[k]} sums to "
                f"{p[k] + p[int(idx.pair_rev[r])]}, expected {idx.pair_cost[r]}")


@dataclass
class TransmissionSummary:
    """Broadcast counts after coding: y per unordered pair, z per node.

    y and saving align with idx.pair_fwd; saving is the smaller of the two
    directional sums (the coded reuse).  z is indexed by expanded node id.
    """

    idx: TripleIndex
    y: np.ndarray
    saving: np.ndarray
    z: np.ndarray


def ordered_pairs(g: ExpandedGraph) -> list[tuple[int, int]]:
    out = []
    for a, b in g.edges:
        out.append((a, b))
        out.append((b, a))
    out.sort()
    return out


def transmission_summary(flows: list[FlowVector], g: ExpandedGraph,
                         idx: TripleIndex) -> TransmissionSummary:
    agg = np.zeros(len(idx))
    for f in flows:
        agg += f.values
    fwd = agg[idx.pair_fwd]
    rev = agg[idx.pair_rev]
    y = np.maximum(fwd, rev)
    saving = np.minimum(fwd, rev)
    z = np.zeros(g.n_nodes)
    np.add.at(z, idx.mid[idx.pair_fwd], y)
    return TransmissionSummary(idx, y, saving, z)


def total_cost(summary: TransmissionSummary, g: ExpandedGraph
               ) -> tuple[float, float]:
    """(expanded, physical) cost of a transmission summary.

    Expanded charges every broadcast, including the one each destination
    makes toward its artificial sink; physical refunds those deliveries.
    """
    expanded = float(np.dot(g.costs, summary.z))
    correction = 0.0
    for s in g.base.sessions:
        correction += float(g.costs[s.dest]) * s.rate
    return expanded, expanded - correction


def conservation_residual(x: FlowVector, g: ExpandedGraph, idx: TripleIndex
                          ) -> dict[tuple[int, int], float]:
    """Flow balance at every ordered pair (i, j) with {i, j} an edge.

    Residual = (flow continuing out through j) - (flow arriving onto (i, j))
    - sigma, where sigma injects +R_t at (s'_t, s_t) and -R_t at
    (d_t, d'_t).  Zero everywhere iff x is a feasible flow for its session.
    """
    t = None
    for k, s in enumerate(g.base.sessions):
        if s.sid == x.session:
            t = k
            break
    if t is None:
        raise ValueError(f"unknown session {x.session!r}")
    sess = g.base.sessions[t]
    sp, dp = g.terminals[t]
    out_sum: dict[tuple[int, int], float] = {}
    in_sum: dict[tuple[int, int], float] = {}
    vals = x.values
    for k, (v, i, w) in enumerate(idx.triples):
        if vals[k] == 0.0:
            continue
        out_sum[(v, i)] = out_sum.get((v, i), 0.0) + vals[k]
        in_sum[(i, w)] = in_sum.get((i, w), 0.0) + vals[k]
    res: dict[tuple[int, int], float] = {}
    for pair in ordered_pairs(g):
        sigma = 0.0
        if pair == (sp, sess.source):
            sigma = sess.rate
        elif pair == (sess.dest, dp):
            sigma = -sess.rate
        res[pair] = out_sum.get(pair, 0.0) - in_sum.get(pair, 0.0) - sigma
    return res


def worst_residual(flows: list[FlowVector], g: ExpandedGraph,
                   idx: TripleIndex) -> float:
    worst = 0.0
    for f in flows:
        for r in conservation_residual(f, g, idx).values():
            worst = max(worst, abs(r))
    return worst


def session_flow_cost(x: FlowVector, idx: TripleIndex) -> float:
    """Expanded-cost share of one session's flow: sum of c_i * x(v,i,w)."""
    return float(np.dot(idx.cost, x.values))
