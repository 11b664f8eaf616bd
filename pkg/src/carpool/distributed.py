"""Message-passing twin of the solver loop.

Every node of the expanded graph (artificial ones included) runs a
processor.  Node i owns the prices and flow tallies of all triples whose
middle node is i, and the routing labels of every ordered pair (i, j).
When the label of (v, i) improves at node v, v tells i; i extends the
route over its own priced arcs (v, i) -> (i, w) and, on improvement,
tells w.  At quiescence the labels are the exact fixed point of the same
(distance, arc count, predecessor index) order the in-process solver
uses, so paths, flows, prices, and the stopping decision come out bit
for bit identical.

After each routing phase the destination starts a hop-by-hop trace back
along predecessors; each node on the path learns its own triple's flow
from that message and needs nothing else to update its prices locally.

The simulator is a deterministic event loop: synchronous rounds deliver
all messages at once, the asynchronous mode activates nodes in a
seeded-random order each round.  Either way every node acts every round,
and a message may only connect graph neighbours (checked on every send).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .edge_graph import EdgeGraph, SessionPath, build_edge_graph
from .model import (ExpandedGraph, FlowVector, InfeasibleSessionError,
                    Instance, PriceVector, TripleIndex, build_expanded_graph,
                    enumerate_triples)
from .solver import SolverConfig, SolveTrace, Solution, _LoopState, init_prices

INF = math.inf

LABEL_BYTES = 40  # sender, session, vertex, distance, arc count
FLOW_BYTES = 32   # sender, session, vertex, flow value


class QuiescenceError(RuntimeError):
    """The event loop hit its round cap with messages still moving."""

    def __init__(self, active: list):
        self.active = active
        super().__init__(
            f"no quiescence within the round cap; still active: "
            f"{active[:8]}{'...' if len(active) > 8 else ''}")


@dataclass
class SimSchedule:
    mode: str = "sync"  # "sync" or "async"
    seed: int = 0
    max_rounds: int | None = None  # per phase; default scales with the graph

    def __post_init__(self):
        if self.mode not in ("sync", "async"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass
class Message:
    sender: int
    receiver: int
    kind: str            # "label" or "flow"
    session: int
    vertex: tuple[int, int]
    dist: float = 0.0
    hops: int = 0
    value: float = 0.0


@dataclass
class MessageStats:
    label_messages: int = 0
    flow_messages: int = 0
    rounds: int = 0
    bytes_estimate: int = 0
    delivered: int = 0
    neighbor_violations: int = 0
    per_iteration: list[dict] = field(default_factory=list)

    def in_flight(self) -> int:
        return self.label_messages + self.flow_messages - self.delivered


class _SimContext:
    """Static structure shared by all processors of one run."""

    def __init__(self, g: ExpandedGraph, idx: TripleIndex, h: EdgeGraph,
                 schedule: SimSchedule):
        self.g, self.idx, self.h = g, idx, h
        self.adjset = [set(nbrs) for nbrs in g.adj]
        self.stats = MessageStats()
        self.staging: list[Message] = []
        self.set_schedule(schedule)

    def set_schedule(self, schedule: SimSchedule) -> None:
        self.schedule = schedule
        self.rng = random.Random(schedule.seed)
        if schedule.max_rounds is not None:
            self.max_rounds = schedule.max_rounds
        else:
            self.max_rounds = 2 * len(self.h.vertices) + 16

    def send(self, msg: Message) -> None:
        if msg.receiver not in self.adjset[msg.sender]:
            self.stats.neighbor_violations += 1
            raise RuntimeError(
                f"message {msg.kind} from {msg.sender} to non-neighbour "
                f"{msg.receiver}")
        if msg.kind == "label":
            self.stats.label_messages += 1
            self.stats.bytes_estimate += LABEL_BYTES
        else:
            self.stats.flow_messages += 1
            self.stats.bytes_estimate += FLOW_BYTES
        self.staging.append(msg)


class NodeProcessor:
    """One node's local state: prices, tallies, owned labels, inbox."""

    def __init__(self, nid: int, ctx: _SimContext):
        self.nid = nid
        self.ctx = ctx
        idx = ctx.idx
        lo, hi = idx.pair_rows_of_mid.get(nid, (0, 0))
        self.row_lo, self.row_hi = lo, hi
        self.cost = idx.pair_cost[lo:hi].copy()
        self.p_fwd = np.zeros(hi - lo)
        self.p_rev = np.zeros(hi - lo)
        n_sessions = len(ctx.g.base.sessions)
        self.tally_fwd = np.zeros((n_sessions, hi - lo))
        self.tally_rev = np.zeros((n_sessions, hi - lo))
        # triple row -> (local pair position, forward orientation?)
        self.k_pos: dict[int, tuple[int, bool]] = {}
        for pos in range(hi - lo):
            kf = int(idx.pair_fwd[lo + pos])
            kr = int(idx.pair_rev[lo + pos])
            self.k_pos[kf] = (pos, True)
            self.k_pos[kr] = (pos, False)
        # labels[t]: owned vertex id -> (dist, hops, pred vertex id)
        self.labels: list[dict[int, tuple[float, int, int]]] = [
            {} for _ in range(n_sessions)]
        self.inbox: list[Message] = []

    def load_prices(self, p: PriceVector) -> None:
        idx = self.ctx.idx
        self.p_fwd[:] = p.values[idx.pair_fwd[self.row_lo:self.row_hi]]
        self.p_rev[:] = p.values[idx.pair_rev[self.row_lo:self.row_hi]]

    def price_of(self, k: int) -> float:
        pos, fwd = self.k_pos[k]
        return float(self.p_fwd[pos]) if fwd else float(self.p_rev[pos])

    def reset_labels(self) -> None:
        for d in self.labels:
            d.clear()

    def prime_source(self, t: int, vid: int) -> None:
        self.labels[t][vid] = (0.0, 0, -1)
        self._announce(t, vid, 0.0, 0)

    def _announce(self, t: int, vid: int, dist: float, hops: int) -> None:
        i, j = self.ctx.h.vertices[vid]
        self.ctx.send(Message(self.nid, j, "label", t, (i, j), dist, hops))

    def handle(self, msg: Message) -> None:
        if msg.kind == "label":
            self._relax(msg)
        else:
            self._chase(msg.session, self.ctx.h.vindex[msg.vertex], msg.value)

    def _relax(self, msg: Message) -> None:
        h = self.ctx.h
        uv = h.vindex[msg.vertex]
        t = msg.session
        labels = self.labels[t]
        for vtx, k in h.out[uv]:
            nd = msg.dist + self.price_of(k)
            nh = msg.hops + 1
            cur = labels.get(vtx)
            if cur is None or nd < cur[0] or (nd == cur[0] and nh < cur[1]):
                labels[vtx] = (nd, nh, uv)
                self._announce(t, vtx, nd, nh)
            elif nd == cur[0] and nh == cur[1] and uv < cur[2]:
                labels[vtx] = (nd, nh, uv)

    def _chase(self, t: int, vid: int, value: float) -> None:
        dist, hops, pred = self.labels[t][vid]
        if pred < 0:
            return  # source pair reached; nothing upstream of it
        h = self.ctx.h
        v = h.vertices[pred][0]
        i, w = h.vertices[vid]
        k = h.idx.index[(v, i, w)]
        pos, fwd = self.k_pos[k]
        if fwd:
            self.tally_fwd[t][pos] += value
        else:
            self.tally_rev[t][pos] += value
        self.ctx.send(Message(self.nid, v, "flow", t,
                              h.vertices[pred], value=value))

    def reset_tallies(self) -> None:
        self.tally_fwd[:] = 0.0
        self.tally_rev[:] = 0.0


def make_processors(g: ExpandedGraph, idx: TripleIndex, p: PriceVector,
                    schedule: SimSchedule | None = None,
                    h: EdgeGraph | None = None) -> list[NodeProcessor]:
    if h is None:
        h = build_edge_graph(g, idx)
    ctx = _SimContext(g, idx, h, schedule or SimSchedule())
    procs = [NodeProcessor(i, ctx) for i in range(g.n_nodes)]
    for proc in procs:
        proc.load_prices(p)
    return procs


def _run_to_quiescence(ctx: _SimContext, procs: list[NodeProcessor]) -> int:
    """Deliver and process until nothing moves; returns rounds used."""
    rounds = 0
    sync = ctx.schedule.mode == "sync"
    order = list(range(len(procs)))
    while ctx.staging or any(p.inbox for p in procs):
        rounds += 1
        if rounds > ctx.max_rounds:
            active = sorted({(m.kind, m.session, m.vertex)
                             for m in ctx.staging}
                            | {(m.kind, m.session, m.vertex)
                               for p in procs for m in p.inbox})
            raise QuiescenceError(active)
        pending, ctx.staging = ctx.staging, []
        for msg in pending:
            procs[msg.receiver].inbox.append(msg)
        if not sync:
            ctx.rng.shuffle(order)
            # late activations see messages sent earlier in the same round
        for nid in order:
            proc = procs[nid]
            batch, proc.inbox = proc.inbox, []
            for msg in batch:
                ctx.stats.delivered += 1
                proc.handle(msg)
            if not sync and ctx.staging:
                pending, ctx.staging = ctx.staging, []
                for msg in pending:
                    procs[msg.receiver].inbox.append(msg)
        if not sync:
            order.sort()
    ctx.stats.rounds += rounds
    return rounds


def distributed_shortest_paths(procs: list[NodeProcessor],
                               sessions: list[int] | None = None,
                               schedule: SimSchedule | None = None
                               ) -> list[SessionPath]:
    """Run the label protocol to quiescence; reconstruct each session's path.

    Label dissemination is the only messaging here; the returned paths
    are read out of the quiescent predecessor chains.
    """
    ctx = procs[0].ctx
    if schedule is not None:
        ctx.set_schedule(schedule)
    g, h = ctx.g, ctx.h
    if sessions is None:
        sessions = list(range(len(g.base.sessions)))
    for proc in procs:
        proc.reset_labels()
    for t in sessions:
        src = h.src_vertex[t]
        procs[h.vertices[src][0]].prime_source(t, src)
    _run_to_quiescence(ctx, procs)
    paths = []
    for t in sessions:
        paths.append(_read_path(procs, t))
    return paths


def _read_path(procs: list[NodeProcessor], t: int) -> SessionPath:
    ctx = procs[0].ctx
    h = ctx.h
    src, dst = h.src_vertex[t], h.dst_vertex[t]
    sid = ctx.g.base.sessions[t].sid

    def label_of(vid: int) -> tuple[float, int, int]:
        owner = procs[h.vertices[vid][0]]
        return owner.labels[t].get(vid, (INF, 0, -1))

    dist = label_of(dst)[0]
    if dist == INF:
        raise InfeasibleSessionError(sid, "no priced route to destination")
    seq = [dst]
    while seq[-1] != src:
        pred = label_of(seq[-1])[2]
        if pred < 0:
            raise RuntimeError("broken predecessor chain")
        seq.append(pred)
    seq.reverse()
    verts = [h.vertices[u] for u in seq]
    trips = [h.idx.index[(verts[j][0], verts[j][1], verts[j + 1][1])]
             for j in range(len(verts) - 1)]
    return SessionPath(sid, verts, dist, trips)


def _flow_notification(procs: list[NodeProcessor],
                       sessions: list[int]) -> None:
    """Each destination walks its predecessor chain; relays tally rates."""
    ctx = procs[0].ctx
    h = ctx.h
    for t in sessions:
        dst = h.dst_vertex[t]
        rate = ctx.g.base.sessions[t].rate
        procs[h.vertices[dst][0]]._chase(t, dst, rate)
    _run_to_quiescence(ctx, procs)


def _assemble_flows(procs: list[NodeProcessor], idx: TripleIndex
                    ) -> list[FlowVector]:
    g = procs[0].ctx.g
    flows = []
    for t, s in enumerate(g.base.sessions):
        values = np.zeros(len(idx))
        for proc in procs:
            if proc.row_hi > proc.row_lo:
                rows = slice(proc.row_lo, proc.row_hi)
                values[idx.pair_fwd[rows]] = proc.tally_fwd[t]
                values[idx.pair_rev[rows]] = proc.tally_rev[t]
        flows.append(FlowVector(s.sid, values))
    return flows


def _assemble_prices(procs: list[NodeProcessor], idx: TripleIndex
                     ) -> PriceVector:
    values = np.zeros(len(idx))
    for proc in procs:
        if proc.row_hi > proc.row_lo:
            rows = slice(proc.row_lo, proc.row_hi)
            values[idx.pair_fwd[rows]] = proc.p_fwd
            values[idx.pair_rev[rows]] = proc.p_rev
    return PriceVector(values)


def distributed_price_update(procs: list[NodeProcessor], n: int,
                             cfg: SolverConfig) -> None:
    """Every node reprices its own triples from its tallies; no messages."""
    half = 0.5 * cfg.alpha(n)
    for proc in procs:
        if proc.row_hi == proc.row_lo:
            continue
        agg_fwd = np.zeros(proc.row_hi - proc.row_lo)
        agg_rev = np.zeros(proc.row_hi - proc.row_lo)
        for t in range(proc.tally_fwd.shape[0]):
            agg_fwd += proc.tally_fwd[t]
            agg_rev += proc.tally_rev[t]
        diff = agg_fwd - agg_rev
        proc.p_fwd = np.clip(proc.p_fwd + half * diff, 0.0, proc.cost)
        proc.p_rev = proc.cost - proc.p_fwd


def run_distributed_solve(inst: Instance, cfg: SolverConfig | None = None,
                          schedule: SimSchedule | None = None
                          ) -> tuple[Solution, SolveTrace, MessageStats]:
    """Same contract as solve(), computed by neighbour-only messaging."""
    cfg = cfg or SolverConfig()
    schedule = schedule or SimSchedule()
    g = build_expanded_graph(inst)
    idx = enumerate_triples(g)
    h = build_edge_graph(g, idx)
    p0 = init_prices(g, idx, cfg)
    procs = make_processors(g, idx, p0, schedule, h)
    ctx = procs[0].ctx
    trace = SolveTrace()
    state = _LoopState(g, idx, cfg, trace)
    if not g.base.sessions:
        state.certified = True
        return state.solution(p0, 0), trace, ctx.stats
    sessions = list(range(len(g.base.sessions)))
    n = 0
    for n in range(1, cfg.max_iters + 1):
        labels_before = ctx.stats.label_messages
        flows_before = ctx.stats.flow_messages
        rounds_before = ctx.stats.rounds
        paths = distributed_shortest_paths(procs, sessions)
        _flow_notification(procs, sessions)
        flows = _assemble_flows(procs, idx)
        q = 0.0
        for t in sessions:
            q += g.base.sessions[t].rate * paths[t].weight
        stop = state.ingest(n, flows, q)
        if not stop:
            distributed_price_update(procs, n, cfg)
        for proc in procs:
            proc.reset_tallies()
        ctx.stats.per_iteration.append({
            "iteration": n,
            "label_messages": ctx.stats.label_messages - labels_before,
            "flow_messages": ctx.stats.flow_messages - flows_before,
            "rounds": ctx.stats.rounds - rounds_before,
        })
        if stop:
            break
    return state.solution(_assemble_prices(procs, idx), n), trace, ctx.stats
