"""Command-line surface and file formats.

Commands: gen (write an instance), solve (certify a coded routing),
baseline (no-coding reference), check (independently re-verify a
solution file against its instance).  Exit codes: 0 success/certified,
1 bad input or infeasible session, 2 solve finished uncertified.

Instances and solutions are JSON with round-trip-exact floats; traces
are CSV with one row per iteration.  CARPOOL_LOG=quiet|info|debug
controls diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .distributed import SimSchedule, run_distributed_solve
from .instances import (GenerationError, GeometricConfig, builtin_instances,
                        generate_geometric, plain_routing_cost)
from .model import (FlowVector, InfeasibleSessionError, Instance,
                    InstanceError, Node, Session, build_expanded_graph,
                    conservation_residual, enumerate_triples, total_cost,
                    transmission_summary)
from .solver import SolverConfig, solve

log = logging.getLogger("carpool")

TRACE_HEADER = "iter,alpha,dual_bound,best_dual_bound,recovered_cost,rel_gap"


def instance_to_dict(inst: Instance) -> dict:
    nodes = []
    for nd in inst.nodes:
        rec: dict = {"id": nd.nid, "cost": nd.cost}
        if nd.pos is not None:
            rec["pos"] = [nd.pos[0], nd.pos[1]]
        nodes.append(rec)
    return {
        "nodes": nodes,
        "edges": [[a, b] for a, b in inst.edges],
        "sessions": [{"id": s.sid, "source": s.source, "dest": s.dest,
                      "rate": s.rate} for s in inst.sessions],
    }


def instance_from_dict(doc: dict) -> Instance:
    try:
        nodes = [Node(int(r["id"]), float(r["cost"]),
                      tuple(float(x) for x in r["pos"]) if "pos" in r else None)
                 for r in doc["nodes"]]
        edges = [(int(a), int(b)) for a, b in doc["edges"]]
        sessions = [Session(str(r["id"]), int(r["source"]), int(r["dest"]),
                            float(r["rate"])) for r in doc["sessions"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed instance document: {exc}") from exc
    return Instance(nodes, edges, sessions)


def load_instance(path: str) -> Instance:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(
                f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def write_trace(path: str, trace) -> None:
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in zip(trace.iters, trace.alphas, trace.dual_bounds,
                       trace.best_bounds, trace.recovered_costs,
                       trace.rel_gaps):
            fh.write("%d,%.12g,%.12g,%.12g,%.12g,%.12g\n" % row)


def solution_to_dict(inst: Instance, sol, routing_cost: float) -> dict:
    g = build_expanded_graph(inst)
    idx = enumerate_triples(g)
    sessions = []
    for f in sol.flows:
        entries = []
        for k in np.nonzero(f.values)[0]:
            v, i, w = idx.triples[int(k)]
            entries.append({"triple": [v, i, w], "value": float(f.values[k])})
        sessions.append({"id": f.session, "flows": entries})
    pairs = []
    for row, k in enumerate(idx.pair_fwd):
        v, i, w = idx.triples[int(k)]
        pairs.append({"v": v, "mid": i, "w": w, "y": float(sol.summary.y[row])})
    z = [{"node": i, "z": float(sol.summary.z[i])} for i in range(inst.n)]
    return {
        "sessions": sessions,
        "pair_transmissions": pairs,
        "node_transmissions": z,
        "expanded_cost": sol.expanded_cost,
        "physical_cost": sol.physical_cost,
        "routing_cost": routing_cost,
        "gap": sol.gap,
        "certified": sol.certified,
        "iterations": sol.iterations,
    }


def cmd_gen(args) -> int:
    if args.builtin:
        named = builtin_instances()
        if args.builtin not in named:
            print(f"unknown builtin {args.builtin!r}; have "
                  f"{', '.join(sorted(named))}", file=sys.stderr)
            return 1
        inst = named[args.builtin]
    else:
        try:
            inst = generate_geometric(GeometricConfig(
                side=args.L, sessions=args.sessions, rate=args.rate,
                cost=args.cost, seed=args.seed))
        except GenerationError as exc:
            print(f"generation failed: {exc}", file=sys.stderr)
            return 1
    doc = json.dumps(instance_to_dict(inst), indent=1)
    counts = (f"nodes={len(inst.nodes)} edges={len(inst.edges)} "
              f"sessions={len(inst.sessions)}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(doc + "\n")
        print(counts)
    else:
        print(doc)
        print(counts, file=sys.stderr)
    return 0


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    log.info("solving %s: %d nodes, %d edges, %d sessions",
             args.instance, len(inst.nodes), len(inst.edges),
             len(inst.sessions))
    cfg = SolverConfig(step_a=args.step_a, tol=args.tol,
                       max_iters=args.max_iters)
    stats = None
    if args.distributed:
        schedule = SimSchedule(mode=args.schedule, seed=args.schedule_seed)
        sol, trace, stats = run_distributed_solve(inst, cfg, schedule)
    else:
        sol, trace = solve(inst, cfg)
    routing, _ = plain_routing_cost(inst)
    if args.trace:
        write_trace(args.trace, trace)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(solution_to_dict(inst, sol, routing), fh, indent=1)
            fh.write("\n")
    saving = 100.0 * (routing - sol.physical_cost) / routing if routing else 0.0
    status = "certified" if sol.certified else "uncertified"
    print(f"physical_cost={sol.physical_cost:.12g} "
          f"routing_cost={routing:.12g} savings={saving:.1f}% "
          f"gap={sol.gap:.3g} iterations={sol.iterations} {status}")
    if stats is not None:
        print(f"messages: label={stats.label_messages} "
              f"flow={stats.flow_messages} rounds={stats.rounds} "
              f"bytes~{stats.bytes_estimate}")
    return 0 if sol.certified else 2


def cmd_baseline(args) -> int:
    inst = load_instance(args.instance)
    cost, paths = plain_routing_cost(inst)
    print(f"routing_cost={cost:.12g}")
    for s, path in zip(inst.sessions, paths):
        hops = " -> ".join(str(v) for v in path)
        pay = sum(inst.nodes[v].cost for v in path[:-1]) * s.rate
        print(f"{s.sid}: {hops} (cost {pay:.12g})")
    return 0


def cmd_check(args) -> int:
    inst = load_instance(args.instance)
    with open(args.solution) as fh:
        doc = json.load(fh)
    g = build_expanded_graph(inst)
    idx = enumerate_triples(g)
    problems: list[str] = []

    by_id = {s.sid: s for s in inst.sessions}
    flows = []
    doc_sessions = {rec["id"]: rec for rec in doc.get("sessions", [])}
    if set(doc_sessions) != set(by_id):
        print(f"session sets differ: instance has {sorted(by_id)}, "
              f"solution has {sorted(doc_sessions)}", file=sys.stderr)
        return 1
    for s in inst.sessions:
        values = np.zeros(len(idx))
        for ent in doc_sessions[s.sid]["flows"]:
            key = tuple(int(x) for x in ent["triple"])
            if key not in idx.index:
                print(f"session {s.sid}: unknown triple {key}",
                      file=sys.stderr)
                return 1
            val = float(ent["value"])
            if val < 0:
                problems.append(f"session {s.sid}: negative flow on {key}")
                val = 0.0
            values[idx.index[key]] = val
        flows.append(FlowVector(s.sid, values))

    for f in flows:
        res = conservation_residual(f, g, idx)
        for pair, r in sorted(res.items()):
            if abs(r) > 1e-9:
                problems.append(
                    f"session {f.session}: conservation violated at pair "
                    f"{pair}: residual {r:.3g}")

    summary = transmission_summary(flows, g, idx)
    stated_y = {}
    for rec in doc.get("pair_transmissions", []):
        stated_y[(int(rec["v"]), int(rec["mid"]), int(rec["w"]))] = \
            float(rec["y"])
    for row, k in enumerate(idx.pair_fwd):
        key = idx.triples[int(k)]
        want = float(summary.y[row])
        got = stated_y.pop(key, 0.0)
        if got != want:
            note = " (session flows through the pair exceed its y)" \
                if got < want else ""
            problems.append(f"transmissions for pair {key}: stated "
                            f"y={got!r}, flows give {want!r}{note}")
    for key in stated_y:
        problems.append(f"transmissions stated for unknown pair {key}")
    for rec in doc.get("node_transmissions", []):
        i = int(rec["node"])
        if not (0 <= i < g.n_nodes):
            problems.append(f"transmissions stated for unknown node {i}")
            continue
        if float(rec["z"]) != summary.z[i]:
            problems.append(
                f"node {i}: stated z={rec['z']!r}, flows give "
                f"{float(summary.z[i])!r}")

    expanded, physical = total_cost(summary, g)
    for name, stated, want in (("expanded_cost", doc.get("expanded_cost"),
                                expanded),
                               ("physical_cost", doc.get("physical_cost"),
                                physical)):
        if stated is None or abs(float(stated) - want) > 1e-9:
            problems.append(f"{name}: stated {stated!r}, flows give {want!r}")
    if "routing_cost" in doc:
        routing, _ = plain_routing_cost(inst)
        if abs(float(doc["routing_cost"]) - routing) > 1e-9:
            problems.append(f"routing_cost: stated {doc['routing_cost']!r}, "
                            f"recomputed {routing!r}")

    from_doc = doc.get("expanded_cost")
    log.debug("check: %d sessions, worst problems: %d, expanded %s",
              len(flows), len(problems), from_doc)
    for msg in problems:
        print(msg, file=sys.stderr)
    if problems:
        return 1
    print("solution checks out: conservation, transmissions, costs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="carpool",
        description="coded multi-unicast routing: generate, solve, verify")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a random or builtin instance")
    gen.add_argument("-L", type=float, default=6.0, help="square side")
    gen.add_argument("--sessions", type=int, default=4)
    gen.add_argument("--rate", type=float, default=1.0)
    gen.add_argument("--cost", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--builtin", help="named instance instead of random")
    gen.add_argument("--out", help="output path (default: stdout)")
    gen.set_defaults(func=cmd_gen)

    sv = sub.add_parser("solve", help="run the certified coded solver")
    sv.add_argument("instance")
    sv.add_argument("--tol", type=float, default=1e-2)
    sv.add_argument("--max-iters", type=int, default=5000)
    sv.add_argument("--step-a", type=float, default=1.0)
    sv.add_argument("--trace", help="per-iteration CSV path")
    sv.add_argument("--out", help="solution JSON path")
    sv.add_argument("--distributed", action="store_true",
                    help="solve by neighbour-only message passing")
    sv.add_argument("--schedule", choices=["sync", "async"], default="sync")
    sv.add_argument("--schedule-seed", type=int, default=0)
    sv.set_defaults(func=cmd_solve)

    bl = sub.add_parser("baseline", help="plain per-session routing cost")
    bl.add_argument("instance")
    bl.set_defaults(func=cmd_baseline)

    ck = sub.add_parser("check", help="re-verify a solution file")
    ck.add_argument("instance")
    ck.add_argument("solution")
    ck.set_defaults(func=cmd_check)
    return ap


def _setup_logging() -> None:
    level = {"quiet": logging.WARNING, "info": logging.INFO,
             "debug": logging.DEBUG}.get(
                 os.environ.get("CARPOOL_LOG", "quiet"), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"cannot read {exc.filename}", file=sys.stderr)
        return 1
    except (InstanceError, InfeasibleSessionError, GenerationError,
            ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
