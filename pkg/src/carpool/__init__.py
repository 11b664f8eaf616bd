"""Minimum-cost multi-unicast routing with reverse-carpooling coding."""

from .model import (ExpandedGraph, FlowVector, InfeasibleSessionError,
                    Instance, InstanceError, Node, PriceVector, Session,
                    TransmissionSummary, TripleIndex, build_expanded_graph,
                    conservation_residual, enumerate_triples, total_cost,
                    transmission_summary)
from .edge_graph import (EdgeGraph, SessionPath, build_edge_graph,
                         dominant_path, path_to_flow, primal_subproblem,
                         shortest_path)
from .solver import (Solution, SolverConfig, SolveTrace, init_prices,
                     project_pair, project_pair_reference, recover_primal,
                     solve, subgradient_step)
from .distributed import (Message, MessageStats, NodeProcessor, SimSchedule,
                          distributed_price_update, distributed_shortest_paths,
                          make_processors, run_distributed_solve)
from .instances import (GenerationError, GeometricConfig, builtin_instances,
                        edges_within_radius, generate_geometric,
                        plain_routing_cost)

__version__ = "0.1.0"
