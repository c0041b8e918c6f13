"""Distributed Nash equilibrium seeking over gossip networks.

Players of a graphical game only observe the actions of their interference
neighbours.  They keep estimates of those actions, refresh them through
randomised pairwise exchanges on a sparser communication graph, and take
projected gradient steps on their own cost.
"""

__version__ = "0.1.0"

from .engine import RunTrace, StepSizePolicy, advance, gossip_exchange, init, local_step, run, select_pair
from .exceptions import ConfigError, GossipNashError, ValidationError
from .game import ActionInterval, CustomCost, GameSpec, QuadraticCost, WanetCost, estimate_regularity
from .graphs import (
    PlayerGraph,
    maximal_triangle_free_spanning_subgraph,
    validate_communication,
    validate_interference,
)
from .indexing import IndexMap, comm_matrix, pair_distribution
from .oracle import solve_best_response_grid, solve_projected_gradient, vi_residual
from .spectral import gamma_report, timing_model
from .wanet import WanetBenchmark

__all__ = [
    "ActionInterval",
    "ConfigError",
    "CustomCost",
    "GameSpec",
    "GossipNashError",
    "IndexMap",
    "PlayerGraph",
    "QuadraticCost",
    "RunTrace",
    "StepSizePolicy",
    "ValidationError",
    "WanetBenchmark",
    "WanetCost",
    "advance",
    "comm_matrix",
    "estimate_regularity",
    "gamma_report",
    "gossip_exchange",
    "init",
    "local_step",
    "maximal_triangle_free_spanning_subgraph",
    "pair_distribution",
    "run",
    "select_pair",
    "solve_best_response_grid",
    "solve_projected_gradient",
    "timing_model",
    "validate_communication",
    "validate_interference",
    "vi_residual",
]
