"""Flow-control game on a wireless ad-hoc network.

The shipped topology has 16 links and 15 users.  It is a representative
layout, sparse enough that every user shares a link with two to five others.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .exceptions import ValidationError
from .game import ActionInterval, GameSpec, WanetCost
from .graphs import PlayerGraph, maximal_triangle_free_spanning_subgraph, validate_interference

N_LINKS = 16

PATHS: tuple[tuple[int, ...], ...] = (
    (1, 2),
    (2, 3),
    (3, 4, 5),
    (5, 6),
    (6, 7),
    (7, 8, 1),
    (8, 9),
    (9, 10),
    (10, 11, 4),
    (11, 12),
    (12, 13),
    (13, 14, 9),
    (14, 15),
    (15, 16),
    (16, 1, 13),
)


def derive_interference_from_paths(paths: Sequence[Sequence[int]], n_users: int | None = None) -> PlayerGraph:
    """Users interfere iff their paths share a link."""
    n = len(paths) if n_users is None else n_users
    sets = [set(p) for p in paths]
    edges = [(i + 1, j + 1) for i in range(n) for j in range(i + 1, n) if sets[i] & sets[j]]
    return PlayerGraph.from_edges(n, edges)


def densify(g_i: PlayerGraph, g_c: PlayerGraph, n_extra: int) -> PlayerGraph:
    """Add the first ``n_extra`` pruned interference edges back to ``g_c``."""
    missing = sorted(g_i.edges - g_c.edges)[:n_extra]
    return PlayerGraph(g_c.n_players, g_c.edges | frozenset(missing))


@dataclass
class WanetBenchmark:
    paths: Sequence[Sequence[int]] = PATHS
    capacities: Sequence[float] = field(default_factory=lambda: [10.0] * N_LINKS)
    kappa: float = 2.0
    chi: float = 10.0
    bounds: tuple[float, float] = (0.0, 10.0)

    def __post_init__(self):
        used = set().union(*(set(p) for p in self.paths))
        if used != set(range(1, len(self.capacities) + 1)):
            raise ValidationError("every link must be used by at least one user")

    @property
    def n_users(self) -> int:
        return len(self.paths)

    def interference_graph(self) -> PlayerGraph:
        return validate_interference(derive_interference_from_paths(self.paths))

    def communication_graph(self, n_extra: int = 0) -> PlayerGraph:
        g_i = self.interference_graph()
        g_m = maximal_triangle_free_spanning_subgraph(g_i)
        return densify(g_i, g_m, n_extra) if n_extra else g_m

    def game(self) -> GameSpec:
        cost = WanetCost(self.paths, self.capacities, self.kappa, self.chi)
        return GameSpec(self.interference_graph(), [ActionInterval(*self.bounds)] * self.n_users, cost)
