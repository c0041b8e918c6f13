"""Player graphs: interference and communication topologies.

Players are labelled ``1..N``.  Edges are stored as sorted tuples ``(i, j)``
with ``i < j``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    DisconnectedGraph,
    EmptyGraph,
    MissingTriangleCover,
    NotSubgraph,
    ValidationError,
)


def _normalize_edge(e) -> tuple[int, int]:
    i, j = (int(v) for v in e)
    if i == j:
        raise ValidationError(f"self-loop at player {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class PlayerGraph:
    """Undirected simple graph over players ``1..n_players``."""

    n_players: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        n = int(self.n_players)
        if n < 0:
            raise ValidationError("n_players must be nonnegative")
        edges = frozenset(_normalize_edge(e) for e in self.edges)
        for i, j in edges:
            if i < 1 or j > n:
                raise ValidationError(f"edge {(i, j)} outside players 1..{n}")
        object.__setattr__(self, "n_players", n)
        object.__setattr__(self, "edges", edges)
        adj: dict[int, tuple[int, ...]] = {}
        nbrs: dict[int, list[int]] = {v: [] for v in range(1, n + 1)}
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        for v, lst in nbrs.items():
            adj[v] = tuple(sorted(lst))
        object.__setattr__(self, "_adj", adj)

    @classmethod
    def from_edges(cls, n_players: int, edges: Iterable[Sequence[int]]) -> "PlayerGraph":
        return cls(n_players, frozenset(tuple(e) for e in edges))

    @classmethod
    def complete(cls, n_players: int) -> "PlayerGraph":
        return cls(n_players, frozenset(combinations(range(1, n_players + 1), 2)))

    @classmethod
    def path(cls, n_players: int) -> "PlayerGraph":
        return cls(n_players, frozenset((i, i + 1) for i in range(1, n_players)))

    @property
    def vertices(self) -> range:
        return range(1, self.n_players + 1)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]

    def closed_neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(self._adj[i] + (i,)))

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_players, self.n_players), dtype=int)
        for i, j in self.edges:
            a[i - 1, j - 1] = a[j - 1, i - 1] = 1
        return a

    def components(self) -> list[set[int]]:
        seen: set[int] = set()
        comps = []
        for s in self.vertices:
            if s in seen:
                continue
            comp = _reachable(self, s)
            seen |= comp
            comps.append(comp)
        return comps

    def is_connected(self) -> bool:
        if self.n_players == 0:
            return False
        return len(_reachable(self, 1)) == self.n_players

    def triangles(self) -> list[tuple[int, int, int]]:
        out = []
        for i, j in self.sorted_edges():
            for w in set(self._adj[i]) & set(self._adj[j]):
                if w > j:
                    out.append((i, j, w))
        return out

    def to_dict(self) -> dict:
        return {"n_players": self.n_players, "edges": [list(e) for e in self.sorted_edges()]}


def _reachable(g: PlayerGraph, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in g.neighbors(v):
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


@dataclass(frozen=True)
class DegreeProfile:
    m_vec: tuple[int, ...]

    @property
    def m(self) -> int:
        return sum(self.m_vec)

    def __getitem__(self, i: int) -> int:
        return self.m_vec[i - 1]


def validate_interference(g: PlayerGraph) -> PlayerGraph:
    """Return ``g`` if it is a usable interference graph.

    Raises
    ------
    EmptyGraph
        If the graph has no players.
    DisconnectedGraph
        If a breadth-first search from player 1 does not reach every player.
    """
    if g.n_players == 0:
        raise EmptyGraph("interference graph has no players")
    if not g.is_connected():
        raise DisconnectedGraph(g.components())
    return g


def maximal_triangle_free_spanning_subgraph(
    g: PlayerGraph, edge_order: Sequence[tuple[int, int]] | None = None
) -> PlayerGraph:
    """Greedy maximal triangle-free spanning subgraph.

    Edges are scanned in ``edge_order`` (lexicographic by default) and kept
    unless their endpoints already share a neighbour among the kept edges.
    Every rejected edge therefore closes a triangle, which makes the result
    maximal.
    """
    order = g.sorted_edges() if edge_order is None else [_normalize_edge(e) for e in edge_order]
    if set(order) != set(g.edges) or len(order) != len(g.edges):
        raise ValidationError("edge_order must be a permutation of the graph's edges")
    nbrs: dict[int, set[int]] = {v: set() for v in g.vertices}
    kept = []
    for i, j in order:
        if nbrs[i] & nbrs[j]:
            continue
        nbrs[i].add(j)
        nbrs[j].add(i)
        kept.append((i, j))
    return PlayerGraph(g.n_players, frozenset(kept))


def is_triangle_free(g: PlayerGraph) -> bool:
    return not g.triangles()


def uncovered_edges(g_i: PlayerGraph, g_c: PlayerGraph) -> list[tuple[int, int]]:
    """Edges of ``g_i`` missing from ``g_c`` whose endpoints share no ``g_c`` neighbour."""
    bad = []
    for u, v in g_i.sorted_edges():
        if g_c.has_edge(u, v):
            continue
        if not set(g_c.neighbors(u)) & set(g_c.neighbors(v)):
            bad.append((u, v))
    return bad


def validate_communication(g_i: PlayerGraph, g_c: PlayerGraph) -> tuple[PlayerGraph, PlayerGraph]:
    """Check that ``g_c`` is an admissible communication graph for ``g_i``.

    Accepted when ``g_c`` is a connected spanning subgraph of ``g_i`` and every
    pruned interference edge ``(u, v)`` has a common communication neighbour.
    If the greedy triangle-free subgraph of ``g_i`` were disconnected, only
    ``g_c == g_i`` is accepted.
    """
    validate_interference(g_i)
    if g_c.n_players != g_i.n_players:
        raise ValidationError("graphs have different player sets")
    extra = g_c.edges - g_i.edges
    if extra:
        raise NotSubgraph(extra)
    if not g_c.is_connected():
        raise DisconnectedGraph(g_c.components())
    if g_c.edges == g_i.edges:
        return g_i, g_c
    if not maximal_triangle_free_spanning_subgraph(g_i).is_connected():
        # unreachable for connected g_i, kept as the second branch of the rule
        raise ValidationError("g_I has no connected triangle-free spanning subgraph; g_C must equal g_I")
    bad = uncovered_edges(g_i, g_c)
    if bad:
        raise MissingTriangleCover(bad[0])
    return g_i, g_c


def degree_profile(g_i: PlayerGraph) -> DegreeProfile:
    return DegreeProfile(tuple(g_i.degree(v) + 1 for v in g_i.vertices))


def b_matrix(g_i: PlayerGraph) -> np.ndarray:
    """Adjacency plus identity; row ``i`` sums to ``deg(i) + 1``."""
    return g_i.adjacency() + np.eye(g_i.n_players, dtype=int)
