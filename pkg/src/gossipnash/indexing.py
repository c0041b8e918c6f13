"""Stacked estimate space and the gossip matrices built on it.

Every player ``i`` keeps one estimate per member of its closed interference
neighbourhood.  Stacking those blocks player by player gives a vector of
length ``m = sum_i (deg(i) + 1)``; :class:`IndexMap` maps ``(i, j)`` to its
slot.  Public slot numbers are 1-based; the ``*_slots`` arrays used for
indexing numpy vectors are 0-based.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np
from scipy import sparse

from .exceptions import BadDistribution, NotANeighbor, NotCommNeighbors
from .graphs import PlayerGraph, b_matrix, degree_profile


def s_index(B: np.ndarray, i: int, j: int) -> int:
    """1-based slot of player ``i``'s estimate of player ``j``."""
    B = np.asarray(B)
    if B[i - 1, j - 1] != 1:
        raise NotANeighbor(f"player {j} is not in the closed neighbourhood of player {i}")
    m_vec = B.sum(axis=1)
    offset = int(m_vec[: i - 1].sum()) if i != 1 else 0
    return int(B[i - 1, :j].sum()) + offset


class IndexMap:
    def __init__(self, g_i: PlayerGraph):
        self.graph = g_i
        self.N = g_i.n_players
        self.B = b_matrix(g_i)
        self.m_vec = np.array(degree_profile(g_i).m_vec, dtype=int)
        self.m = int(self.m_vec.sum())
        self.slot: dict[tuple[int, int], int] = {}
        for i in g_i.vertices:
            for j in g_i.closed_neighbors(i):
                self.slot[(i, j)] = s_index(self.B, i, j)
        self.inverse = [None] * (self.m + 1)
        for key, s in self.slot.items():
            self.inverse[s] = key
        # 0-based helpers for vectorised access
        self.holder = np.array([self.inverse[s][0] - 1 for s in range(1, self.m + 1)], dtype=int)
        self.column = np.array([self.inverse[s][1] - 1 for s in range(1, self.m + 1)], dtype=int)
        self.own_slots = np.array([self.slot[(i, i)] - 1 for i in g_i.vertices], dtype=int)
        self.nbr_slots = [
            np.array([self.slot[(i, j)] - 1 for j in g_i.neighbors(i)], dtype=int) for i in g_i.vertices
        ]

    def __repr__(self):
        return f"IndexMap(N={self.N}, m={self.m})"

    def s(self, i: int, j: int) -> int:
        try:
            return self.slot[(i, j)]
        except KeyError:
            raise NotANeighbor(f"player {j} is not in the closed neighbourhood of player {i}") from None

    def block(self, i: int) -> range:
        start = int(self.m_vec[: i - 1].sum())
        return range(start + 1, start + int(self.m_vec[i - 1]) + 1)

    def interest_set(self, i: int) -> list[int]:
        """1-based slots of player ``i``'s estimates of its neighbours."""
        return [self.slot[(i, j)] for j in self.graph.neighbors(i)]

    def ind(self, i: int, j: int) -> list[int]:
        """Players in both closed neighbourhoods of ``i`` and ``j``."""
        return [z for z in range(1, self.N + 1) if self.B[i - 1, z - 1] and self.B[j - 1, z - 1]]

    def pair_slots(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """0-based slot arrays ``(a, b)`` averaged pairwise when ``i`` and ``j`` gossip."""
        common = self.ind(i, j)
        if i not in common or j not in common:
            raise NotCommNeighbors(f"players {i} and {j} are not interference neighbours")
        a = np.array([self.slot[(i, l)] - 1 for l in common], dtype=int)
        b = np.array([self.slot[(j, l)] - 1 for l in common], dtype=int)
        return a, b

    def extract_actions(self, x_tilde: np.ndarray) -> np.ndarray:
        return np.asarray(x_tilde)[self.own_slots]


def unit_selector(i: int, j: int, index_map: IndexMap) -> np.ndarray:
    e = np.zeros(index_map.m)
    if (i, j) in index_map.slot:
        e[index_map.slot[(i, j)] - 1] = 1.0
    return e


def _check_comm(index_map, i, j, g_c):
    if i == j or (g_c is not None and not g_c.has_edge(i, j)):
        raise NotCommNeighbors(f"players {i} and {j} are not communication neighbours")


def comm_matrix(index_map: IndexMap, i_k: int, j_k: int, g_c: PlayerGraph | None = None, as_sparse: bool = False):
    """Averaging matrix of one gossip exchange between ``i_k`` and ``j_k``."""
    _check_comm(index_map, i_k, j_k, g_c)
    a, b = index_map.pair_slots(i_k, j_k)
    m = index_map.m
    if as_sparse:
        w = sparse.lil_matrix((m, m))
        w.setdiag(1.0)
    else:
        w = np.eye(m)
    w[a, a] = 0.5
    w[b, b] = 0.5
    w[a, b] = 0.5
    w[b, a] = 0.5
    return w.tocsr() if as_sparse else w


def comm_matrix_from_selectors(index_map: IndexMap, i_k: int, j_k: int) -> np.ndarray:
    """Same matrix assembled term by term from the unit selectors."""
    w = np.eye(index_map.m)
    for l in index_map.ind(i_k, j_k):
        d = unit_selector(i_k, l, index_map) - unit_selector(j_k, l, index_map)
        w -= 0.5 * np.outer(d, d)
    return w


def kron_comm_matrix(N: int, i_k: int, j_k: int) -> np.ndarray:
    """Fully coupled exchange matrix ``(I_N - (e_i - e_j)(e_i - e_j)^T / 2) kron I_N``."""
    d = np.zeros(N)
    d[i_k - 1], d[j_k - 1] = 1.0, -1.0
    return np.kron(np.eye(N) - 0.5 * np.outer(d, d), np.eye(N))


def canonical_permutation(index_map: IndexMap) -> np.ndarray:
    """Slot order placing ``(i, j)`` at ``(i-1)*N + (j-1)``; complete graphs only."""
    N = index_map.N
    if index_map.m != N * N:
        raise ValueError("canonical permutation is defined for complete interference graphs")
    perm = np.empty(index_map.m, dtype=int)
    for (i, j), s in index_map.slot.items():
        perm[(i - 1) * N + (j - 1)] = s - 1
    return perm


def h_matrices(index_map: IndexMap) -> tuple[np.ndarray, np.ndarray]:
    """Replication matrix ``H`` (m x N) and averaging matrix ``H_bar`` (N x m)."""
    H = np.zeros((index_map.m, index_map.N))
    H[np.arange(index_map.m), index_map.column] = 1.0
    H_bar = (H / index_map.m_vec).T
    return H, H_bar


def consensus_residual(index_map: IndexMap, x_tilde) -> tuple[np.ndarray, float]:
    """Replicated slot averages ``Z`` and ``||x_tilde - Z||``."""
    x_tilde = np.asarray(x_tilde, dtype=float)
    z = np.bincount(index_map.column, weights=x_tilde, minlength=index_map.N) / index_map.m_vec
    Z = z[index_map.column]
    return Z, float(np.linalg.norm(x_tilde - Z))


def slot_averages(index_map: IndexMap, x_tilde) -> np.ndarray:
    """Per-player average of all estimates of that player's action."""
    return np.bincount(index_map.column, weights=np.asarray(x_tilde, dtype=float), minlength=index_map.N) / index_map.m_vec


def r_matrix(index_map: IndexMap) -> np.ndarray:
    H, H_bar = h_matrices(index_map)
    return np.eye(index_map.m) - H @ H_bar


def q_matrix(index_map: IndexMap, i_k: int, j_k: int) -> np.ndarray:
    H, H_bar = h_matrices(index_map)
    W = comm_matrix(index_map, i_k, j_k)
    return W - H @ (H_bar @ W)


def pair_distribution(g_c: PlayerGraph, scheme: str = "wakeup") -> dict[tuple[int, int], float]:
    """Probability of each ordered gossip event ``(i, j)``.

    ``"wakeup"``: ``i`` uniform over players, ``j`` uniform over its
    communication neighbours.  ``"edge"``: every ordered pair equally likely.
    """
    N = g_c.n_players
    if scheme == "wakeup":
        return {(i, j): 1.0 / (N * g_c.degree(i)) for i in g_c.vertices for j in g_c.neighbors(i)}
    if scheme == "edge":
        total = sum(g_c.degree(i) for i in g_c.vertices)
        return {(i, j): 1.0 / total for i in g_c.vertices for j in g_c.neighbors(i)}
    raise ValueError(f"unknown scheme {scheme!r}")


def check_distribution(pair_probs: Mapping, g_c: PlayerGraph | None = None, tol: float = 1e-12) -> None:
    total = float(sum(pair_probs.values()))
    if abs(total - 1.0) > tol:
        raise BadDistribution(f"pair probabilities sum to {total!r}")
    if any(p < 0 for p in pair_probs.values()):
        raise BadDistribution("negative pair probability")
    if g_c is not None:
        for (i, j), p in pair_probs.items():
            if p > 0 and not g_c.has_edge(i, j):
                raise BadDistribution(f"pair {(i, j)} is not a communication edge")


def expected_comm_matrix(index_map: IndexMap, g_c: PlayerGraph, pair_probs: Mapping | None = None) -> np.ndarray:
    """Expectation of the exchange matrix under ``pair_probs`` (wake-up model by default)."""
    probs = pair_distribution(g_c) if pair_probs is None else dict(pair_probs)
    check_distribution(probs, g_c)
    w_bar = np.zeros((index_map.m, index_map.m))
    for (i, j), p in probs.items():
        if p:
            w_bar += p * comm_matrix(index_map, i, j, g_c)
    return w_bar


def expected_comm_matrix_closed_form(index_map: IndexMap, g_c: PlayerGraph) -> np.ndarray:
    """Closed-form expectation with every ordered communication pair equally likely."""
    acc = np.zeros((index_map.m, index_map.m))
    for i in g_c.vertices:
        for j in g_c.neighbors(i):
            for l in index_map.ind(i, j):
                d = unit_selector(i, l, index_map) - unit_selector(j, l, index_map)
                acc += np.outer(d, d)
    total = sum(g_c.degree(i) for i in g_c.vertices)
    return np.eye(index_map.m) - acc / (2 * total)


def expected_qtq(index_map: IndexMap, g_c: PlayerGraph, pair_probs: Mapping | None = None) -> np.ndarray:
    """Exact ``E[Q^T Q]`` by summation over the finite set of gossip events."""
    probs = pair_distribution(g_c) if pair_probs is None else dict(pair_probs)
    check_distribution(probs, g_c)
    acc = np.zeros((index_map.m, index_map.m))
    for (i, j), p in probs.items():
        if p:
            q = q_matrix(index_map, i, j)
            acc += p * (q.T @ q)
    return acc


def expected_kron_qtq(g_c: PlayerGraph, pair_probs: Mapping | None = None) -> np.ndarray:
    """``E[Q^T Q]`` for the fully coupled form ``Q = (W - 11^T W / N) kron I_N``."""
    N = g_c.n_players
    probs = pair_distribution(g_c) if pair_probs is None else dict(pair_probs)
    check_distribution(probs, g_c)
    acc = np.zeros((N, N))
    avg = np.ones((N, N)) / N
    for (i, j), p in probs.items():
        if p:
            d = np.zeros(N)
            d[i - 1], d[j - 1] = 1.0, -1.0
            w = np.eye(N) - 0.5 * np.outer(d, d)
            q = w - avg @ w
            acc += p * (q.T @ q)
    # the Kronecker factor I_N leaves the spectrum unchanged
    return acc
