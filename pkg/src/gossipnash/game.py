"""Games with partially coupled costs.

A :class:`GameSpec` bundles an interference graph, one scalar action interval
per player and a cost family.  Cost families evaluate player ``i`` from its
own action and the actions of its interference neighbours only; the full
vector entry points simply slice those coordinates out, so locality holds by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import (
    MonotonicityViolation,
    OutOfDomain,
    SingularCost,
    ValidationError,
)
from .graphs import PlayerGraph, validate_interference

SINGULAR_SLACK = 1e-9
DEFAULT_GRADIENT_CAP = 1e6


@dataclass(frozen=True)
class ActionInterval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ValidationError(f"invalid action interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, y: float, tol: float = 1e-12) -> bool:
        return self.lo - tol <= y <= self.hi + tol

    def project(self, y: float) -> float:
        return project(self, y)


def project(interval: ActionInterval, y: float) -> float:
    """Euclidean projection of a scalar onto ``interval``."""
    if y < interval.lo:
        return interval.lo
    if y > interval.hi:
        return interval.hi
    return float(y)


class CostFamily:
    """Base class for per-player costs.

    Subclasses implement ``local_cost`` and ``local_grad`` taking player
    ``i`` (1-indexed), its own action and the array of its neighbours' actions
    ordered as ``graph.neighbors(i)``.
    """

    kind = "custom"

    def bind(self, graph: PlayerGraph) -> None:
        self.graph = graph

    def local_cost(self, i: int, xi: float, nbr: np.ndarray) -> float:
        raise NotImplementedError

    def local_grad(self, i: int, xi: float, nbr: np.ndarray, cap: float | None = None) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")


class QuadraticCost(CostFamily):
    """Costs whose pseudo-gradient is affine, ``F(x) = Q x + c``.

    Player ``i`` pays ``0.5*Q[i,i]*x_i**2 + x_i*sum_{j != i} Q[i,j]*x_j + c[i]*x_i``.
    Off-diagonal entries of ``Q`` may only be nonzero on interference edges.
    """

    kind = "quadratic"

    def __init__(self, matrix, vector=None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise ValidationError("quadratic matrix must be square")
        self.vector = np.zeros(n) if vector is None else np.asarray(vector, dtype=float).reshape(n)

    def bind(self, graph):
        n = graph.n_players
        if self.matrix.shape[0] != n:
            raise ValidationError(f"quadratic matrix is {self.matrix.shape}, expected ({n}, {n})")
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i != j and self.matrix[i - 1, j - 1] != 0 and not graph.has_edge(i, j):
                    raise ValidationError(f"cost of player {i} depends on non-neighbour {j}")
        self.graph = graph
        self._diag = [float(self.matrix[i - 1, i - 1]) for i in graph.vertices]
        self._rows = [
            self.matrix[i - 1, [j - 1 for j in graph.neighbors(i)]].copy() for i in graph.vertices
        ]
        self._c = [float(v) for v in self.vector]

    def local_cost(self, i, xi, nbr):
        k = i - 1
        return float(0.5 * self._diag[k] * xi * xi + xi * (self._rows[k] @ nbr) + self._c[k] * xi)

    def local_grad(self, i, xi, nbr, cap=None):
        k = i - 1
        return float(self._diag[k] * xi + self._rows[k] @ nbr + self._c[k])

    def to_dict(self):
        return {"type": "quadratic", "matrix": self.matrix.tolist(), "vector": self.vector.tolist()}


class WanetCost(CostFamily):
    """Congestion cost of a flow-control game on shared links.

    User ``i`` routes flow ``x_i`` over the links in ``paths[i-1]`` and pays
    ``sum_{l in R_i} kappa / (C_l - load_l) - chi_i * log(x_i + 1)``.
    Link indices are 1-based.
    """

    kind = "wanet"

    def __init__(self, paths, capacities, kappa=2.0, chi=10.0):
        self.paths = [tuple(int(l) for l in p) for p in paths]
        self.capacities = np.asarray(capacities, dtype=float)
        self.kappa = float(kappa)
        n = len(self.paths)
        chi_arr = np.asarray(chi, dtype=float)
        self.chi = np.full(n, float(chi_arr)) if chi_arr.ndim == 0 else chi_arr.reshape(n)
        if self.kappa <= 0 or np.any(self.chi <= 0) or np.any(self.capacities <= 0):
            raise ValidationError("kappa, chi and capacities must be positive")
        n_links = len(self.capacities)
        for p in self.paths:
            if not p or min(p) < 1 or max(p) > n_links:
                raise ValidationError(f"path {p} references links outside 1..{n_links}")

    def users_of(self, link: int) -> list[int]:
        return [u for u, p in enumerate(self.paths, start=1) if link in p]

    def bind(self, graph):
        n = graph.n_players
        if len(self.paths) != n:
            raise ValidationError(f"{len(self.paths)} paths for {n} players")
        self.graph = graph
        self._links, self._load_maps, self._caps = [], [], []
        for i in graph.vertices:
            nbrs = graph.neighbors(i)
            pos = {j: k for k, j in enumerate(nbrs)}
            links = sorted(set(self.paths[i - 1]))
            load_map = np.zeros((len(links), len(nbrs)))
            for r, l in enumerate(links):
                for u in self.users_of(l):
                    if u == i:
                        continue
                    if u not in pos:
                        raise ValidationError(f"users {i} and {u} share link {l} but are not interference neighbours")
                    load_map[r, pos[u]] = 1.0
            self._links.append(links)
            self._load_maps.append(load_map)
            self._caps.append(self.capacities[[l - 1 for l in links]])

    def _slack(self, i, xi, nbr):
        k = i - 1
        return self._caps[k] - (self._load_maps[k] @ nbr + xi)

    def local_cost(self, i, xi, nbr):
        slack = self._slack(i, xi, nbr)
        if np.any(slack <= SINGULAR_SLACK):
            raise SingularCost(f"link load reaches capacity for user {i}")
        return float(self.kappa * np.sum(1.0 / slack) - self.chi[i - 1] * math.log(xi + 1.0))

    def local_grad(self, i, xi, nbr, cap=None):
        slack = self._slack(i, xi, nbr)
        if cap is None:
            if np.any(slack <= SINGULAR_SLACK):
                raise SingularCost(f"link load reaches capacity for user {i}")
            return float(self.kappa * np.sum(1.0 / (slack * slack)) - self.chi[i - 1] / (xi + 1.0))
        slack = np.maximum(slack, math.sqrt(self.kappa / cap))
        g = self.kappa * np.sum(1.0 / (slack * slack)) - self.chi[i - 1] / (xi + 1.0)
        return float(min(max(g, -cap), cap))

    def to_dict(self):
        return {
            "type": "wanet",
            "paths": [list(p) for p in self.paths],
            "capacities": self.capacities.tolist(),
            "kappa": self.kappa,
            "chi": self.chi.tolist(),
        }


class CustomCost(CostFamily):
    """Costs given as callbacks ``cost(i, x)`` and ``grad(i, x)`` on full vectors.

    Coordinates outside the closed neighbourhood of ``i`` are passed as NaN, so
    a callback that reads them produces NaN instead of a silently wrong value.
    """

    def __init__(self, cost: Callable, grad: Callable):
        self.cost_fn = cost
        self.grad_fn = grad

    def bind(self, graph):
        self.graph = graph
        self._n = graph.n_players

    def _full(self, i, xi, nbr):
        x = np.full(self._n, np.nan)
        x[i - 1] = xi
        x[[j - 1 for j in self.graph.neighbors(i)]] = nbr
        return x

    def local_cost(self, i, xi, nbr):
        return float(self.cost_fn(i, self._full(i, xi, nbr)))

    def local_grad(self, i, xi, nbr, cap=None):
        g = float(self.grad_fn(i, self._full(i, xi, nbr)))
        if cap is not None:
            g = min(max(g, -cap), cap)
        return g


@dataclass
class GameSpec:
    """Game over a validated interference graph.

    Parameters
    ----------
    graph : PlayerGraph
        Interference graph; must be connected.
    actions : sequence of ActionInterval
        One interval per player.
    costs : CostFamily
        Cost family bound to ``graph`` on construction.
    gradient_cap : float, optional
        Magnitude cap applied by :meth:`safe_grad` (used by the simulator).
    """

    graph: PlayerGraph
    actions: Sequence[ActionInterval]
    costs: CostFamily
    gradient_cap: float = DEFAULT_GRADIENT_CAP
    _nbr_idx: list = field(init=False, repr=False)

    def __post_init__(self):
        validate_interference(self.graph)
        self.actions = tuple(
            a if isinstance(a, ActionInterval) else ActionInterval(*a) for a in self.actions
        )
        if len(self.actions) != self.graph.n_players:
            raise ValidationError("one action interval per player required")
        self.costs.bind(self.graph)
        self._nbr_idx = [np.array([j - 1 for j in self.graph.neighbors(i)], dtype=int) for i in self.graph.vertices]

    @property
    def n_players(self) -> int:
        return self.graph.n_players

    @property
    def lower(self) -> np.ndarray:
        return np.array([a.lo for a in self.actions])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a.hi for a in self.actions])

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n_players:
            raise OutOfDomain(f"expected {self.n_players} actions, got {x.shape[0]}")
        for i, a in enumerate(self.actions):
            if not a.contains(x[i]):
                raise OutOfDomain(f"action {x[i]} of player {i + 1} outside [{a.lo}, {a.hi}]")
        return x

    def neighbor_values(self, i: int, x: np.ndarray) -> np.ndarray:
        return x[self._nbr_idx[i - 1]]

    def safe_grad(self, i: int, xi: float, nbr: np.ndarray) -> float:
        return self.costs.local_grad(i, xi, nbr, cap=self.gradient_cap)

    def pseudo_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([grad_own(self, i, x, check=False) for i in self.graph.vertices])

    def project(self, y) -> np.ndarray:
        return np.clip(np.asarray(y, dtype=float), self.lower, self.upper)

    def to_dict(self) -> dict:
        return {
            "n_players": self.n_players,
            "interference_edges": [list(e) for e in self.graph.sorted_edges()],
            "actions": [[a.lo, a.hi] for a in self.actions],
            "game": self.costs.to_dict(),
        }


def cost(spec: GameSpec, i: int, x, check: bool = True) -> float:
    """Cost of player ``i`` at the full action profile ``x``."""
    x = spec.check_domain(x) if check else np.asarray(x, dtype=float)
    return spec.costs.local_cost(i, float(x[i - 1]), spec.neighbor_values(i, x))


def grad_own(spec: GameSpec, i: int, x, check: bool = True) -> float:
    """Partial derivative of player ``i``'s cost with respect to its own action."""
    x = spec.check_domain(x) if check else np.asarray(x, dtype=float)
    return spec.costs.local_grad(i, float(x[i - 1]), spec.neighbor_values(i, x))


def pseudo_gradient(spec: GameSpec, x) -> np.ndarray:
    return spec.pseudo_gradient(x)


@dataclass(frozen=True)
class RegularityEstimates:
    mu: float
    rho: float
    sigma: tuple
    L_i: tuple
    C: float
    exact: bool
    n_samples: int = 0

    @property
    def L(self) -> float:
        return max(self.L_i) if self.L_i else 0.0


def sample_feasible(spec: GameSpec, rng: np.random.Generator, max_halvings: int = 60) -> np.ndarray:
    """Uniform draw from the action box, shrunk toward the lower corner until all costs are finite."""
    lo, hi = spec.lower, spec.upper
    x = lo + (hi - lo) * rng.random(spec.n_players)
    for _ in range(max_halvings):
        try:
            for i in spec.graph.vertices:
                grad_own(spec, i, x, check=False)
            return x
        except SingularCost:
            x = lo + 0.5 * (x - lo)
    raise SingularCost("could not draw a feasible action profile")


def estimate_regularity(
    spec: GameSpec, n_samples: int = 2000, seed: int = 0, check: bool = True, tol: float = 1e-9
) -> RegularityEstimates:
    """Monotonicity and Lipschitz constants of the pseudo-gradient.

    Quadratic games get exact values from the coefficient matrix; everything
    else is estimated from ``n_samples`` random pairs of feasible profiles,
    so those numbers are empirical, not certified bounds.
    """
    if isinstance(spec.costs, QuadraticCost):
        est = _quadratic_regularity(spec)
    else:
        est = _sampled_regularity(spec, n_samples, seed)
    if check and est.mu < -tol:
        raise MonotonicityViolation(f"pseudo-gradient is not monotone (mu = {est.mu:.3g})")
    return est


def _quadratic_regularity(spec):
    q = spec.costs.matrix
    sym = 0.5 * (q + q.T)
    mu = float(np.linalg.eigvalsh(sym)[0])
    rho = float(np.linalg.norm(q, 2))
    sigma = tuple(abs(float(q[i, i])) for i in range(spec.n_players))
    lips = tuple(float(np.linalg.norm(r)) for r in spec.costs._rows)
    lo, hi = spec.lower, spec.upper
    c = spec.costs.vector
    big = np.maximum(q * lo, q * hi).sum(axis=1) + c
    small = np.minimum(q * lo, q * hi).sum(axis=1) + c
    bound = float(np.max(np.maximum(np.abs(big), np.abs(small))))
    return RegularityEstimates(mu, rho, sigma, lips, bound, exact=True)


def _sampled_regularity(spec, n_samples, seed):
    rng = np.random.default_rng(seed)
    n = spec.n_players
    mu, rho, bound = math.inf, 0.0, 0.0
    sigma = np.zeros(n)
    lips = np.zeros(n)
    for _ in range(n_samples):
        x = sample_feasible(spec, rng)
        y = sample_feasible(spec, rng)
        fx, fy = spec.pseudo_gradient(x), spec.pseudo_gradient(y)
        d = x - y
        dd = float(d @ d)
        if dd == 0.0:
            continue
        mu = min(mu, float((fx - fy) @ d) / dd)
        rho = max(rho, float(np.linalg.norm(fx - fy)) / math.sqrt(dd))
        bound = max(bound, float(np.max(np.abs(fx))), float(np.max(np.abs(fy))))
        for i in spec.graph.vertices:
            k = i - 1
            ux = spec.neighbor_values(i, x)
            uy = spec.neighbor_values(i, y)
            # own-action direction: hold x's neighbour values, move x_i to y_i
            if d[k] != 0.0:
                try:
                    g2 = spec.costs.local_grad(i, float(y[k]), ux)
                except SingularCost:
                    g2 = None
                if g2 is not None:
                    sigma[k] = max(sigma[k], abs(fx[k] - g2) / abs(d[k]))
            du = float(np.linalg.norm(ux - uy))
            if du > 0.0:
                try:
                    g3 = spec.costs.local_grad(i, float(x[k]), uy)
                except SingularCost:
                    g3 = None
                if g3 is not None:
                    lips[k] = max(lips[k], abs(fx[k] - g3) / du)
    return RegularityEstimates(
        float(mu), float(rho), tuple(sigma.tolist()), tuple(lips.tolist()), float(bound),
        exact=False, n_samples=n_samples,
    )
