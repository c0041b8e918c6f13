"""Estimator-style wrappers.

``fit`` takes a :class:`~gossipnash.game.GameSpec` instead of a data matrix;
fitted attributes carry a trailing underscore as usual.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .engine import StepSizePolicy, run
from .exceptions import ValidationError
from .game import GameSpec
from .graphs import PlayerGraph, maximal_triangle_free_spanning_subgraph
from .indexing import IndexMap
from .oracle import solve_projected_gradient, vi_residual


def check_game(game) -> GameSpec:
    if not isinstance(game, GameSpec):
        raise ValidationError(f"expected a GameSpec, got {type(game).__name__}")
    return game


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_step_size(step_size) -> StepSizePolicy:
    """Accept ``"diminishing"``, a positive float or a per-player sequence."""
    if isinstance(step_size, StepSizePolicy):
        return step_size
    if step_size == "diminishing":
        return StepSizePolicy.diminishing()
    if isinstance(step_size, str):
        raise ValidationError(f"unknown step size {step_size!r}")
    return StepSizePolicy.constant(step_size)


def check_random_state(random_state) -> int:
    if random_state is None:
        return 0
    if isinstance(random_state, numbers.Integral) and random_state >= 0:
        return int(random_state)
    raise ValidationError("random_state must be a non-negative integer")


class GossipNashSeeker(BaseEstimator):
    """Run the gossip protocol on a game and keep the last action profile.

    Parameters
    ----------
    comm_edges : list of (int, int), optional
        Communication edges.  Defaults to the greedy triangle-free subgraph
        of the game's interference graph.
    step_size : "diminishing", float or sequence of float
        Step-size policy.
    n_iters : int
        Number of gossip events.
    init : str or array-like
        Initial estimates, see :func:`gossipnash.engine.init`.
    stride : int
        Recording stride of the trace.
    algorithm : {"graphical", "full"}
        Whether players track only their neighbours or every player.
    random_state : int, optional
        Seed of the event scheduler and of random initial states.
    x_star : array-like, optional
        Reference equilibrium for the normalised error in ``trace_``.
    """

    def __init__(
        self,
        comm_edges=None,
        step_size="diminishing",
        n_iters: int = 10_000,
        init="midpoint",
        stride: int = 10,
        algorithm: str = "graphical",
        random_state=None,
        x_star=None,
    ):
        self.comm_edges = comm_edges
        self.step_size = step_size
        self.n_iters = n_iters
        self.init = init
        self.stride = stride
        self.algorithm = algorithm
        self.random_state = random_state
        self.x_star = x_star

    def _comm_graph(self, spec: GameSpec) -> PlayerGraph:
        if self.comm_edges is None:
            return maximal_triangle_free_spanning_subgraph(spec.graph)
        return PlayerGraph.from_edges(spec.n_players, self.comm_edges)

    def fit(self, game, y=None):
        spec = check_game(game)
        n_iters = check_positive_int(self.n_iters, "n_iters")
        stride = check_positive_int(self.stride, "stride")
        if self.algorithm not in ("graphical", "full"):
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        g_c = self._comm_graph(spec)
        self.trace_ = run(
            spec, g_c, check_step_size(self.step_size), seed=check_random_state(self.random_state),
            n_iters=n_iters, x_star=self.x_star, init_rule=self.init, stride=stride, algorithm=self.algorithm,
        )
        self.equilibrium_ = self.trace_.final_x
        self.comm_graph_ = g_c
        self.index_map_ = IndexMap(spec.graph if self.algorithm == "graphical" else PlayerGraph.complete(spec.n_players))
        self.n_players_ = spec.n_players
        return self

    def score(self, game, y=None) -> float:
        """Negative fixed-point residual of ``equilibrium_``; 0 is best."""
        check_is_fitted(self, "equilibrium_")
        return -vi_residual(check_game(game), self.equilibrium_)


class NashOracle(BaseEstimator):
    """Full-information projected-gradient solver.

    Parameters
    ----------
    eta : float, optional
        Fixed step.  ``None`` picks a step automatically.
    tol : float
        Target fixed-point residual.
    max_iters : int
        Iteration cap.
    """

    def __init__(self, eta=None, tol: float = 1e-10, max_iters: int = 1_000_000):
        self.eta = eta
        self.tol = tol
        self.max_iters = max_iters

    def fit(self, game, y=None):
        spec = check_game(game)
        res = solve_projected_gradient(spec, eta=self.eta, tol=self.tol, max_iters=check_positive_int(self.max_iters, "max_iters"))
        self.equilibrium_ = np.asarray(res.x_star)
        self.residual_ = res.residual
        self.n_iter_ = res.iterations
        return self

    def score(self, game, y=None) -> float:
        check_is_fitted(self, "equilibrium_")
        return -vi_residual(check_game(game), self.equilibrium_)
