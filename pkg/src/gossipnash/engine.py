"""Asynchronous gossip simulation of Nash-equilibrium seeking.

One event ``k`` wakes a uniformly random player ``i_k`` that contacts a
uniformly random communication neighbour ``j_k``.  The two average the
estimates they both hold, then each takes a projected-gradient step on its
own action using its freshly averaged neighbour estimates.  Every other
player is left untouched.

The ``"full"`` algorithm runs the same protocol with every player keeping an
estimate of every other player, as if the interference graph were complete.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import InfeasibleInit, NotCommNeighbors, ValidationError
from .game import GameSpec
from .graphs import PlayerGraph, validate_communication
from .indexing import IndexMap, consensus_residual, slot_averages

SCHEDULE_CHUNK = 4096


@dataclass(frozen=True)
class StepSizePolicy:
    """Per-player step sizes.

    ``diminishing`` uses ``1 / nu`` where ``nu`` counts the player's updates
    including the current one, so the first step has size 1.  ``constant``
    uses a fixed ``alpha`` per player (scalar or one value per player).
    """

    kind: str = "diminishing"
    alpha: tuple = ()

    def __post_init__(self):
        if self.kind not in ("diminishing", "constant"):
            raise ValidationError(f"unknown step-size kind {self.kind!r}")
        if self.kind == "constant":
            alpha = self.alpha
            alpha = (float(alpha),) if np.ndim(alpha) == 0 else tuple(float(a) for a in alpha)
            if not alpha or any(a <= 0 for a in alpha):
                raise ValidationError("constant step sizes must be positive")
            object.__setattr__(self, "alpha", alpha)

    @classmethod
    def diminishing(cls) -> "StepSizePolicy":
        return cls("diminishing")

    @classmethod
    def constant(cls, alpha) -> "StepSizePolicy":
        return cls("constant", alpha)

    def alphas(self, n_players: int) -> np.ndarray:
        if self.kind != "constant":
            raise ValueError("diminishing policy has no fixed step sizes")
        if len(self.alpha) == 1:
            return np.full(n_players, self.alpha[0])
        if len(self.alpha) != n_players:
            raise ValidationError(f"{len(self.alpha)} step sizes for {n_players} players")
        return np.asarray(self.alpha)

    def step(self, i: int, nu_i: int) -> float:
        if self.kind == "diminishing":
            return 1.0 / nu_i
        return self.alpha[0] if len(self.alpha) == 1 else self.alpha[i - 1]


class PairScheduler:
    """Seeded source of gossip events, drawn in fixed-size chunks."""

    def __init__(self, g_c: PlayerGraph, rng: np.random.Generator, chunk: int = SCHEDULE_CHUNK):
        self.N = g_c.n_players
        self.nbrs = [None] + [g_c.neighbors(i) for i in g_c.vertices]
        self.deg = [0] + [len(n) for n in self.nbrs[1:]]
        if min(self.deg[1:], default=0) == 0:
            raise ValidationError("every player needs a communication neighbour")
        self.rng = rng
        self.chunk = chunk
        self._i: list = []
        self._u: list = []
        self._pos = 0

    def _refill(self):
        self._i = (self.rng.integers(0, self.N, size=self.chunk) + 1).tolist()
        self._u = self.rng.random(self.chunk).tolist()
        self._pos = 0

    def next_pair(self) -> tuple[int, int]:
        if self._pos >= len(self._i):
            self._refill()
        i = self._i[self._pos]
        d = self.deg[i]
        j = self.nbrs[i][min(int(self._u[self._pos] * d), d - 1)]
        self._pos += 1
        return i, j


@dataclass
class EngineState:
    spec: GameSpec
    g_c: PlayerGraph
    index_map: IndexMap
    policy: StepSizePolicy
    x_tilde: np.ndarray
    nu: np.ndarray
    scheduler: PairScheduler
    algorithm: str = "graphical"
    k: int = 0
    last_pair: tuple = (0, 0)
    _pair_cache: dict = field(default_factory=dict, repr=False)
    _game_slots: list = field(default_factory=list, repr=False)

    @property
    def x(self) -> np.ndarray:
        return self.x_tilde[self.index_map.own_slots].copy()

    def pair_slots(self, i: int, j: int):
        key = (i, j)
        cached = self._pair_cache.get(key)
        if cached is None:
            cached = self.index_map.pair_slots(i, j)
            self._pair_cache[key] = cached
        return cached


def _index_map_for(spec: GameSpec, algorithm: str) -> IndexMap:
    if algorithm == "graphical":
        return IndexMap(spec.graph)
    if algorithm == "full":
        return IndexMap(PlayerGraph.complete(spec.n_players))
    raise ValidationError(f"unknown algorithm {algorithm!r}")


def _initial_slots(spec, imap, init_rule, rng):
    lo = spec.lower[imap.column]
    hi = spec.upper[imap.column]
    if isinstance(init_rule, str):
        if init_rule == "midpoint":
            return 0.5 * (lo + hi)
        if init_rule == "uniform":
            return lo + (hi - lo) * rng.random(imap.m)
        if init_rule == "lower":
            return lo.copy()
        raise ValidationError(f"unknown init rule {init_rule!r}")
    values = np.asarray(init_rule, dtype=float).reshape(-1)
    if values.shape[0] == spec.n_players:
        xt = values[imap.column]
    elif values.shape[0] == imap.m:
        xt = values.copy()
    else:
        raise InfeasibleInit(f"explicit init needs {spec.n_players} or {imap.m} values, got {values.shape[0]}")
    if np.any(xt < lo - 1e-12) or np.any(xt > hi + 1e-12):
        raise InfeasibleInit("explicit initial estimates outside the action sets")
    return xt


def init(
    spec: GameSpec,
    g_c: PlayerGraph,
    init_rule="midpoint",
    seed: int = 0,
    policy: StepSizePolicy | None = None,
    algorithm: str = "graphical",
    min_action: float | None = None,
) -> EngineState:
    """Build the initial engine state.

    ``init_rule`` is ``"midpoint"``, ``"uniform"``, ``"lower"`` or an explicit
    array of either ``N`` actions (copied into every estimate of that action)
    or ``m`` slot values.  ``min_action`` enforces ``|x_i(0)| >= min_action > 0``
    for constant-step rate analyses.
    """
    if algorithm == "graphical":
        validate_communication(spec.graph, g_c)
    elif not g_c.is_connected() or g_c.edges - spec.graph.edges:
        raise ValidationError("communication graph must be a connected subgraph of the interference graph")
    imap = _index_map_for(spec, algorithm)
    init_rng, sched_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    xt = _initial_slots(spec, imap, init_rule, init_rng)
    if min_action is not None:
        if min_action <= 0 or np.any(np.abs(xt[imap.own_slots]) < min_action):
            raise InfeasibleInit(f"initial actions must satisfy |x_i(0)| >= {min_action} > 0")
    state = EngineState(
        spec=spec,
        g_c=g_c,
        index_map=imap,
        policy=policy or StepSizePolicy.diminishing(),
        x_tilde=xt,
        nu=np.zeros(spec.n_players + 1, dtype=np.int64),
        scheduler=PairScheduler(g_c, sched_rng),
        algorithm=algorithm,
    )
    state._game_slots = [None] + [
        np.array([imap.slot[(i, j)] - 1 for j in spec.graph.neighbors(i)], dtype=int)
        for i in spec.graph.vertices
    ]
    return state


def select_pair(state: EngineState) -> tuple[int, int]:
    return state.scheduler.next_pair()


def gossip_exchange(state: EngineState, i_k: int, j_k: int) -> np.ndarray:
    """Averaged estimates after ``i_k`` and ``j_k`` swap their estimate vectors.

    Returns a new stacked vector; the state is not modified.
    """
    if not state.g_c.has_edge(i_k, j_k):
        raise NotCommNeighbors(f"players {i_k} and {j_k} are not communication neighbours")
    a, b = state.pair_slots(i_k, j_k)
    x_hat = state.x_tilde.copy()
    v = 0.5 * (x_hat[a] + x_hat[b])
    x_hat[a] = v
    x_hat[b] = v
    return x_hat


def _projected_step(state, i, xi, estimates):
    state.nu[i] += 1
    alpha = state.policy.step(i, int(state.nu[i]))
    g = state.spec.safe_grad(i, xi, estimates)
    return state.spec.actions[i - 1].project(xi - alpha * g)


def local_step(state: EngineState, x_hat: np.ndarray, pair: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Projected-gradient update of the two active players; advances ``state``.

    Returns ``(x(k+1), x_tilde(k+1))``.
    """
    i_k, j_k = pair
    own = state.index_map.own_slots
    new = {}
    for p in (i_k, j_k):
        xi = float(state.x_tilde[own[p - 1]])
        new[p] = _projected_step(state, p, xi, x_hat[state._game_slots[p]])
    x_next = np.array(x_hat, dtype=float, copy=True)
    for p, v in new.items():
        x_next[own[p - 1]] = v
    state.x_tilde = x_next
    state.k += 1
    state.last_pair = (i_k, j_k)
    return state.x, state.x_tilde


def advance(state: EngineState) -> tuple[int, int]:
    """One full event, in place.  Equivalent to select/exchange/local step."""
    i, j = state.scheduler.next_pair()
    xt = state.x_tilde
    own = state.index_map.own_slots
    xi_old = float(xt[own[i - 1]])
    xj_old = float(xt[own[j - 1]])
    a, b = state.pair_slots(i, j)
    v = 0.5 * (xt[a] + xt[b])
    xt[a] = v
    xt[b] = v
    slots = state._game_slots
    new_i = _projected_step(state, i, xi_old, xt[slots[i]])
    new_j = _projected_step(state, j, xj_old, xt[slots[j]])
    xt[own[i - 1]] = new_i
    xt[own[j - 1]] = new_j
    state.k += 1
    state.last_pair = (i, j)
    return i, j


@dataclass
class RunTrace:
    """Recorded snapshots of a run.

    Row 0 is the initial state (``i_k = j_k = 0``).  ``res_ne`` is the
    normalised error ``100 * ||x - x*|| / ||x*||`` or NaN without an oracle.
    With diagnostics on, ``interval_consensus_sq[r]`` and
    ``interval_action_sq[r]`` hold the sums of ``||x_tilde - Z||^2`` and
    ``||x - z||^2`` over the events since row ``r - 1`` (row 0 holds the
    initial state's terms).
    """

    n_players: int
    k: list = field(default_factory=list)
    i_k: list = field(default_factory=list)
    j_k: list = field(default_factory=list)
    x: list = field(default_factory=list)
    res_consensus: list = field(default_factory=list)
    res_ne: list = field(default_factory=list)
    interval_consensus_sq: list = field(default_factory=list)
    interval_action_sq: list = field(default_factory=list)
    algorithm: str = "graphical"
    seed: int = 0
    m: int = 0

    def __len__(self):
        return len(self.k)

    @property
    def actions(self) -> np.ndarray:
        return np.array(self.x).reshape(len(self.k), self.n_players)

    @property
    def normalized_error(self) -> np.ndarray:
        return np.asarray(self.res_ne, dtype=float)

    @property
    def cum_consensus_sq(self) -> np.ndarray:
        return np.cumsum(self.interval_consensus_sq)

    @property
    def cum_action_sq(self) -> np.ndarray:
        return np.cumsum(self.interval_action_sq)

    def tail_sums(self, fraction: float = 0.1) -> tuple[float, float]:
        """Sums of both squared residuals over the final ``fraction`` of events."""
        if not self.interval_consensus_sq:
            raise ValueError("trace was recorded without diagnostics")
        start = self.k[-1] - fraction * self.k[-1]
        rows = [r for r in range(1, len(self.k)) if self.k[r - 1] >= start]
        return (
            math.fsum(self.interval_consensus_sq[r] for r in rows),
            math.fsum(self.interval_action_sq[r] for r in rows),
        )

    @property
    def final_x(self) -> np.ndarray:
        return np.asarray(self.x[-1])

    def events_to_target(self, target_pct: float) -> int | None:
        """First recorded event count with normalised error at or below ``target_pct``."""
        for k, e in zip(self.k, self.res_ne):
            if e <= target_pct:
                return k
        return None

    def header(self) -> list[str]:
        return ["k", "i_k", "j_k"] + [f"x_{i}" for i in range(1, self.n_players + 1)] + ["res_consensus", "res_ne"]

    def to_csv(self, path=None) -> str:
        """CSV of event rows (the initial snapshot is not an event and is skipped)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for r in range(len(self.k)):
            if self.k[r] == 0:
                continue
            row = [self.k[r], self.i_k[r], self.j_k[r]] + [repr(float(v)) for v in self.x[r]]
            row += [repr(float(self.res_consensus[r])), repr(float(self.res_ne[r]))]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        return text


def _record(trace, state, x_star, x_star_norm):
    x = state.x
    _, res = consensus_residual(state.index_map, state.x_tilde)
    trace.k.append(state.k)
    trace.i_k.append(state.last_pair[0])
    trace.j_k.append(state.last_pair[1])
    trace.x.append(x)
    trace.res_consensus.append(res)
    if x_star is None:
        trace.res_ne.append(math.nan)
    else:
        trace.res_ne.append(100.0 * float(np.linalg.norm(x - x_star)) / x_star_norm)


def _squared_residuals(imap, xt):
    z = slot_averages(imap, xt)
    d = xt - z[imap.column]
    dx = xt[imap.own_slots] - z
    return float(d @ d), float(dx @ dx)


def run(
    spec: GameSpec,
    g_c: PlayerGraph,
    policy: StepSizePolicy | None = None,
    seed: int = 0,
    n_iters: int = 1000,
    x_star: Sequence[float] | None = None,
    init_rule="midpoint",
    stride: int = 10,
    algorithm: str = "graphical",
    diagnostics: bool = False,
    min_action: float | None = None,
    stop_at: float | None = None,
) -> RunTrace:
    """Simulate ``n_iters`` gossip events and record every ``stride``-th state.

    With ``stop_at`` (a percentage) the run ends at the first recorded state
    whose normalised error is at or below it.
    """
    if stride < 1:
        raise ValidationError("stride must be positive")
    state = init(spec, g_c, init_rule, seed, policy, algorithm, min_action)
    return run_from_state(state, n_iters, x_star, stride, diagnostics, seed, stop_at)


def run_from_state(
    state: EngineState,
    n_iters: int,
    x_star=None,
    stride: int = 10,
    diagnostics: bool = False,
    seed: int = 0,
    stop_at: float | None = None,
) -> RunTrace:
    trace = RunTrace(state.spec.n_players, algorithm=state.algorithm, seed=seed, m=state.index_map.m)
    xs = None if x_star is None else np.asarray(x_star, dtype=float)
    xs_norm = None if xs is None else float(np.linalg.norm(xs))
    if xs is not None and xs_norm == 0.0:
        raise ValidationError("normalised error undefined for x* = 0")
    if stop_at is not None and xs is None:
        raise ValidationError("stop_at needs x_star")
    imap = state.index_map
    if diagnostics:
        c, a = _squared_residuals(imap, state.x_tilde)
        trace.interval_consensus_sq.append(c)
        trace.interval_action_sq.append(a)
    _record(trace, state, xs, xs_norm)
    acc_c, acc_a = [], []
    for step in range(1, n_iters + 1):
        advance(state)
        if diagnostics:
            c, a = _squared_residuals(imap, state.x_tilde)
            acc_c.append(c)
            acc_a.append(a)
        if step % stride == 0 or step == n_iters:
            _record(trace, state, xs, xs_norm)
            if diagnostics:
                trace.interval_consensus_sq.append(math.fsum(acc_c))
                trace.interval_action_sq.append(math.fsum(acc_a))
                acc_c, acc_a = [], []
            if stop_at is not None and trace.res_ne[-1] <= stop_at:
                break
    return trace


def run_full_coupling(spec: GameSpec, g_c: PlayerGraph, policy: StepSizePolicy | None = None, seed: int = 0, n_iters: int = 1000, **kwargs) -> RunTrace:
    """Baseline where every player tracks every other player's action."""
    return run(spec, g_c, policy, seed, n_iters, algorithm="full", **kwargs)
