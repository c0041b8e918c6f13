"""Convergence-rate toolkit.

Spectral quantities of the expected exchange matrix, the step-size condition
for constant steps, the analytic lower bound on the averaging time, its
Monte Carlo counterpart, and the per-iteration timing model comparing the
interference-aware protocol with the fully coupled one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .exceptions import NotReached, TargetNotReached, ValidationError
from .graphs import PlayerGraph, degree_profile, validate_communication
from .indexing import (
    IndexMap,
    check_distribution,
    expected_comm_matrix,
    expected_kron_qtq,
    expected_qtq,
    pair_distribution,
)


def sorted_spectrum(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetric part, largest first."""
    sym = 0.5 * (matrix + matrix.T)
    return np.linalg.eigvalsh(sym)[::-1]


def second_eigenvalue(w_bar: np.ndarray, n_players: int) -> float:
    """Largest eigenvalue outside the N-dimensional consensus eigenspace.

    When every action's estimates can mix, the eigenvalue 1 has multiplicity
    exactly ``n_players``; a larger multiplicity shows up here as 1.
    """
    return float(sorted_spectrum(w_bar)[n_players])


@dataclass(frozen=True)
class GammaReport:
    gamma: float
    gamma_qtq: float
    gamma_kron: float
    lambda_max: float
    spectrum: np.ndarray = field(repr=False)

    @property
    def agreement(self) -> float:
        return abs(self.gamma - self.gamma_qtq)


def gamma_report(g_i: PlayerGraph, g_c: PlayerGraph, pair_probs: Mapping | None = None) -> GammaReport:
    """Second eigenvalue of the expected exchange matrix, cross-checked two ways.

    ``gamma_qtq`` is ``lambda_max(E[Q^T Q])`` for the graphical ``Q``;
    ``gamma_kron`` is the same quantity for the fully coupled Kronecker form.
    """
    validate_communication(g_i, g_c)
    imap = IndexMap(g_i)
    probs = pair_distribution(g_c) if pair_probs is None else pair_probs
    w_bar = expected_comm_matrix(imap, g_c, probs)
    spectrum = sorted_spectrum(w_bar)
    gamma = float(spectrum[g_i.n_players])
    gamma_qtq = float(sorted_spectrum(expected_qtq(imap, g_c, probs))[0])
    gamma_kron = float(sorted_spectrum(expected_kron_qtq(g_c, probs))[0])
    return GammaReport(gamma, gamma_qtq, gamma_kron, float(spectrum[0]), spectrum)


def gamma_of(g_i: PlayerGraph, g_c: PlayerGraph, pair_probs: Mapping | None = None) -> float:
    return gamma_report(g_i, g_c, pair_probs).gamma


def update_probabilities(g_c: PlayerGraph, pair_probs: Mapping | None = None) -> np.ndarray:
    """``p_i``: probability that player ``i`` takes part in an event (sums to 2)."""
    probs = pair_distribution(g_c) if pair_probs is None else pair_probs
    check_distribution(probs, g_c)
    p = np.zeros(g_c.n_players)
    for (i, j), q in probs.items():
        p[i - 1] += q
        p[j - 1] += q
    return p


@dataclass(frozen=True)
class RateInputs:
    gamma: float
    mu: float
    rho: float
    p_max: float
    p_min: float
    alpha_max: float
    alpha_min: float
    L: float = 0.0
    C: float = 0.0
    d_star: float = 0.0
    x_min0: float = 1.0


class PhiValue(NamedTuple):
    value: float
    valid: bool


def phi(inputs: RateInputs) -> PhiValue:
    """Contraction factor of the constant-step analysis; usable only in (0, 1)."""
    a_max, a_min = inputs.alpha_max, inputs.alpha_min
    value = (
        1.0
        + (1.0 + inputs.rho ** 2 + 2.0 * a_max) * inputs.p_max * a_max
        - (1.0 + inputs.rho ** 2 + 2.0 * inputs.mu) * inputs.p_min * a_min
    )
    return PhiValue(value, 0.0 < value < 1.0)


def nav_lower_bound(gamma: float, a: float, b: float, eps: float) -> float | None:
    """``log(a / (eps^3 - b)) / log(1 / sqrt(gamma))``, or ``None`` when undefined."""
    if not 0.0 <= gamma < 1.0:
        raise ValidationError("gamma must lie in [0, 1)")
    denom = eps ** 3 - b
    if denom <= 0.0 or a <= 0.0:
        return None
    if gamma == 0.0:
        return 0.0
    return math.log(a / denom) / math.log(1.0 / math.sqrt(gamma))


@dataclass(frozen=True)
class BoundConstants:
    C3: float
    C4: float
    a: float
    b: float


def bound_constants(inputs: RateInputs, C1: float, C2: float, n_players: int, x_max: float) -> BoundConstants:
    """Constants of the averaging-time bound from caller-supplied ``C1`` and ``C2``."""
    ph = phi(inputs)
    if not ph.valid:
        raise ValidationError(f"step sizes violate 0 < phi < 1 (phi = {ph.value:.6g})")
    p_max, a_max, L = inputs.p_max, inputs.alpha_max, inputs.L
    c3 = max(
        n_players * x_max ** 2,
        4 * n_players * inputs.C ** 2 * p_max * a_max ** 2 + 2 * L ** 2 * p_max * C2,
    ) / (1.0 - ph.value)
    c4 = 2 * L ** 2 * p_max * C1 / (1.0 - ph.value)
    x2 = inputs.x_min0 ** 2
    return BoundConstants(c3, c4, c4 / x2, (c3 - inputs.d_star ** 2) / x2)


@dataclass
class NavResult:
    k: int | None
    d_star: float
    reached: bool
    fractions: np.ndarray = field(repr=False, default=None)


def _error_paths(spec, g_c, policy, seeds, horizon, x_star, init_rule, algorithm):
    from .engine import run

    paths, x0_norms = [], []
    for seed in seeds:
        tr = run(spec, g_c, policy, seed=seed, n_iters=horizon, x_star=None, init_rule=init_rule, stride=1, algorithm=algorithm)
        xs = tr.actions
        paths.append(np.linalg.norm(xs - x_star, axis=1))
        x0_norms.append(float(np.linalg.norm(xs[0])))
    return np.array(paths), np.array(x0_norms)


def empirical_nav(
    spec,
    g_c: PlayerGraph,
    policy,
    eps: float,
    n_seeds: int = 50,
    horizon: int = 20_000,
    x_star=None,
    init_rule="uniform",
    algorithm: str = "graphical",
    pilot_horizon: int | None = None,
    pilot_seed: int = 2**31 - 1,
    seeds: Sequence[int] | None = None,
    raise_on_miss: bool = True,
) -> NavResult:
    """Monte Carlo averaging time.

    The offset ``d*`` is the smallest distance to ``x*`` seen in a pilot run.
    The result is the first event count at which at most a fraction ``eps`` of
    the seeded runs have ``(||x(k) - x*|| - d*) / ||x(0)|| >= eps``.
    """
    if policy.kind != "constant":
        raise ValidationError("averaging time is defined for constant step sizes")
    if x_star is None:
        from .oracle import solve_projected_gradient

        x_star = solve_projected_gradient(spec).x_star
    x_star = np.asarray(x_star, dtype=float)
    seeds = list(range(n_seeds)) if seeds is None else list(seeds)
    pilot, _ = _error_paths(spec, g_c, policy, [pilot_seed], pilot_horizon or 4 * horizon, x_star, init_rule, algorithm)
    d_star = float(pilot.min())
    errs, x0 = _error_paths(spec, g_c, policy, seeds, horizon, x_star, init_rule, algorithm)
    if np.any(x0 == 0.0):
        raise ValidationError("averaging time needs nonzero initial actions")
    scaled = (errs - d_star) / x0[:, None]
    fractions = np.mean(scaled >= eps, axis=0)
    hits = np.nonzero(fractions <= eps)[0]
    if hits.size == 0:
        if raise_on_miss:
            raise NotReached(f"averaging criterion not met within {horizon} events", horizon)
        return NavResult(None, d_star, False, fractions)
    return NavResult(int(hits[0]), d_star, True, fractions)


class TimingModel(NamedTuple):
    t_av1: float
    t_av2: float


def timing_model(
    g_i: PlayerGraph,
    g_c: PlayerGraph,
    pair_probs: Mapping | None = None,
    r: float = 1.0,
    s: float = 1.0,
) -> TimingModel:
    """Mean duration of one event for both protocols.

    ``r`` is the time to send one estimate and ``s`` the time to evaluate a
    full gradient.  ``pair_probs`` maps ordered events ``(i, j)`` to their
    probability (default: uniform wake-up, uniform neighbour).
    """
    if r <= 0 or s <= 0:
        raise ValidationError("r and s must be positive")
    probs = pair_distribution(g_c) if pair_probs is None else pair_probs
    check_distribution(probs, g_c)
    N = g_i.n_players
    m = degree_profile(g_i)
    t1 = 0.0
    for (i, j), p in probs.items():
        shared = len(set(g_i.neighbors(i)) & set(g_i.neighbors(j)))
        t1 += p * (shared * r + m[i] / N * s)
    t2 = (N - 1) * r + s
    if t1 > t2 + 1e-12:
        raise ValidationError(f"timing model violated: T1 = {t1} > T2 = {t2}")
    return TimingModel(t1, t2)


@dataclass(frozen=True)
class SpeedupReport:
    target_pct: float
    events_graphical: int
    events_full: int
    iteration_ratio: float
    time_ratio: float

    @property
    def speedup(self) -> float:
        return self.iteration_ratio * self.time_ratio

    def to_dict(self) -> dict:
        return {
            "target_pct": self.target_pct,
            "events_graphical": self.events_graphical,
            "events_full": self.events_full,
            "iteration_ratio": self.iteration_ratio,
            "time_ratio": self.time_ratio,
            "speedup": self.speedup,
        }


def speedup_report(trace_graphical, trace_full, timing: TimingModel, target_pct: float = 5.0) -> SpeedupReport:
    """Composite speedup: (events ratio) x (per-event time ratio)."""
    k1 = trace_graphical.events_to_target(target_pct)
    k2 = trace_full.events_to_target(target_pct)
    if k1 is None or k2 is None:
        raise TargetNotReached(f"error target {target_pct}% not reached (graphical={k1}, full={k2})")
    ratio = k2 / k1 if k1 > 0 else (1.0 if k2 == 0 else math.inf)
    return SpeedupReport(target_pct, k1, k2, ratio, timing.t_av2 / timing.t_av1)
