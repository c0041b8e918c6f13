"""Reference Nash equilibria.

Two independent solvers: a synchronous projected-gradient iteration with full
information, and iterated best responses on a discretised action grid.  The
second one is only meant for cross-checking the first on small games.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CycleDetected, NoConvergence, SingularCost
from .game import GameSpec, QuadraticCost, cost, estimate_regularity


@dataclass(frozen=True)
class OracleResult:
    x_star: np.ndarray
    method: str
    residual: float
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "x_star": [float(v) for v in self.x_star],
            "method": self.method,
            "residual": self.residual,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OracleResult":
        return cls(np.asarray(d["x_star"], dtype=float), d["method"], float(d["residual"]), int(d.get("iterations", 0)))


def _fixed_point_residual(spec: GameSpec, x: np.ndarray, eta: float) -> float:
    f = spec.pseudo_gradient(x)
    return float(np.max(np.abs(x - spec.project(x - eta * f))))


def vi_residual(spec: GameSpec, x) -> float:
    """``max_i |x_i - T_i(x_i - F_i(x))|``; zero exactly at an equilibrium."""
    x = spec.check_domain(x)
    return _fixed_point_residual(spec, x, 1.0)


def solve_projected_gradient(
    spec: GameSpec,
    eta: float | None = None,
    tol: float = 1e-10,
    max_iters: int = 1_000_000,
    x0=None,
) -> OracleResult:
    """Iterate ``x <- T(x - eta F(x))`` until :func:`vi_residual` is below ``tol``.

    With ``eta=None`` strongly monotone quadratic games use ``mu / rho**2``,
    which contracts for any such affine map.  Other games backtrack locally: a step is
    accepted once it keeps every cost finite and ``eta`` times the local
    Lipschitz ratio of ``F`` is at most 0.9; ``eta`` then grows by half for the
    next iteration.  A fixed ``eta`` is only halved when a step makes a cost
    singular.
    """
    adaptive = eta is None
    if adaptive and isinstance(spec.costs, QuadraticCost):
        reg = estimate_regularity(spec, check=False)
        if reg.mu > 0:
            eta, adaptive = reg.mu / reg.rho ** 2, False
    if adaptive:
        eta = 1.0
    x = spec.lower.copy() if x0 is None else spec.check_domain(x0).copy()
    try:
        f = spec.pseudo_gradient(x)
    except SingularCost:
        raise NoConvergence("start point makes a cost singular") from None
    res = math.inf
    for it in range(1, max_iters + 1):
        while True:
            x_new = spec.project(x - eta * f)
            try:
                f_new = spec.pseudo_gradient(x_new)
            except SingularCost:
                f_new = None
            if f_new is not None:
                if not adaptive:
                    break
                dx = float(np.linalg.norm(x_new - x))
                if dx == 0.0 or eta * float(np.linalg.norm(f_new - f)) <= 0.9 * dx:
                    break
            eta *= 0.5
            if eta < 1e-14:
                raise NoConvergence("step size collapsed near a singular cost")
        x, f = x_new, f_new
        res = float(np.max(np.abs(x - spec.project(x - f))))
        if res <= tol:
            return OracleResult(x, "projected_gradient", res, it)
        if adaptive:
            eta *= 1.5
    raise NoConvergence(f"no convergence within {max_iters} iterations (residual {res:.3g})")


def _grid(interval, step):
    n = int(math.floor((interval.hi - interval.lo) / step + 1e-9))
    pts = interval.lo + step * np.arange(n + 1)
    if pts[-1] < interval.hi - 1e-12:
        pts = np.append(pts, interval.hi)
    return pts


def _best_response_index(spec, i, x, grid):
    """Smallest grid index minimising player ``i``'s cost, by bisection on forward differences.

    Valid because each cost is convex in the player's own action, so the
    forward differences are nondecreasing along the grid.
    """
    y = x.copy()

    def f(idx):
        y[i - 1] = grid[idx]
        return cost(spec, i, y, check=False)

    lo, hi = 0, len(grid) - 1
    # find the first idx with f(idx + 1) - f(idx) >= 0
    while lo < hi:
        mid = (lo + hi) // 2
        if f(mid + 1) - f(mid) >= 0:
            hi = mid
        else:
            lo = mid + 1
    return lo


def solve_best_response_grid(spec: GameSpec, grid_points=1e-3, max_rounds: int = 10_000) -> OracleResult:
    """Round-robin best responses on a grid with spacing ``grid_points``.

    Stops when a full round changes nothing.  A repeated state without a fixed
    point raises :class:`CycleDetected`.
    """
    grids = [_grid(a, grid_points) for a in spec.actions]
    idx = [0] * spec.n_players
    x = np.array([g[0] for g in grids])
    seen = {tuple(idx): 0}
    for rnd in range(1, max_rounds + 1):
        changed = False
        for i in spec.graph.vertices:
            b = _best_response_index(spec, i, x, grids[i - 1])
            if b != idx[i - 1]:
                idx[i - 1] = b
                x[i - 1] = grids[i - 1][b]
                changed = True
        if not changed:
            return OracleResult(x, "best_response_grid", _fixed_point_residual(spec, x, 1.0), rnd)
        key = tuple(idx)
        if key in seen:
            raise CycleDetected(rnd - seen[key], states=key)
        seen[key] = rnd
    raise NoConvergence(f"best responses did not settle within {max_rounds} rounds")


def unilateral_deviation_gap(spec: GameSpec, x_star, n_alternatives: int = 100, seed: int = 0) -> float:
    """Largest cost decrease any player gains by a sampled unilateral deviation."""
    rng = np.random.default_rng(seed)
    x_star = np.asarray(x_star, dtype=float)
    worst = -math.inf
    for i in spec.graph.vertices:
        a = spec.actions[i - 1]
        base = cost(spec, i, x_star, check=False)
        for v in a.lo + (a.hi - a.lo) * rng.random(n_alternatives):
            y = x_star.copy()
            y[i - 1] = v
            try:
                worst = max(worst, base - cost(spec, i, y, check=False))
            except SingularCost:
                continue
    return worst


def game_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def cached_solve(spec: GameSpec, cache_dir, config: dict | None = None, **kwargs) -> OracleResult:
    """Projected-gradient oracle with an on-disk cache keyed by the game's content hash."""
    cfg = spec.to_dict() if config is None else config
    key = game_hash({"game": cfg, "solver": {k: kwargs[k] for k in sorted(kwargs)}})
    path = Path(cache_dir) / f"oracle-{key[:16]}.json"
    if path.exists():
        return OracleResult.from_dict(json.loads(path.read_text()))
    result = solve_projected_gradient(spec, **kwargs)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"key": key, **result.to_dict()}, indent=2))
    return result
