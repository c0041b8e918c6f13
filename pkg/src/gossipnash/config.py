"""Run configuration.

Configurations are JSON documents validated against the models below before
anything is computed.  Unknown keys are errors.  ``RunConfig.normalized()``
gives the canonical form used for hashing and round trips.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .engine import StepSizePolicy
from .exceptions import ConfigError
from .game import ActionInterval, GameSpec, QuadraticCost, WanetCost
from .graphs import PlayerGraph, maximal_triangle_free_spanning_subgraph
from .wanet import N_LINKS, PATHS, derive_interference_from_paths


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QuadraticGameConfig(_Strict):
    type: Literal["quadratic"]
    matrix: List[List[float]]
    vector: Optional[List[float]] = None


class WanetGameConfig(_Strict):
    type: Literal["wanet"]
    paths: List[List[int]] = Field(default_factory=lambda: [list(p) for p in PATHS])
    capacities: List[float] = Field(default_factory=lambda: [10.0] * N_LINKS)
    kappa: float = 2.0
    chi: Union[float, List[float]] = 10.0


GameConfig = Annotated[Union[QuadraticGameConfig, WanetGameConfig], Field(discriminator="type")]


class StepSizeConfig(_Strict):
    kind: Literal["diminishing", "constant"] = "diminishing"
    alpha: Optional[Union[float, List[float]]] = None


class InitConfig(_Strict):
    rule: Literal["midpoint", "uniform", "lower", "explicit"] = "midpoint"
    values: Optional[List[float]] = None


class OracleConfig(_Strict):
    enabled: bool = True
    eta: Optional[float] = None
    tol: float = 1e-10
    max_iters: int = 1_000_000
    cache_dir: Optional[str] = None


class OutputConfig(_Strict):
    dir: str = "out"


class RunConfig(_Strict):
    n_players: Optional[int] = None
    interference_edges: Optional[List[Tuple[int, int]]] = None
    communication_edges: Optional[List[Tuple[int, int]]] = None
    auto_gm: bool = True
    actions: Union[Tuple[float, float], List[Tuple[float, float]]] = (0.0, 10.0)
    game: Optional[GameConfig] = None
    step_size: StepSizeConfig = Field(default_factory=StepSizeConfig)
    init: InitConfig = Field(default_factory=InitConfig)
    seeds: List[int] = Field(default_factory=lambda: [0])
    n_iters: int = Field(10_000, ge=0)
    stride: int = Field(10, ge=1)
    algorithm: Literal["graphical", "full"] = "graphical"
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _fill_graph(self):
        if self.interference_edges is None:
            if not isinstance(self.game, WanetGameConfig):
                raise ValueError("interference_edges is required unless the game is wanet")
            g = derive_interference_from_paths(self.game.paths)
            self.interference_edges = [tuple(e) for e in g.sorted_edges()]
            if self.n_players is None:
                self.n_players = g.n_players
        if self.n_players is None:
            if isinstance(self.game, WanetGameConfig):
                self.n_players = len(self.game.paths)
            elif isinstance(self.game, QuadraticGameConfig):
                self.n_players = len(self.game.matrix)
            else:
                raise ValueError("n_players is required when no game is given")
        self.interference_edges = sorted(tuple(sorted(e)) for e in self.interference_edges)
        if self.communication_edges is not None:
            self.communication_edges = sorted(tuple(sorted(e)) for e in self.communication_edges)
            self.auto_gm = False
        elif not self.auto_gm:
            raise ValueError("communication_edges required when auto_gm is false")
        if self.step_size.kind == "constant" and self.step_size.alpha is None:
            raise ValueError("constant step size needs alpha")
        if self.init.rule == "explicit" and self.init.values is None:
            raise ValueError("explicit init needs values")
        if not self.seeds:
            raise ValueError("at least one seed required")
        return self

    def normalized(self) -> dict:
        return self.model_dump(mode="json")

    def interference_graph(self) -> PlayerGraph:
        return PlayerGraph.from_edges(self.n_players, self.interference_edges)

    def communication_graph(self) -> PlayerGraph:
        if self.communication_edges is not None:
            return PlayerGraph.from_edges(self.n_players, self.communication_edges)
        return maximal_triangle_free_spanning_subgraph(self.interference_graph())

    def action_intervals(self) -> list[ActionInterval]:
        acts = self.actions
        if isinstance(acts, tuple) and len(acts) == 2 and not isinstance(acts[0], (tuple, list)):
            return [ActionInterval(*acts)] * self.n_players
        if len(acts) != self.n_players:
            raise ConfigError(f"{len(acts)} action intervals for {self.n_players} players")
        return [ActionInterval(*a) for a in acts]

    def build_game(self) -> GameSpec:
        g = self.game
        if g is None:
            raise ConfigError("this command needs a game section")
        if isinstance(g, QuadraticGameConfig):
            costs = QuadraticCost(g.matrix, g.vector)
        else:
            costs = WanetCost(g.paths, g.capacities, g.kappa, g.chi)
        return GameSpec(self.interference_graph(), self.action_intervals(), costs)

    def policy(self) -> StepSizePolicy:
        if self.step_size.kind == "constant":
            return StepSizePolicy.constant(self.step_size.alpha)
        return StepSizePolicy.diminishing()

    def init_rule(self):
        return self.init.values if self.init.rule == "explicit" else self.init.rule


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(data)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.normalized(), indent=2, sort_keys=True)
