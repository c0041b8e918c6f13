"""Command-line entry point.

Every subcommand writes its artifacts into ``--out`` and prints the report to
stdout.  Failures print a one-line JSON error record to stderr and exit with
2 (configuration), 3 (validation) or 4 (runtime).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_config
from .engine import StepSizePolicy, run
from .exceptions import ConfigError, GossipNashError, ValidationError
from .game import estimate_regularity
from .graphs import (
    maximal_triangle_free_spanning_subgraph,
    uncovered_edges,
    validate_communication,
    validate_interference,
)
from .oracle import cached_solve, solve_projected_gradient, unilateral_deviation_gap
from .spectral import (
    RateInputs,
    SpeedupReport,
    gamma_report,
    phi,
    timing_model,
    update_probabilities,
)
from .wanet import WanetBenchmark

EXIT_CODES = {"ConfigError": 2, "ValidationError": 3, "RuntimeError": 4}

BENCH_TARGET_PCT = 5.0
BENCH_SEEDS = tuple(range(21))
BENCH_HORIZON = 1_000_000


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in v)
    return str(v)


def write_report(path: Path, items: list[tuple[str, object]]) -> str:
    text = "".join(f"{k}: {_fmt(v)}\n" for k, v in items)
    path.write_text(text, encoding="utf-8")
    return text


def _out_dir(args, cfg: RunConfig | None) -> Path:
    out = Path(args.out or (cfg.output.dir if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    overrides = {}
    if args.iters is not None:
        overrides["n_iters"] = args.iters
    if args.stride is not None:
        overrides["stride"] = args.stride
    if args.algorithm is not None:
        overrides["algorithm"] = args.algorithm
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if overrides:
        cfg = parse_config({**cfg.normalized(), **overrides})
    return cfg


def _oracle(cfg: RunConfig, spec):
    o = cfg.oracle
    kwargs = {"tol": o.tol, "max_iters": o.max_iters}
    if o.eta is not None:
        kwargs["eta"] = o.eta
    if o.cache_dir:
        return cached_solve(spec, o.cache_dir, config=cfg.normalized()["game"], **kwargs)
    return solve_projected_gradient(spec, **kwargs)


def cmd_run(args) -> list[tuple[str, object]]:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    spec = cfg.build_game()
    g_c = cfg.communication_graph()
    x_star = _oracle(cfg, spec).x_star if cfg.oracle.enabled else None
    items: list[tuple[str, object]] = [
        ("command", "run"),
        ("algorithm", cfg.algorithm),
        ("n_players", cfg.n_players),
        ("n_iters", cfg.n_iters),
        ("stride", cfg.stride),
    ]
    if x_star is not None:
        items.append(("x_star", list(x_star)))
    single = len(cfg.seeds) == 1
    for seed in sorted(cfg.seeds):
        trace = run(
            spec, g_c, cfg.policy(), seed=seed, n_iters=cfg.n_iters, x_star=x_star,
            init_rule=cfg.init_rule(), stride=cfg.stride, algorithm=cfg.algorithm,
        )
        name = "trace.csv" if single else f"trace_seed{seed}.csv"
        trace.to_csv(out / name)
        items += [
            (f"seed_{seed}.trace", name),
            (f"seed_{seed}.final_x", list(trace.final_x)),
            (f"seed_{seed}.res_consensus", float(trace.res_consensus[-1])),
            (f"seed_{seed}.normalized_error_pct", float(trace.res_ne[-1])),
        ]
    write_report(out / "report.txt", items)
    return items


def cmd_analyze(args) -> list[tuple[str, object]]:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    g_i, g_c = cfg.interference_graph(), cfg.communication_graph()
    rep = gamma_report(g_i, g_c)
    tm = timing_model(g_i, g_c)
    p = update_probabilities(g_c)
    items: list[tuple[str, object]] = [
        ("command", "analyze"),
        ("n_players", cfg.n_players),
        ("gamma", rep.gamma),
        ("gamma_qtq", rep.gamma_qtq),
        ("gamma_kron", rep.gamma_kron),
        ("lambda_max", rep.lambda_max),
        ("t_av1", tm.t_av1),
        ("t_av2", tm.t_av2),
        ("p_max", float(p.max())),
        ("p_min", float(p.min())),
    ]
    if cfg.game is not None:
        spec = cfg.build_game()
        reg = estimate_regularity(spec, check=False)
        items += [("mu", reg.mu), ("rho", reg.rho), ("L", reg.L), ("C", reg.C), ("regularity_exact", reg.exact)]
        policy = cfg.policy()
        if policy.kind == "constant":
            alphas = policy.alphas(cfg.n_players)
            ph = phi(RateInputs(rep.gamma, reg.mu, reg.rho, float(p.max()), float(p.min()), float(alphas.max()), float(alphas.min())))
            items += [("phi", ph.value), ("phi_valid", ph.valid)]
    with open(out / "spectra.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["matrix", "index", "eigenvalue"])
        for idx, ev in enumerate(rep.spectrum, start=1):
            w.writerow(["w_bar", idx, repr(float(ev))])
    write_report(out / "report.txt", items)
    return items


def cmd_oracle(args) -> list[tuple[str, object]]:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    spec = cfg.build_game()
    res = _oracle(cfg, spec)
    (out / "oracle.json").write_text(json.dumps(res.to_dict(), indent=2), encoding="utf-8")
    items = [
        ("command", "oracle"),
        ("method", res.method),
        ("iterations", res.iterations),
        ("residual", res.residual),
        ("x_star", list(res.x_star)),
        ("deviation_gap", unilateral_deviation_gap(spec, res.x_star)),
    ]
    write_report(out / "report.txt", items)
    return items


def cmd_graph(args) -> list[tuple[str, object]]:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    g_i = validate_interference(cfg.interference_graph())
    g_m = maximal_triangle_free_spanning_subgraph(g_i)
    g_c = cfg.communication_graph()
    items: list[tuple[str, object]] = [
        ("command", "graph"),
        ("n_players", g_i.n_players),
        ("interference_edges", len(g_i.edges)),
        ("g_m_edges", len(g_m.edges)),
        ("g_m", " ".join(f"{i}-{j}" for i, j in g_m.sorted_edges())),
        ("communication_edges", len(g_c.edges)),
    ]
    try:
        validate_communication(g_i, g_c)
        items.append(("validation", "PASS"))
    except ValidationError as exc:
        items += [("validation", "FAIL"), ("reason", f"{type(exc).__name__}: {exc}")]
    missing = uncovered_edges(g_i, g_c)
    items.append(("uncovered_edges", " ".join(f"{i}-{j}" for i, j in missing) or "none"))
    write_report(out / "report.txt", items)
    return items


def _median_events(events: list[int | None]) -> float | None:
    if any(e is None for e in events):
        return None
    return float(np.median(events))


def cmd_bench(args) -> list[tuple[str, object]]:
    if args.name != "wanet":
        raise ConfigError(f"unknown benchmark {args.name!r}")
    if args.config:
        cfg = load_config(args.config)
        g = cfg.game
        if g is None or g.type != "wanet":
            raise ConfigError("bench wanet needs a wanet game config")
        bench = WanetBenchmark(g.paths, g.capacities, g.kappa, g.chi)
        seeds = cfg.seeds if args.seed is None else [args.seed]
    else:
        cfg = None
        bench = WanetBenchmark()
        seeds = [args.seed] if args.seed is not None else list(BENCH_SEEDS)
    out = _out_dir(args, cfg)
    n_iters = 6000 if args.iters is None else args.iters
    stride = args.stride or 10
    spec = bench.game()
    g_i, g_c = bench.interference_graph(), bench.communication_graph()
    g_dense = bench.communication_graph(n_extra=len(g_i.edges - g_c.edges))
    x_star = solve_projected_gradient(spec).x_star
    tm = timing_model(g_i, g_c)
    rep = gamma_report(g_i, g_c)
    rep_dense = gamma_report(g_i, g_dense)
    items: list[tuple[str, object]] = [
        ("command", "bench wanet"),
        ("n_users", bench.n_users),
        ("kappa", bench.kappa),
        ("n_iters", n_iters),
        ("seeds", list(seeds)),
        ("init", "lower"),
        ("x_star", list(x_star)),
        ("interference_edges", len(g_i.edges)),
        ("communication_edges", len(g_c.edges)),
        ("gamma", rep.gamma),
        ("gamma_kron", rep.gamma_kron),
        ("densified_communication_edges", len(g_dense.edges)),
        ("densified_gamma", rep_dense.gamma),
        ("t_av1", tm.t_av1),
        ("t_av2", tm.t_av2),
    ]
    events = {}
    for algo in ("graphical", "full"):
        finals, hits = [], []
        for seed in sorted(seeds):
            tr = run(spec, g_c, StepSizePolicy.diminishing(), seed=seed, n_iters=n_iters, x_star=x_star,
                     init_rule="lower", stride=stride, algorithm=algo)
            if seed == min(seeds):
                tr.to_csv(out / f"trace_{algo}.csv")
            finals.append(float(tr.res_ne[-1]))
            hit = tr.events_to_target(BENCH_TARGET_PCT)
            if hit is None and n_iters < BENCH_HORIZON:
                # same seed, so this run extends the one above
                hit = run(spec, g_c, StepSizePolicy.diminishing(), seed=seed, n_iters=BENCH_HORIZON, x_star=x_star,
                          init_rule="lower", stride=stride, algorithm=algo, stop_at=BENCH_TARGET_PCT).events_to_target(BENCH_TARGET_PCT)
            hits.append(hit)
        events[algo] = _median_events(hits)
        items += [
            (f"{algo}.normalized_error_pct", finals),
            (f"{algo}.median_normalized_error_pct", float(np.median(finals))),
            (f"{algo}.events_to_{BENCH_TARGET_PCT:g}pct", " ".join("none" if h is None else str(h) for h in hits)),
            (f"{algo}.median_events_to_{BENCH_TARGET_PCT:g}pct", "none" if events[algo] is None else events[algo]),
        ]
    kg, kf = events["graphical"], events["full"]
    if kg is None or kf is None or kg == 0:
        items.append(("speedup", "unavailable (target not reached by every seed)"))
    else:
        sp = SpeedupReport(BENCH_TARGET_PCT, int(kg), int(kf), kf / kg, tm.t_av2 / tm.t_av1)
        items += [("iteration_ratio", sp.iteration_ratio), ("time_ratio", sp.time_ratio), ("speedup", sp.speedup)]
    write_report(out / "report.txt", items)
    return items


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gossipnash", description="Gossip-based Nash equilibrium seeking on graphical games.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seeds with a single seed")
    common.add_argument("--iters", type=int, help="number of gossip events")
    common.add_argument("--out", help="output directory")
    common.add_argument("--stride", type=int, help="record every N-th event")
    common.add_argument("--algorithm", choices=["graphical", "full"])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate and write trace.csv").set_defaults(func=cmd_run)
    sub.add_parser("analyze", parents=[common], help="spectral and timing analysis").set_defaults(func=cmd_analyze)
    sub.add_parser("oracle", parents=[common], help="compute the reference equilibrium").set_defaults(func=cmd_oracle)
    sub.add_parser("graph", parents=[common], help="triangle-free subgraph and validation").set_defaults(func=cmd_graph)
    b = sub.add_parser("bench", parents=[common], help="built-in benchmarks")
    b.add_argument("name", choices=["wanet"])
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        items = args.func(args)
    except GossipNashError as exc:
        record = {"category": exc.category, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return EXIT_CODES.get(exc.category, 4)
    except (OSError, ArithmeticError, ValueError) as exc:
        record = {"category": "RuntimeError", "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 4
    sys.stdout.write("".join(f"{k}: {_fmt(v)}\n" for k, v in items))
    return 0


if __name__ == "__main__":
    sys.exit(main())
