"""Command-line entry point: reproducible experiment commands over the
simulator and detection library.

Subcommands: generate-graph, simulate, replay, validate, report.
Flags override config fields; exit codes: 0 ok, 1 validation, 2 runtime.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import experiments
from .config import ConfigError, ExperimentConfig, load_config
from .graph import GlpParams, clustering_coefficient, fit_power_law, generate_glp, write_edge_list

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    parser.add_argument("--out", type=str, default=None, help="override output directory")
    parser.add_argument("--workers", type=int, default=None, help="parallel replicate workers")


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.replication.base_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if getattr(args, "workers", None) is not None:
        cfg.replication.workers = args.workers
    return cfg


def cmd_generate_graph(args) -> int:
    params = GlpParams(
        target_nodes=args.nodes,
        initial_clique=args.initial_clique,
        edges_per_step=args.edges_per_step,
        p_add_edges=args.p_add_edges,
        beta=args.beta,
        seed=args.seed if args.seed is not None else 0,
    )
    try:
        params.validate()
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    g = generate_glp(params)
    out = Path(args.out or ".") / args.filename
    out.parent.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, out)
    cc = clustering_coefficient(g)
    print(f"graph: {g.node_count} nodes, {g.edge_count} edges -> {out}")
    print(f"clustering coefficient: {cc:.4f}")
    if args.fit:
        fit = fit_power_law(g)
        print(f"degree exponent: {fit.exponent_gamma:.3f} (xmin={fit.xmin}, ks={fit.ks_statistic:.4f})")
    return EXIT_OK


def _load_validated(args) -> ExperimentConfig | int:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        for problem in exc.problems:
            print(problem, file=sys.stderr)
        return EXIT_VALIDATION
    cfg = _apply_overrides(cfg, args)
    errors = cfg.validate()
    if errors:
        for e in errors:
            print(e, file=sys.stderr)
        return EXIT_VALIDATION
    return cfg


def _print_summary(summary: dict) -> None:
    print(f"experiment: {summary['kind']}")
    print(f"artifact:   {summary['artifact']}")
    for key, value in summary.items():
        if key in ("kind", "artifact", "pair_results", "result"):
            continue
        if isinstance(value, np.ndarray):
            formatted = " ".join(f"{v:.4f}" for v in value)
            print(f"{key}: {formatted}")
        elif isinstance(value, float):
            print(f"{key}: {value:.4f}")
        else:
            print(f"{key}: {value}")


def cmd_simulate(args) -> int:
    cfg = _load_validated(args)
    if isinstance(cfg, int):
        return cfg
    if cfg.kind == "replay":
        print("config kind is 'replay'; use the replay subcommand", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        summary = experiments.run_experiment(cfg)
    except Exception as exc:  # runtime failure, not validation
        logger.exception("experiment failed")
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_summary(summary)
    return EXIT_OK


def cmd_replay(args) -> int:
    if args.config:
        cfg = _load_validated(args)
        if isinstance(cfg, int):
            return cfg
    else:
        cfg = ExperimentConfig(kind="replay")
        cfg = _apply_overrides(cfg, args)
    cfg.kind = "replay"
    if args.ratings:
        cfg.replay.ratings_file = args.ratings
    if args.edges:
        cfg.replay.edges_file = args.edges
    if args.dishonest is not None:
        cfg.replay.dishonest_fraction = args.dishonest
    if args.delta is not None:
        cfg.replay.delta = args.delta
    errors = cfg.validate()
    if errors:
        for e in errors:
            print(e, file=sys.stderr)
        return EXIT_VALIDATION
    try:
        summary = experiments.run_experiment(cfg)
    except Exception as exc:
        logger.exception("replay failed")
        print(f"replay failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_summary(summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    errors = cfgmod.validate_file(args.config)
    if errors:
        for e in errors:
            print(e)
        return EXIT_VALIDATION
    print("ok")
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = Path(args.out or ".")
    csv_files = sorted(out_dir.glob("fig*_*.csv"))
    if not csv_files:
        print(f"no figure CSVs found under {out_dir}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib is required for report rendering", file=sys.stderr)
        return EXIT_RUNTIME
    import csv as csvmod

    for path in csv_files:
        with open(path) as f:
            reader = csvmod.reader(f)
            header = next(reader)
            rows = [[float(x) if x != "nan" else np.nan for x in row] for row in reader]
        if not rows:
            continue
        data = np.array(rows)
        fig, ax = plt.subplots(figsize=(7, 4.5))
        x = data[:, 0]
        if header[0] in ("round", "r"):
            for col in range(1, len(header)):
                if header[col].endswith("_se"):
                    continue
                ax.plot(x, data[:, col], marker="o", markersize=3, label=header[col])
            ax.set_xlabel(header[0])
            ax.set_ylabel("probability")
        else:
            width = 0.35
            ax.bar(x - width / 2, data[:, 1], width, label=header[1])
            if data.shape[1] > 3:
                ax.bar(x + width / 2, data[:, 3], width, label=header[3])
            ax.set_xlabel(header[0])
            ax.set_ylabel("share")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        svg_path = path.with_suffix(".svg")
        fig.savefig(svg_path, format="svg")
        plt.close(fig)
        print(f"rendered {svg_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recwatch",
        description="viral-marketing simulator and dishonest-recommender detection experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-graph", help="generate a scale-free social graph")
    g.add_argument("--nodes", type=int, default=8000)
    g.add_argument("--initial-clique", type=int, default=10)
    g.add_argument("--edges-per-step", type=int, default=7)
    g.add_argument("--p-add-edges", type=float, default=0.2)
    g.add_argument("--beta", type=float, default=-5.4)
    g.add_argument("--filename", type=str, default="graph_edges.txt")
    g.add_argument("--fit", action="store_true", help="also fit the degree exponent")
    _add_common(g)
    g.set_defaults(func=cmd_generate_graph)

    s = sub.add_parser("simulate", help="run a configured experiment")
    s.add_argument("--config", type=str, required=True)
    _add_common(s)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("replay", help="replay a ratings dataset as detection rounds")
    r.add_argument("--config", type=str, default=None)
    r.add_argument("--ratings", type=str, default=None)
    r.add_argument("--edges", type=str, default=None)
    r.add_argument("--dishonest", type=float, default=None)
    r.add_argument("--delta", type=float, default=None)
    _add_common(r)
    r.set_defaults(func=cmd_replay)

    v = sub.add_parser("validate", help="check a config file")
    v.add_argument("--config", type=str, required=True)
    v.set_defaults(func=cmd_validate)

    rep = sub.add_parser("report", help="render SVG charts from existing CSVs")
    rep.add_argument("--out", type=str, default=".")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
