"""Command-line interface.

Subcommands: train, prune, experiment, theory-grid, verify, reproduce-table.
Configuration is a flat JSON file (ExperimentConfig field names); command-line
flags override file values.  Exit codes: 0 all checks pass, 1 any failure,
2 usage error.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import harness, theory, verify
from .netcore import make_student, make_teacher
from .trainer import TrainConfig, train


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file (flat ExperimentConfig fields)")
    parser.add_argument("--seed", type=int, help="experiment seed")
    parser.add_argument("--out", help="output path")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--sigma", type=float, help="label noise level")
    parser.add_argument("--methods", help="comma-separated method list")
    parser.add_argument("--reweight", action="store_true", default=None)
    parser.add_argument("--edge-mode", choices=("bernoulli", "exact"), dest="edge_mode")


def load_config(args):
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    cfg = harness.ExperimentConfig.from_json(doc)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.sigma is not None:
        overrides["sigma"] = args.sigma
    if args.methods:
        overrides["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.reweight is not None:
        overrides["reweight"] = args.reweight
    if args.edge_mode is not None:
        overrides["edge_mode"] = args.edge_mode
    return replace(cfg, **overrides) if overrides else cfg


def _write_or_print(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def cmd_train(args):
    cfg = load_config(args)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    teacher = make_teacher(cfg.N, cfg.M, cfg.v_star, rng)
    student0 = make_student(cfg.N, cfg.K, rng)
    trace = train(
        teacher,
        student0,
        TrainConfig(eta=cfg.eta, steps=cfg.train_steps, sigma=cfg.sigma, seed=[cfg.seed, 1]),
    )
    _write_or_print(json.dumps(trace.to_json(), indent=1), args.out)
    return 0 if trace.converged else 1


def cmd_prune(args):
    cfg = load_config(args)
    records = harness.run_round(cfg, 0)
    _emit_records(records, args)
    return 0


def cmd_experiment(args):
    cfg = load_config(args)
    records = harness.run_experiment(cfg)
    _emit_records(records, args)
    return 0


def _emit_records(records, args):
    if args.out:
        harness.emit(records, args.format, args.out)
    elif args.format == "csv":
        print(harness.CSV_HEADER)
        for r in records:
            print(
                f"{r.method},{r.pct_params!r},{r.round},{r.ge_mean!r},{r.ge_std!r},"
                f"{str(r.reweighted).lower()},{r.seed}"
            )
    else:
        print(json.dumps([r.to_json() for r in records], indent=1))


def cmd_theory_grid(args):
    zs = range(args.z_min, args.z_max + 1)
    if args.grid == "node-vs-edge":
        grid = theory.dpp_node_minus_random_edge_grid(zs, args.c_resolution, M=args.M, v_star=args.v_star)
    else:
        grid = theory.reweighted_dpp_minus_rescaled_edge_grid(zs, args.c_resolution, M=args.M, v_star=args.v_star)
    if args.out:
        grid.write_csv(args.out)
    else:
        sys.stdout.write("Z,c,diff\n")
        for z, c, d in grid.iter_cells():
            sys.stdout.write(f"{z},{c!r},{d!r}\n")
    return 0


def cmd_verify(args):
    cfg = load_config(args)
    report = verify.verify_theorems(cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    print(verify.format_report(report))
    return 0 if report["all_pass"] else 1


def cmd_reproduce_table(args):
    cfg = load_config(args)
    report = harness.reproduce_table(cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    print(harness.format_table_report(report))
    return 0 if report["all_pass"] else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="prunelab",
        description="Teacher-student pruning laboratory: train, prune, and verify closed-form error predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one student on a fresh teacher; emit the trace as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="single round: train, prune with each method, measure GE")
    _add_common(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("experiment", help="full multi-round experiment; emit records")
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("theory-grid", help="closed-form difference grids as CSV (columns Z,c,diff)")
    _add_common(p)
    p.add_argument("--grid", choices=("node-vs-edge", "reweighted"), default="node-vs-edge")
    p.add_argument("--z-min", type=int, default=4)
    p.add_argument("--z-max", type=int, default=30)
    p.add_argument("--c-resolution", type=int, default=100)
    p.add_argument("--M", type=int, default=5)
    p.add_argument("--v-star", type=float, default=1.0)
    p.set_defaults(func=cmd_theory_grid)

    p = sub.add_parser("verify", help="run the analytic + simulation check suite")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reproduce-table", help="run both benchmark panels and compare with the reference table")
    _add_common(p)
    p.set_defaults(func=cmd_reproduce_table)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, harness.ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
