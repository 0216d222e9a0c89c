"""Command-line entry point.

Subcommands: solve, train, evaluate, sweep-k, generate-data, analyze-rules,
enumerate-learned.  Training options come from a JSON or TOML config file
plus flag overrides; logs are emitted as JSON lines.
"""

import argparse
import dataclasses
import json
import sys

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from .network import CostFunctionNetwork
from .solver import SolverConfig, solve, enumerate_solutions
from .mlp import ParamStore
from . import sudoku, training


def _load_config(path):
    if path is None:
        return {}
    if path.endswith(".toml"):
        with open(path, "rb") as f:
            return tomllib.load(f)
    with open(path) as f:
        return json.load(f)


def _train_config(args):
    raw = _load_config(args.config)
    fields = {f.name for f in dataclasses.fields(training.TrainConfig)}
    unknown = set(raw) - fields
    if unknown:
        raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    for name in fields:
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            raw[name] = value
    return training.TrainConfig(**raw)


def _add_train_flags(p):
    p.add_argument("--config", help="JSON or TOML file with TrainConfig keys")
    p.add_argument("--size", type=int, choices=(4, 9))
    p.add_argument("--loss", choices=training.LOSSES)
    p.add_argument("--k", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--l1-lambda", type=float, dest="l1_lambda")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden-width", type=int, dest="hidden_width")
    p.add_argument("--hidden-layers", type=int, dest="hidden_layers")


def _parse_evidence(text):
    evidence = {}
    if text:
        for item in text.split(","):
            k, v = item.split("=")
            evidence[int(k)] = int(v)
    return evidence


def cmd_solve(args):
    net = CostFunctionNetwork.load(args.net)
    net = net.condition(_parse_evidence(args.evidence))
    if args.enumerate is not None:
        res = enumerate_solutions(net, SolverConfig(
            enumeration_bound=args.enumerate, max_solutions=args.max_solutions))
        for y, cost in res.solutions:
            print(json.dumps({"assignment": list(y), "cost": cost}))
        if res.truncated:
            print(json.dumps({"truncated": True}), file=sys.stderr)
    else:
        res = solve(net)
        print(json.dumps({
            "assignment": None if res.best is None else list(res.best),
            "cost": res.best_cost,
            "proven_optimal": res.proven_optimal,
            "nodes_expanded": res.nodes_expanded,
        }))


def cmd_generate_data(args):
    rng = np.random.default_rng(args.seed)
    samples = []
    while len(samples) < args.count:
        s = sudoku.generate(args.size, args.hints, rng,
                            require_unique=not args.multi_solution)
        if args.multi_solution and not 2 <= len(s.solutions) <= args.max_sols:
            continue
        samples.append(s)
    sudoku.save_dataset(args.out, samples,
                        max_solutions=5 if args.multi_solution else None)
    print(f"wrote {len(samples)} samples to {args.out}")


def cmd_train(args):
    cfg = _train_config(args)
    train_samples = sudoku.load_dataset(args.train_set, cfg.size)
    val_samples = sudoku.load_dataset(args.val_set, cfg.size) if args.val_set else []
    store, log = training.train(cfg, train_samples, val_samples)
    store.save(args.out, extra={"train_config": dataclasses.asdict(cfg)})
    log_path = args.log or (args.out + ".log.jsonl")
    with open(log_path, "w") as f:
        for entry in log:
            f.write(json.dumps(entry) + "\n")
    print(f"checkpoint: {args.out}  log: {log_path}  epochs: {len(log)}")


def cmd_evaluate(args):
    store, extra = ParamStore.load(args.checkpoint)
    cfg = training.TrainConfig(**extra.get("train_config", {}))
    samples = sudoku.load_dataset(args.dataset, cfg.size)
    report = training.evaluate(store, samples, mode=args.mode, cfg=cfg)
    print(json.dumps({"grids_total": report.grids_total,
                      "grids_solved": report.grids_solved,
                      "accuracy": report.accuracy}))


def cmd_sweep_k(args):
    cfg = _train_config(args)
    train_samples = sudoku.load_dataset(args.train_set, cfg.size)
    val_samples = sudoku.load_dataset(args.val_set, cfg.size) if args.val_set else []
    test_samples = sudoku.load_dataset(args.test_set, cfg.size)
    ks = [int(k) for k in args.k_values.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = training.sweep_k(cfg, ks, seeds, train_samples, val_samples,
                            test_samples, csv_path=args.out)
    print(json.dumps(training.summarize_sweep(rows)))


def cmd_analyze_rules(args):
    store, extra = ParamStore.load(args.checkpoint)
    cfg = training.TrainConfig(**extra.get("train_config", {}))
    report = training.learned_rule_report(store, cfg.size, tau_on=args.tau_on,
                                          tau_off=args.tau_off)
    report.write_csv(args.out)
    if args.summary:
        report.write_summary(args.summary)
    print(json.dumps(report.summary()))


def cmd_enumerate_learned(args):
    store, extra = ParamStore.load(args.checkpoint)
    cfg = training.TrainConfig(**extra.get("train_config", {}))
    samples = sudoku.load_dataset(args.dataset, cfg.size)
    for sample in samples:
        result = training.enumerate_learned(store, sample, args.tau, cfg=cfg)
        result["puzzle"] = sample.puzzle_string()
        result["missing"] = [list(s) for s in result["missing"]]
        result["extra"] = [list(s) for s in result["extra"]]
        print(json.dumps(result))


def build_parser():
    p = argparse.ArgumentParser(prog="cfnlearn")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="exactly solve or enumerate a network")
    s.add_argument("net")
    s.add_argument("--evidence", help="comma-separated var=value pairs")
    s.add_argument("--enumerate", type=float, default=None, metavar="BOUND")
    s.add_argument("--max-solutions", type=int, default=1000)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("generate-data", help="generate Sudoku samples")
    s.add_argument("out")
    s.add_argument("--size", type=int, choices=(4, 9), default=4)
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--hints", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--multi-solution", action="store_true")
    s.add_argument("--max-sols", type=int, default=6)
    s.set_defaults(func=cmd_generate_data)

    s = sub.add_parser("train", help="train a model")
    _add_train_flags(s)
    s.add_argument("train_set")
    s.add_argument("out")
    s.add_argument("--val-set")
    s.add_argument("--log")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="solver-based grid accuracy")
    s.add_argument("checkpoint")
    s.add_argument("dataset")
    s.add_argument("--mode", choices=("single", "any-of-known"), default="single")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep-k", help="train across mask sizes and seeds")
    _add_train_flags(s)
    s.add_argument("train_set")
    s.add_argument("test_set")
    s.add_argument("out", help="CSV output path")
    s.add_argument("--val-set")
    s.add_argument("--k-values", default="0,2,3,12")
    s.add_argument("--seeds", default="0,1,2,3,4")
    s.set_defaults(func=cmd_sweep_k)

    s = sub.add_parser("analyze-rules", help="classify learned pair matrices")
    s.add_argument("checkpoint")
    s.add_argument("out", help="per-pair CSV output path")
    s.add_argument("--summary", help="summary JSON output path")
    s.add_argument("--tau-on", type=float, default=1.0)
    s.add_argument("--tau-off", type=float, default=0.1)
    s.set_defaults(func=cmd_analyze_rules)

    s = sub.add_parser("enumerate-learned",
                       help="compare thresholded predictions with true rules")
    s.add_argument("checkpoint")
    s.add_argument("dataset")
    s.add_argument("--tau", type=float, required=True)
    s.set_defaults(func=cmd_enumerate_learned)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
