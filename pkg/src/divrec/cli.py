"""Command-line front end: generate / run / benchmark / report / diagnose.

Every parameter can come from a JSON config file (``--config``); flags win
over file values. ``--seed`` steers both dataset generation and trajectory
randomness. Usage problems (bad flag values, parameters that do not apply
to the chosen method) exit with status 2; runtime failures exit with 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields

from .data import generate_synthetic, save_items_csv, save_items_packed, store_rows
from .exceptions import ConfigError, DivrecError
from .feedback import NOISE_KINDS, PrecomputedMatrixModel
from .metrics import dataset_diagnostics
from .replay import (
    HISTORY_POLICIES,
    REPLAY_METHODS,
    STRATEGIES,
    RunConfig,
    prepare_dataset,
    run_benchmark,
    run_trajectory,
    sample_history,
)

_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def _add_dataset_flags(sub):
    sub.add_argument("--items", type=int, default=None,
                     help="number of synthetic items")
    sub.add_argument("--dim", type=int, default=None,
                     help="embedding dimension for synthetic items")
    sub.add_argument("--groups", type=int, default=None,
                     help="number of near-duplicate groups to generate")
    sub.add_argument("--users", type=int, default=None,
                     help="number of synthetic users")
    sub.add_argument("--items-file", default=None,
                     help="load items from this file instead of generating")
    sub.add_argument("--items-format", choices=("csv", "packed_binary"),
                     default=None)
    sub.add_argument("--scores", default=None,
                     help="user,item,score csv for precomputed feedback")


def _add_method_flags(sub):
    sub.add_argument("--method", default=None,
                     help=f"one of {', '.join(REPLAY_METHODS)} "
                          "(benchmark accepts a comma-separated list)")
    sub.add_argument("--strategy", default=None,
                     help=f"one of {', '.join(STRATEGIES)}")
    sub.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="quality weight in [0, 1]")
    sub.add_argument("--alpha", type=float, default=None,
                     help="history-similarity gate (b_divrec / xquad only)")
    sub.add_argument("--epsilon", type=float, default=None,
                     help="greedy-phase probability (eps_greedy only)")
    sub.add_argument("--batch", dest="batch_size", type=int, default=None,
                     help="items per recommendation round")
    sub.add_argument("--threshold", type=float, default=None,
                     help="quality threshold for precision metrics")
    sub.add_argument("--seeds", dest="n_seeds", type=int, default=None,
                     help="number of replay seeds per user")
    sub.add_argument("--adaptive", action="store_const", const=True,
                     default=None, help="retune lambda online per round")
    sub.add_argument("--noise", choices=NOISE_KINDS, default=None)
    sub.add_argument("--rank", type=int, default=None,
                     help="feature-map rank")
    sub.add_argument("--landmarks", dest="n_landmarks", type=int, default=None)
    sub.add_argument("--kernel", choices=("linear", "rbf"), default=None)
    sub.add_argument("--bandwidth", type=float, default=None)
    sub.add_argument("--history-policy", dest="history_policy",
                     choices=HISTORY_POLICIES, default=None)
    sub.add_argument("--single-thread", dest="single_thread",
                     action="store_const", const=True, default=None,
                     help="pin linear algebra to one thread (stable timing)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="divrec",
        description="Quality-diversity batch recommendation toolkit",
    )
    parser.add_argument("--config", default=None,
                        help="JSON file of defaults; flags win")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed for data generation and replay")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("generate", help="write a synthetic dataset")
    gen.add_argument("--items", type=int, default=None)
    gen.add_argument("--dim", type=int, default=None)
    gen.add_argument("--groups", type=int, default=None,
                     help="number of near-duplicate groups")
    gen.add_argument("--users", type=int, default=None)
    gen.add_argument("--out", default=".", help="output directory")
    gen.add_argument("--format", choices=("csv", "packed_binary"),
                     default=None)

    run = commands.add_parser("run", help="replay one user trajectory")
    _add_dataset_flags(run)
    _add_method_flags(run)
    run.add_argument("--user", type=int, default=None, help="user id to replay")
    run.add_argument("--out", default=None, help="JSON-lines output file "
                     "(default: stdout)")

    bench = commands.add_parser("benchmark",
                                help="aggregate configs x users x seeds")
    _add_dataset_flags(bench)
    _add_method_flags(bench)
    bench.add_argument("--csv", dest="csv_path", default=None,
                       help="also write the machine-readable table here")

    rep = commands.add_parser("report", help="re-render a stored CSV table")
    rep.add_argument("--csv", dest="csv_path", required=True)

    diag = commands.add_parser("diagnose", help="dataset-level diagnostics")
    _add_dataset_flags(diag)
    diag.add_argument("--rank", type=int, default=None)
    diag.add_argument("--landmarks", dest="n_landmarks", type=int,
                      default=None)
    diag.add_argument("--kernel", choices=("linear", "rbf"), default=None)
    diag.add_argument("--bandwidth", type=float, default=None)
    diag.add_argument("--history-policy", dest="history_policy",
                      choices=HISTORY_POLICIES, default=None)
    return parser


def _load_config_file(path, parser):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config file {path}: {exc}")
    if not isinstance(payload, dict):
        parser.error(f"config file {path} must hold a JSON object")
    unknown = set(payload) - _CONFIG_FIELDS - {"user", "out", "format",
                                               "csv_path", "groups"}
    if unknown:
        parser.error(f"config file {path} has unknown keys: {sorted(unknown)}")
    return payload


def _merged(args, file_cfg, key, fallback=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_cfg and file_cfg[key] is not None:
        return file_cfg[key]
    return fallback


def _build_run_config(args, file_cfg, parser, methods=None, strategy=None):
    values = {}
    for name in _CONFIG_FIELDS:
        if name == "users":
            # on the command line and in config files, "users" is the
            # synthetic-user count (n_users); the per-cell id subset is a
            # library-only knob
            continue
        merged = _merged(args, file_cfg, name)
        if merged is not None:
            values[name] = merged
    # flag-name translations
    if _merged(args, file_cfg, "items") is not None:
        values["n_items"] = int(_merged(args, file_cfg, "items"))
    if _merged(args, file_cfg, "groups") is not None:
        values["n_groups"] = int(_merged(args, file_cfg, "groups"))
    if _merged(args, file_cfg, "users") is not None:
        values["n_users"] = int(_merged(args, file_cfg, "users"))
    if _merged(args, file_cfg, "items_file") is not None:
        values["items_path"] = _merged(args, file_cfg, "items_file")
    if _merged(args, file_cfg, "items_format") is not None:
        values["items_format"] = _merged(args, file_cfg, "items_format")
    if _merged(args, file_cfg, "scores") is not None:
        values["scores_path"] = _merged(args, file_cfg, "scores")
    if args.seed is not None:
        values["data_seed"] = int(args.seed)
    if methods is not None:
        values["method"] = methods
    if strategy is not None:
        values["strategy"] = strategy
    try:
        return RunConfig(**values)
    except (ConfigError, TypeError, ValueError) as exc:
        parser.error(str(exc))


def _round_payload(record):
    metric = record.metrics
    return {
        "round": record.round_index,
        "history": list(record.history),
        "batch": list(record.batch),
        "feedback": list(record.feedback),
        "lambda": record.lam,
        "rel": metric.rel,
        "prec": metric.prec,
        "div_local": metric.div_local,
        "div_global": metric.div_global,
        "runtime_seconds": metric.runtime_seconds,
        "rank_deficient": record.rank_deficient,
        "skipped_update": record.skipped_update,
    }


def _command_generate(args, file_cfg, parser):
    n_items = int(_merged(args, file_cfg, "items", 750))
    dim = int(_merged(args, file_cfg, "dim", 20))
    groups = int(_merged(args, file_cfg, "groups", 3))
    users = int(_merged(args, file_cfg, "users", 6))
    seed = int(args.seed if args.seed is not None
               else file_cfg.get("data_seed", 1))
    fmt = _merged(args, file_cfg, "format", "csv")
    store, contexts = generate_synthetic(n_items, dim, groups, users, seed=seed)
    os.makedirs(args.out, exist_ok=True)
    rows = store_rows(store)
    if fmt == "packed_binary":
        items_path = os.path.join(args.out, "items.bin")
        save_items_packed(rows, items_path)
    else:
        items_path = os.path.join(args.out, "items.csv")
        save_items_csv(rows, items_path)
    contexts_path = os.path.join(args.out, "contexts.csv")
    save_items_csv(contexts, contexts_path)
    meta = {
        "n_items": n_items, "dim": dim, "groups": groups, "n_users": users,
        "seed": seed, "format": fmt, "items": os.path.basename(items_path),
        "contexts": "contexts.csv",
    }
    with open(os.path.join(args.out, "meta.json"), "w",
              encoding="ascii") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"wrote {items_path} ({n_items} items, dim {dim}) and "
          f"{contexts_path} ({users} users)")
    return 0


def _command_run(args, file_cfg, parser):
    cfg = _build_run_config(args, file_cfg, parser)
    user_id = int(_merged(args, file_cfg, "user", 0))
    seed = int(args.seed if args.seed is not None else 0)
    dataset = prepare_dataset(cfg)
    record = run_trajectory(cfg, user_id, seed, dataset)
    lines = [json.dumps(_round_payload(r), sort_keys=True)
             for r in record.rounds]
    summary = {
        "type": "summary",
        "user": record.user_id,
        "seed": record.seed,
        "rounds": record.summary.rounds,
        "rel": record.summary.rel,
        "prec": record.summary.prec,
        "div_local": record.summary.div_local,
        "div_global": record.summary.div_global,
        "div_plus": record.summary.div_plus,
        "runtime_seconds": record.summary.runtime_seconds,
    }
    if cfg.adaptive:
        summary["lambda_final"] = record.summary.lam_final
        if record.oracle is not None:
            summary["oracle_lambda"] = float(record.oracle)
            summary["oracle_lambda_grid"] = record.oracle.grid_value
    lines.append(json.dumps(summary, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _command_benchmark(args, file_cfg, parser):
    methods = _merged(args, file_cfg, "method", "b_divrec")
    strategies = _merged(args, file_cfg, "strategy", "maximization")
    configs = []
    for method in str(methods).split(","):
        for strategy in str(strategies).split(","):
            configs.append(_build_run_config(
                args, file_cfg, parser,
                methods=method.strip(), strategy=strategy.strip(),
            ))
    report = run_benchmark(configs)
    if args.csv_path:
        report.to_csv(args.csv_path)
    sys.stdout.write(report.to_text())
    return 1 if not report.rows else 0


def _command_report(args, file_cfg, parser):
    try:
        with open(args.csv_path, "r", encoding="ascii") as handle:
            reader = list(csv.reader(handle))
    except OSError as exc:
        print(f"cannot read {args.csv_path}: {exc}", file=sys.stderr)
        return 1
    if not reader:
        print("empty report file", file=sys.stderr)
        return 1
    header, *rows = reader
    metric_names = []
    for name in header:
        if name.endswith("_mean"):
            metric_names.append(name[: -len("_mean")])
    lines = [["method", "strategy"] + metric_names]
    for row in rows:
        cells = dict(zip(header, row))
        rendered = [cells.get("method", "?"), cells.get("strategy", "?")]
        for name in metric_names:
            mean = float(cells[f"{name}_mean"])
            std = float(cells[f"{name}_std"])
            rendered.append(f"{mean:.2f} ± {std:.2f}")
        lines.append(rendered)
    widths = [max(len(line[i]) for line in lines)
              for i in range(len(lines[0]))]
    for k, line in enumerate(lines):
        print("  ".join(cell.ljust(width)
                        for cell, width in zip(line, widths)).rstrip())
        if k == 0:
            print("  ".join("-" * width for width in widths))
    return 0


def _command_diagnose(args, file_cfg, parser):
    cfg = _build_run_config(args, file_cfg, parser)
    dataset = prepare_dataset(cfg)
    if isinstance(dataset.model, PrecomputedMatrixModel):
        ratings = dataset.model
    else:
        table = {}
        for user in range(dataset.n_users):
            quality = dataset.quality(user)
            for item in range(dataset.store.n_items):
                table[(user, item)] = float(quality[item])
        ratings = PrecomputedMatrixModel(table=table,
                                         n_users=dataset.n_users,
                                         n_items=dataset.store.n_items)
    seed = int(args.seed if args.seed is not None else 0)
    histories = [
        sample_history(dataset, user, seed, policy=cfg.history_policy)
        for user in range(dataset.n_users)
    ]
    diag = dataset_diagnostics(ratings, dataset.feat, histories)
    print(json.dumps({
        "sparsity_pct": diag.sparsity_pct,
        "gini": diag.gini,
        "hist_div": diag.hist_div,
    }, sort_keys=True))
    return 0


_COMMANDS = {
    "generate": _command_generate,
    "run": _command_run,
    "benchmark": _command_benchmark,
    "report": _command_report,
    "diagnose": _command_diagnose,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    file_cfg = _load_config_file(args.config, parser)
    handler = _COMMANDS[args.command]
    try:
        return handler(args, file_cfg, parser)
    except DivrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
