"""Command-line driver: train, sweep, smoothness-curve, oracle-check, make-sbm."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import sys

import numpy as np

from . import checks
from .data import SbmSpec, generate_sbm, load_dataset, write_dataset
from .errors import GcnPlusError, InvalidConfig
from .experiment import run_repeated, smoothness_curve
from .neural import MODELS, TrainConfig
from .propagation import Kernel, PropagationConfig
from .results import SCHEMA_VERSION, write_results

log = logging.getLogger("gcnplus")

# grid keys accepted by `sweep`, mapped to argparse destinations
GRID_KEYS = {
    "hops": "hops", "alpha": "alpha", "beta": "beta", "kind": "kind", "kernel": "kernel",
    "retain": "retain", "lr": "lr", "dropout": "dropout", "weight_decay": "weight_decay",
    "hidden": "hidden", "layers": "layers", "model": "model",
}
# search ranges used by `sweep --preset search`
SEARCH_GRID = {
    "lr": ["0.001", "0.005", "0.01"],
    "dropout": ["0.1", "0.2", "0.3", "0.4", "0.5"],
    "retain": ["0.1", "0.2", "0.3", "0.4", "0.5"],
}


def parse_beta(text: str, n: int) -> float:
    """A float, or ``<c>/n`` for c divided by the node count."""
    text = str(text).strip()
    if text.endswith("/n"):
        return float(text[:-2]) / n
    return float(text)


def propagation_from_args(ns, n: int) -> PropagationConfig:
    beta = parse_beta(ns.beta, n)
    kernel = ns.kernel
    if kernel == "auto":
        kernel = "case2" if beta > 0 or ns.model == "gcn-star" else "case1"
    alpha = ns.alpha
    if ns.retain is not None:
        r = float(ns.retain)
        if not 0 < r <= 1:
            raise InvalidConfig(f"retain must be in (0, 1], got {r}")
        # retained fraction 1 - mu pins alpha + beta
        alpha = (1.0 - r) / r - beta
    return PropagationConfig(Kernel.parse(kernel), ns.kind, alpha=float(alpha), beta=beta,
                             hops=int(ns.hops))


def train_config_from_args(ns, n: int) -> TrainConfig:
    return TrainConfig(
        model=ns.model, hidden=int(ns.hidden), learning_rate=float(ns.lr),
        dropout=float(ns.dropout), weight_decay=float(ns.weight_decay),
        max_epochs=int(ns.epochs), patience=int(ns.patience), seed=int(ns.seed),
        layers=int(ns.layers), bias=bool(ns.bias), propagation=propagation_from_args(ns, n),
    )


def _echo(ns) -> dict:
    return {k: v for k, v in vars(ns).items() if k != "func"}


def _split_sizes(ns):
    return (ns.train_per_class, ns.val_size, ns.test_size)


def _summary(report) -> str:
    agg = report.aggregate
    if agg.get("mean") is None:
        return f"{report.command}: no runs"
    return (f"{report.command} {report.dataset['name']}: test acc {100 * agg['mean']:.2f} "
            f"± {100 * agg['std']:.2f} over {len(report.runs)} run(s)")


def cmd_train(ns):
    ds = load_dataset(ns.dataset)
    config = train_config_from_args(ns, ds.graph.n)
    report = run_repeated(ds, config, ns.runs, ns.split, ns.row_normalize, ns.jobs,
                          _split_sizes(ns), echo=_echo(ns))
    if ns.out:
        write_results(report, ns.out)
    print(_summary(report))
    return report


def parse_grid(items) -> dict:
    grid = {}
    for item in items or []:
        key, sep, values = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in GRID_KEYS:
            raise argparse.ArgumentTypeError(f"bad grid entry {item!r}; use KEY=v1,v2 with KEY in {sorted(GRID_KEYS)}")
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise argparse.ArgumentTypeError(f"grid entry {item!r} has no values")
        grid[key] = vals
    return grid


def _cast(key, value):
    if key in ("hops", "hidden", "layers"):
        return int(value)
    if key in ("alpha", "lr", "dropout", "weight_decay"):
        return float(value)
    return value  # beta and retain are parsed later; kind/kernel/model are strings


def sweep_csv(grid_keys, points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*grid_keys, "mean_acc", "std_acc"])
    for coords, report in points:
        w.writerow([*(coords[k] for k in grid_keys), repr(report.aggregate["mean"]),
                    repr(report.aggregate["std"])])
    return buf.getvalue()


def cmd_sweep(ns, parser):
    try:
        grid = parse_grid(ns.grid)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    if ns.preset == "search":
        grid = {**SEARCH_GRID, **grid}
    if not grid:
        parser.error("sweep needs a non-empty grid (--grid KEY=v1,v2 or --preset search)")
    ds = load_dataset(ns.dataset)
    keys = list(grid)
    points = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        point_ns = copy.copy(ns)
        coords = dict(zip(keys, combo))
        for k, v in coords.items():
            setattr(point_ns, GRID_KEYS[k], _cast(k, v))
        config = train_config_from_args(point_ns, ds.graph.n)
        report = run_repeated(ds, config, ns.runs, ns.split, ns.row_normalize, ns.jobs,
                              _split_sizes(ns), command="sweep", echo=_echo(point_ns))
        log.info("%s -> %.4f", coords, report.aggregate["mean"])
        points.append((coords, report))
    table = sweep_csv(keys, points)
    if ns.csv:
        with open(ns.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(table)
    if ns.out:
        write_results({"schema_version": SCHEMA_VERSION, "command": "sweep", "dataset": ds.meta,
                       "grid": grid,
                       "points": [{"coords": c, "report": r.to_dict()} for c, r in points]}, ns.out)
    sys.stdout.write(table)
    return points


CURVE_FIELDS = ("tr_L", "tr_Lprime", "m_overall", "d_smooth", "d_non_smooth", "d_overall",
                "m_smooth", "m_non_smooth", "num_E", "num_E_prime")


def curve_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["depth", "test_accuracy", *CURVE_FIELDS])
    accs = [r.test_accuracy for r in report.runs] or [None] * len(report.curves)
    for (depth, rep), acc in zip(report.curves.items(), accs):
        w.writerow([depth, "" if acc is None else repr(acc),
                    *("" if rep[f] is None else repr(rep[f]) for f in CURVE_FIELDS)])
    return buf.getvalue()


def cmd_smoothness_curve(ns):
    if ns.model not in ("gcnplus", "gcn"):
        raise InvalidConfig("smoothness-curve supports --model gcnplus or gcn")
    depths = [int(x) for x in ns.depths.split(",") if x.strip()]
    ds = load_dataset(ns.dataset)
    config = train_config_from_args(ns, ds.graph.n)
    report = smoothness_curve(ds, config, depths, trained=not ns.no_train, split=ns.split,
                              row_norm=ns.row_normalize, split_sizes=_split_sizes(ns), echo=_echo(ns))
    table = curve_csv(report)
    if ns.csv:
        with open(ns.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(table)
    if ns.out:
        write_results(report, ns.out)
    sys.stdout.write(table)
    return report


def cmd_oracle_check(ns):
    rng = np.random.default_rng(ns.seed)
    wanted = set(ns.checks.split(","))
    unknown = wanted - {"convergence", "metrics", "gradient", "spectral"}
    if unknown:
        raise InvalidConfig(f"unknown checks {sorted(unknown)}")
    mus = tuple(ns.mu) if ns.mu else (0.5, 0.9)
    results = []
    if "convergence" in wanted:
        results += checks.check_convergence(rng, ns.trials, max_n=ns.max_n, mus=mus, hops=ns.hops,
                                            beta=ns.beta)
    if "metrics" in wanted:
        results += checks.check_metrics(rng, ns.trials, max_n=min(ns.max_n, 30))
    if "gradient" in wanted:
        results += checks.check_gradients(rng, max(1, ns.trials // 10))
    if "spectral" in wanted:
        results += checks.check_spectral(rng, ns.trials, max_n=ns.max_n)
    print(checks.format_table(results))
    failed = sum(r.failed for r in results)
    flagged = sum(r.status == checks.INSUFFICIENT for r in results)
    print(f"{len(results)} checks: {len(results) - failed - flagged} pass, {flagged} insufficient-K, "
          f"{failed} fail")
    if ns.json:
        write_results({"schema_version": SCHEMA_VERSION, "command": "oracle-check",
                       "results": [vars(r) for r in results]}, ns.json)
    return 1 if failed else 0


def cmd_make_sbm(ns):
    spec = SbmSpec(n=ns.n, num_classes=ns.classes, p_in=ns.p_in, p_out=ns.p_out,
                   feature_dim=ns.feature_dim, feature_noise=ns.noise, seed=ns.seed,
                   nodes_per_class_train=ns.train_per_class, val_size=ns.val_size,
                   test_size=ns.test_size, name=ns.name)
    ds = generate_sbm(spec)
    write_dataset(ds, ns.out)
    print(json.dumps({**ds.meta, "edges": ds.graph.num_edges, "out": str(ns.out)}))


def _add_split_sizes(p, val=500, test=1000):
    p.add_argument("--train-per-class", type=int, default=20)
    p.add_argument("--val-size", type=int, default=val)
    p.add_argument("--test-size", type=int, default=test)


def _add_model_args(p, runs=10):
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--model", choices=MODELS, default="gcnplus")
    p.add_argument("--kernel", choices=("auto", "case1", "case2"), default="auto",
                   help="auto picks case2 when beta > 0")
    p.add_argument("--kind", choices=("sym", "rw"), default="sym")
    p.add_argument("--alpha", type=float, default=9.0)
    p.add_argument("--beta", default="0", help="float, or C/n for C divided by node count")
    p.add_argument("--retain", default=None, help="retained fraction 1-mu; overrides --alpha")
    p.add_argument("--hops", type=int, default=16)
    p.add_argument("--layers", type=int, default=2, help="depth for gcn and gcn-star")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--epochs", type=int, default=1500)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--bias", action="store_true")
    p.add_argument("--runs", type=int, default=runs)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("fixed", "random"), default="fixed")
    p.add_argument("--row-normalize", choices=("auto", "on", "off"), default="auto",
                   help="auto: normalize rows when all features are nonnegative")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", default=None, help="results JSON path")
    _add_split_sizes(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcnplus", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="repeated seeded training runs")
    _add_model_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid sweep, one report per point")
    _add_model_args(p)
    p.add_argument("--grid", action="append", metavar="KEY=v1,v2",
                   help=f"repeatable; KEY in {', '.join(GRID_KEYS)}")
    p.add_argument("--preset", choices=("search",), default=None,
                   help="search: lr x dropout x retain ranges")
    p.add_argument("--csv", default=None, help="summary CSV path (also printed)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("smoothness-curve", help="smoothness report per depth")
    _add_model_args(p, runs=1)
    p.add_argument("--depths", default="2,4,8,16,32,64")
    p.add_argument("--no-train", action="store_true", help="propagate raw features only")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_smoothness_curve)

    p = sub.add_parser("oracle-check", help="randomized checks against dense/brute-force oracles")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--max-n", type=int, default=50)
    p.add_argument("--mu", type=float, action="append", help="repeatable; default 0.5 and 0.9")
    p.add_argument("--hops", type=int, default=400)
    p.add_argument("--beta", type=float, default=None, help="case2 beta; default 0.5/n per graph")
    p.add_argument("--checks", default="convergence,metrics,gradient,spectral")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("make-sbm", help="write a stochastic block model dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.02)
    p.add_argument("--p-out", type=float, default=0.002)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="sbm")
    _add_split_sizes(p, val=200, test=500)
    p.set_defaults(func=cmd_make_sbm)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if ns.command == "sweep":
            rc = ns.func(ns, parser)
        else:
            rc = ns.func(ns)
    except GcnPlusError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1
    return rc if isinstance(rc, int) else 0


if __name__ == "__main__":
    sys.exit(main())
