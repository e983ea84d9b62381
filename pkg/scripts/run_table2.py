"""Baseline comparison on one dataset: GCN+ (both kernels), GCN, SGC, MLP.

Without ``--dataset`` the 7-class SBM used by the acceptance suite is generated.

    python scripts/run_table2.py --runs 10 --out results/table2.json
    python scripts/run_table2.py --dataset data/cora --runs 10
"""

import argparse
import json
import sys
import time

from gcnplus.data import SbmSpec, generate_sbm, load_dataset
from gcnplus.experiment import run_repeated
from gcnplus.neural import TrainConfig
from gcnplus.propagation import Kernel, PropagationConfig
from gcnplus.results import SCHEMA_VERSION, write_results

SBM = SbmSpec(n=1000, num_classes=7, p_in=0.025, p_out=0.0012, feature_dim=32, feature_noise=1.0,
              seed=0, nodes_per_class_train=20, val_size=200, test_size=500, name="sbm7")


def rows(n, alpha, beta_scale, hops):
    return {
        "GCN+ (beta=0)": TrainConfig("gcnplus", propagation=PropagationConfig(Kernel.CASE1, "sym", alpha=alpha, hops=hops)),
        "GCN+ (beta>0)": TrainConfig("gcnplus", propagation=PropagationConfig(
            Kernel.CASE2, "sym", alpha=alpha, beta=beta_scale / n, hops=hops)),
        "GCN": TrainConfig("gcn", layers=2),
        "SGC": TrainConfig("sgc", learning_rate=0.2, weight_decay=5e-5, dropout=0.0,
                           propagation=PropagationConfig(Kernel.CASE1, "sym", alpha=0.0, hops=2)),
        "MLP": TrainConfig("mlp"),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dataset", default=None)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--alpha", type=float, default=9.0)
    p.add_argument("--beta-scale", type=float, default=0.5, help="beta = scale / n")
    p.add_argument("--hops", type=int, default=16)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    ns = p.parse_args(argv)
    ds = load_dataset(ns.dataset) if ns.dataset else generate_sbm(SBM)
    reports = {}
    for name, cfg in rows(ds.graph.n, ns.alpha, ns.beta_scale, ns.hops).items():
        t0 = time.perf_counter()
        rep = run_repeated(ds, cfg, runs=ns.runs, jobs=ns.jobs, command="table2")
        agg = rep.aggregate
        print(f"{name:15s} {100 * agg['mean']:5.1f} ± {100 * agg['std']:.1f}   ({time.perf_counter() - t0:.0f}s)",
              flush=True)
        reports[name] = rep.to_dict()
    if ns.out:
        write_results({"schema_version": SCHEMA_VERSION, "command": "table2", "dataset": ds.meta,
                       "rows": reports}, ns.out)
    else:
        print(json.dumps({k: v["aggregate"] for k, v in reports.items()}))


if __name__ == "__main__":
    sys.exit(main())
