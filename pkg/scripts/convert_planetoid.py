"""One-time converter from the upstream Planetoid pickles to the tsv dataset format.

Expects the raw ``ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`` files.
The standard fixed split is kept: the first ``len(y)`` nodes train, the next
``--val-size`` (500) validate, ``test.index`` tests.

    python scripts/convert_planetoid.py --raw path/to/planetoid/data --name cora --out data/cora
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from gcnplus.data import Dataset, SplitMasks, write_dataset
from gcnplus.graph import build_csr


def _load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def convert(raw: Path, name: str, val_size: int = 500) -> Dataset:
    x, y, tx, ty, allx, ally, graph = (_load(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_idx)
    if name == "citeseer":
        # some test ids are isolated and absent from tx; pad with zero rows
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((full.size, tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        ty_ext = np.zeros((full.size, ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        tx, ty = tx_ext, ty_ext
    feats = sp.vstack((allx, tx)).tolil()
    feats[test_idx, :] = feats[test_sorted, :]
    onehot = np.vstack((ally, ty))
    onehot[test_idx, :] = onehot[test_sorted, :]
    n = feats.shape[0]
    # nodes without a label (citeseer padding) get class 0 and stay out of every split
    labels = onehot.argmax(1)

    edges = {(min(u, v), max(u, v)) for u, nbrs in graph.items() for v in nbrs if u != v and v < n}
    raw_count = sum(len(v) for v in graph.values()) // 2
    g = build_csr(sorted(edges), n)

    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    train[: len(y)] = True
    val[len(y): len(y) + val_size] = True
    test[test_idx] = True
    labelled = onehot.sum(1) > 0
    test &= labelled
    return Dataset(name, g, feats.toarray(), labels, SplitMasks(train, val, test),
                   int(onehot.shape[1]), raw_edge_count=raw_count)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--raw", required=True, type=Path)
    p.add_argument("--name", required=True, help="cora, citeseer or pubmed")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--val-size", type=int, default=500)
    ns = p.parse_args(argv)
    ds = convert(ns.raw, ns.name, ns.val_size)
    write_dataset(ds, ns.out)
    print(f"{ns.name}: n={ds.graph.n} d={ds.features.shape[1]} c={ds.num_classes} "
          f"edges={ds.graph.num_edges} (raw adjacency lists: {ds.raw_edge_count})")


if __name__ == "__main__":
    sys.exit(main())
