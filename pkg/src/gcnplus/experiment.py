"""Repeated training runs and smoothness curves, shared by the CLI and scripts."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .data import Dataset, row_normalize, sample_split
from .errors import InvalidConfig
from .graph import apply_normalized
from .metrics import smoothness_report
from .neural import TrainConfig, build_model, evaluate, train
from .propagation import PropagationOperator, propagate
from .results import RunRecord, RunReport


def prepare_features(ds: Dataset, row_norm: str = "auto") -> np.ndarray:
    """``auto`` row-normalizes nonnegative (bag-of-words style) features only."""
    if row_norm not in ("auto", "on", "off"):
        raise InvalidConfig(f"row_norm must be auto/on/off, got {row_norm!r}")
    X = ds.features
    if row_norm == "on" or (row_norm == "auto" and np.all(X >= 0)):
        return row_normalize(X)
    return X


def split_for(ds: Dataset, split: str, seed: int, per_class=20, val_size=500, test_size=1000):
    if split == "fixed":
        return ds.masks
    if split == "random":
        return sample_split(ds.labels, ds.num_classes, per_class, val_size, test_size,
                            np.random.default_rng([seed, 2]))
    raise InvalidConfig(f"split must be fixed or random, got {split!r}")


def fit(ds: Dataset, X: np.ndarray, config: TrainConfig, masks):
    """Train once; returns (RunRecord, model, params)."""
    t0 = time.perf_counter()
    model = build_model(ds.graph, X.shape[1], ds.num_classes, config)
    params, hist = train(model, X, ds.labels, masks, config)
    acc = evaluate(model, params, X, ds.labels, masks.test)
    rec = RunRecord(config.seed, acc, hist.best_val_acc, hist.epochs_ran, time.perf_counter() - t0)
    return rec, model, params


def _one_run(job):
    ds, X, config, split, split_sizes = job
    rec, _, _ = fit(ds, X, config, split_for(ds, split, config.seed, *split_sizes))
    return rec


def run_repeated(ds: Dataset, config: TrainConfig, runs: int = 10, split: str = "fixed",
                 row_norm: str = "auto", jobs: int = 1, split_sizes=(20, 500, 1000),
                 command: str = "train", echo: dict | None = None) -> RunReport:
    """``runs`` independent runs seeded ``config.seed + i``, reported in run order."""
    if runs < 1:
        raise InvalidConfig("runs must be >= 1")
    X = prepare_features(ds, row_norm)
    work = [(ds, X, replace(config, seed=config.seed + i), split, tuple(split_sizes))
            for i in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_one_run, work))
    else:
        records = [_one_run(w) for w in work]
    cfg = {"train": config.to_dict(), "runs": runs, "split": split, "row_norm": row_norm}
    if echo:
        cfg["args"] = echo
    return RunReport(command, ds.meta, cfg, records).finalize()


def feature_embedding(ds: Dataset, X: np.ndarray, config: TrainConfig, depth: int) -> np.ndarray:
    """Weight-free embedding: K propagation hops (gcnplus) or A_tilde^L X (gcn)."""
    if config.model == "gcnplus":
        op = PropagationOperator(ds.graph, config.propagation.replace(hops=depth))
        return propagate(op, X)
    Z = np.array(X, dtype=np.float64)
    for _ in range(depth):
        Z = apply_normalized(ds.graph, config.propagation.kind, Z)
    return Z


def depth_config(config: TrainConfig, depth: int) -> TrainConfig:
    if config.model in ("gcnplus", "sgc"):
        return replace(config, propagation=config.propagation.replace(hops=depth))
    return replace(config, layers=depth)


def smoothness_curve(ds: Dataset, config: TrainConfig, depths, trained: bool = True,
                     split: str = "fixed", row_norm: str = "auto", split_sizes=(20, 500, 1000),
                     echo: dict | None = None) -> RunReport:
    """Smoothness report of the pre-classifier embedding at each depth.

    GCN+ is measured after propagation, vanilla GCN on its last hidden layer.
    With ``trained=False`` the raw features are propagated and no runs are made.
    """
    if config.model not in ("gcnplus", "gcn"):
        raise InvalidConfig("smoothness curves support gcnplus and gcn")
    depths = [int(k) for k in depths]
    if not depths or min(depths) < 0 or (config.model == "gcn" and trained and min(depths) < 1):
        raise InvalidConfig(f"invalid depth list {depths}")
    X = prepare_features(ds, row_norm)
    curves, records = {}, []
    for k in depths:
        if trained:
            cfg = depth_config(config, k)
            rec, model, params = fit(ds, X, cfg, split_for(ds, split, cfg.seed, *split_sizes))
            records.append(rec)
            Z = model.embed(params, model.prepare(X))
        else:
            Z = feature_embedding(ds, X, config, k)
        curves[str(k)] = smoothness_report(ds.graph, Z).to_dict()
    cfg = {"train": config.to_dict(), "depths": depths, "trained": trained, "split": split,
           "row_norm": row_norm}
    if echo:
        cfg["args"] = echo
    return RunReport("smoothness-curve", ds.meta, cfg, records, curves=curves).finalize()
