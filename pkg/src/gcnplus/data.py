"""Dataset directories, synthetic planted-partition fixtures and split sampling.

A dataset directory holds five UTF-8 files::

    meta.json     {"name": str, "n": int, "d": int, "c": int}
    graph.tsv     "u<TAB>v" per undirected edge, u < v, 0-based, sorted
    features.tsv  n lines of d tab-separated floats
    labels.tsv    n lines, one integer in [0, c)
    masks.tsv     n lines, one of train / val / test / none
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InconsistentDims,
    InfeasibleSpec,
    IoError,
    LabelOutOfRange,
    MissingFile,
    OverlappingMasks,
    ParseError,
)
from .graph import CsrGraph, build_csr

log = logging.getLogger(__name__)

FILES = ("meta.json", "graph.tsv", "features.tsv", "labels.tsv", "masks.tsv")
SPLIT_NAMES = ("train", "val", "test", "none")


@dataclass(eq=False)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.train = np.asarray(self.train, dtype=bool)
        self.val = np.asarray(self.val, dtype=bool)
        self.test = np.asarray(self.test, dtype=bool)
        if not (self.train.shape == self.val.shape == self.test.shape):
            raise InconsistentDims("mask lengths differ")
        if (self.train & self.val).any() or (self.train & self.test).any() or (self.val & self.test).any():
            raise OverlappingMasks("train/val/test masks overlap")
        if not self.train.any():
            raise InconsistentDims("train mask is empty")

    def __eq__(self, other):
        return (isinstance(other, SplitMasks) and np.array_equal(self.train, other.train)
                and np.array_equal(self.val, other.val) and np.array_equal(self.test, other.test))

    def names(self) -> list[str]:
        out = np.full(self.train.size, "none", dtype=object)
        out[self.train] = "train"
        out[self.val] = "val"
        out[self.test] = "test"
        return list(out)


@dataclass(eq=False)
class Dataset:
    name: str
    graph: CsrGraph
    features: np.ndarray
    labels: np.ndarray
    masks: SplitMasks
    num_classes: int
    raw_edge_count: int | None = field(default=None)

    def __post_init__(self):
        n = self.graph.n
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise InconsistentDims(f"features shape {self.features.shape} does not match n={n}")
        if self.labels.shape != (n,):
            raise InconsistentDims(f"labels shape {self.labels.shape} does not match n={n}")
        if self.masks.train.size != n:
            raise InconsistentDims(f"mask length {self.masks.train.size} does not match n={n}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            bad = int(np.flatnonzero((self.labels < 0) | (self.labels >= self.num_classes))[0])
            raise LabelOutOfRange(f"node {bad} has label {self.labels[bad]} outside [0, {self.num_classes})")
        if not np.isfinite(self.features).all():
            raise InconsistentDims("features contain non-finite values")

    @property
    def meta(self) -> dict:
        return {"name": self.name, "n": self.graph.n, "d": int(self.features.shape[1]), "c": int(self.num_classes)}

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.meta == other.meta
                and np.array_equal(self.graph.row_offsets, other.graph.row_offsets)
                and np.array_equal(self.graph.col_indices, other.graph.col_indices)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and self.masks == other.masks)

    def with_masks(self, masks: SplitMasks) -> "Dataset":
        return Dataset(self.name, self.graph, self.features, self.labels, masks,
                       self.num_classes, self.raw_edge_count)


def _read_lines(path: Path) -> list[str]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise MissingFile(f"missing dataset file {path}") from exc
    except OSError as exc:
        raise IoError(str(exc)) from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_dataset(dir_path) -> Dataset:
    """Read and validate a dataset directory.

    Repeated edges (either orientation) and self-loops in ``graph.tsv`` are
    dropped with a logged count before the graph is built.
    """
    root = Path(dir_path)
    for name in FILES:
        if not (root / name).is_file():
            raise MissingFile(f"missing dataset file {root / name}")
    try:
        meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(root / "meta.json", exc.lineno, exc.msg) from exc
    try:
        n, d, c = int(meta["n"]), int(meta["d"]), int(meta["c"])
        name = str(meta["name"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(root / "meta.json", 1, f"bad meta field: {exc}") from exc

    path = root / "graph.tsv"
    edges = []
    for i, line in enumerate(_read_lines(path), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(path, i, f"expected 2 fields, got {len(parts)}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ParseError(path, i, str(exc)) from exc
    raw = len(edges)
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise InconsistentDims(f"graph.tsv references a node outside [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    loops = raw - len(e)
    e = np.unique(np.sort(e, axis=1), axis=0)
    dups = raw - loops - len(e)
    if loops or dups:
        log.info("%s: dropped %d self-loops and %d duplicate edges (%d raw lines, %d kept)",
                 name, loops, dups, raw, len(e))
    graph = build_csr(e, n)

    path = root / "features.tsv"
    lines = _read_lines(path)
    if len(lines) != n:
        raise InconsistentDims(f"features.tsv has {len(lines)} rows, meta says n={n}")
    features = np.empty((n, d))
    for i, line in enumerate(lines, 1):
        try:
            row = np.array(line.split("\t"), dtype=np.float64) if d else np.empty(0)
        except ValueError as exc:
            raise ParseError(path, i, str(exc)) from exc
        if row.size != d:
            raise InconsistentDims(f"{path}:{i}: {row.size} features, meta says d={d}")
        features[i - 1] = row

    path = root / "labels.tsv"
    lines = _read_lines(path)
    if len(lines) != n:
        raise InconsistentDims(f"labels.tsv has {len(lines)} rows, meta says n={n}")
    labels = np.empty(n, dtype=np.int64)
    for i, line in enumerate(lines, 1):
        try:
            labels[i - 1] = int(line.strip())
        except ValueError as exc:
            raise ParseError(path, i, str(exc)) from exc

    path = root / "masks.tsv"
    lines = _read_lines(path)
    if len(lines) != n:
        raise InconsistentDims(f"masks.tsv has {len(lines)} rows, meta says n={n}")
    tags = []
    for i, line in enumerate(lines, 1):
        tokens = [t for t in line.replace(",", "\t").split("\t") if t.strip()]
        if len(tokens) > 1:
            raise OverlappingMasks(f"{path}:{i}: node assigned to several splits {tokens}")
        tag = tokens[0].strip() if tokens else ""
        if tag not in SPLIT_NAMES:
            raise ParseError(path, i, f"unknown split {tag!r}")
        tags.append(tag)
    tags = np.array(tags)
    masks = SplitMasks(tags == "train", tags == "val", tags == "test")
    return Dataset(name, graph, features, labels, masks, c, raw_edge_count=raw)


def write_dataset(dataset: Dataset, dir_path) -> None:
    """Write the five-file directory; output bytes depend only on the dataset."""
    root = Path(dir_path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / "meta.json").write_text(json.dumps(dataset.meta, sort_keys=True) + "\n", encoding="utf-8")
        edges = dataset.graph.edge_array()
        (root / "graph.tsv").write_text("".join(f"{u}\t{v}\n" for u, v in edges), encoding="utf-8")
        # repr gives the shortest string that round-trips the double exactly
        (root / "features.tsv").write_text(
            "".join("\t".join(repr(float(x)) for x in row) + "\n" for row in dataset.features),
            encoding="utf-8")
        (root / "labels.tsv").write_text("".join(f"{int(y)}\n" for y in dataset.labels), encoding="utf-8")
        (root / "masks.tsv").write_text("".join(f"{t}\n" for t in dataset.masks.names()), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write dataset to {root}: {exc}") from exc


@dataclass(frozen=True)
class SbmSpec:
    n: int = 1000
    num_classes: int = 4
    p_in: float = 0.02
    p_out: float = 0.002
    feature_dim: int = 16
    feature_noise: float = 1.0
    seed: int = 0
    nodes_per_class_train: int = 20
    val_size: int = 200
    test_size: int = 500
    name: str = "sbm"


def sbm_edges(block: np.ndarray, p_in: float, p_out: float, rng: np.random.Generator) -> np.ndarray:
    """Sample each unordered pair independently: p_in within a block, p_out across."""
    n = block.size
    iu, ju = np.triu_indices(n, k=1)
    same = block[iu] == block[ju]
    p = np.where(same, p_in, p_out)
    hit = rng.random(iu.size) < p
    return np.column_stack([iu[hit], ju[hit]])


def generate_sbm(spec: SbmSpec) -> Dataset:
    """Planted-partition graph with noisy one-hot class-centroid features."""
    c = spec.num_classes
    if spec.n < 1 or c < 1:
        raise InfeasibleSpec("n and num_classes must be positive")
    if not (0.0 <= spec.p_out <= 1.0 and 0.0 <= spec.p_in <= 1.0):
        raise InfeasibleSpec("edge probabilities must lie in [0, 1]")
    if spec.feature_dim < c:
        raise InfeasibleSpec(f"feature_dim={spec.feature_dim} cannot hold {c} one-hot centroids")
    sizes = np.full(c, spec.n // c)
    sizes[: spec.n % c] += 1
    if sizes.min() < spec.nodes_per_class_train:
        raise InfeasibleSpec("a class has fewer nodes than nodes_per_class_train")
    if c * spec.nodes_per_class_train + spec.val_size + spec.test_size > spec.n:
        raise InfeasibleSpec("split sizes exceed n")
    if spec.nodes_per_class_train < 1:
        raise InfeasibleSpec("need at least one training node per class")

    rng = np.random.default_rng(spec.seed)
    labels = rng.permutation(np.repeat(np.arange(c), sizes))
    edges = sbm_edges(labels, spec.p_in, spec.p_out, rng)
    graph = build_csr(edges, spec.n)
    features = np.zeros((spec.n, spec.feature_dim))
    features[np.arange(spec.n), labels] = 1.0
    features += spec.feature_noise * rng.standard_normal(features.shape)
    masks = sample_split(labels, c, spec.nodes_per_class_train, spec.val_size, spec.test_size, rng)
    return Dataset(spec.name, graph, features, labels, masks, c, raw_edge_count=len(edges))


def sample_split(labels, num_classes: int, per_class: int = 20, val_size: int = 500,
                 test_size: int = 1000, rng=None) -> SplitMasks:
    """``per_class`` training nodes per class, then val/test from the rest."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(rng)
    n = labels.size
    train = np.zeros(n, dtype=bool)
    for k in range(num_classes):
        members = np.flatnonzero(labels == k)
        if members.size < per_class:
            raise InfeasibleSpec(f"class {k} has {members.size} nodes, need {per_class} for training")
        train[rng.choice(members, per_class, replace=False)] = True
    rest = rng.permutation(np.flatnonzero(~train))
    if val_size + test_size > rest.size:
        raise InfeasibleSpec(f"val+test={val_size + test_size} exceeds {rest.size} remaining nodes")
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    val[rest[:val_size]] = True
    test[rest[val_size:val_size + test_size]] = True
    return SplitMasks(train, val, test)


def row_normalize(features: np.ndarray) -> np.ndarray:
    """Divide each row by its sum; zero rows are left alone."""
    s = features.sum(axis=1, keepdims=True)
    s[s == 0] = 1.0
    return features / s
