import json
import logging
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcnplus.data import (
    Dataset,
    SbmSpec,
    SplitMasks,
    generate_sbm,
    load_dataset,
    row_normalize,
    sample_split,
    write_dataset,
)
from gcnplus.errors import (
    DataError,
    InconsistentDims,
    InfeasibleSpec,
    IoError,
    LabelOutOfRange,
    MissingFile,
    OverlappingMasks,
    ParseError,
    SchemaMismatch,
)
from gcnplus.graph import build_csr
from gcnplus.results import RunRecord, RunReport, read_results, write_results


def tiny_dataset():
    g = build_csr([(0, 1), (1, 2)], 3)
    masks = SplitMasks([True, False, False], [False, True, False], [False, False, True])
    return Dataset("tiny", g, [[1.0, 0.0], [0.5, 0.5], [0.1, 1e-17]], [0, 1, 0], masks, 2)


def small_spec(**kw):
    kw = {"val_size": 40, "test_size": 80, **kw}
    return SbmSpec(**kw)


def write_files(root, **files):
    base = {
        "meta.json": json.dumps({"name": "t", "n": 3, "d": 2, "c": 2}),
        "graph.tsv": "0\t1\n1\t2\n",
        "features.tsv": "1\t0\n0\t1\n1\t1\n",
        "labels.tsv": "0\n1\n0\n",
        "masks.tsv": "train\nval\ntest\n",
    }
    base.update(files)
    root.mkdir(exist_ok=True)
    for name, text in base.items():
        if text is not None:
            (root / name).write_text(text)
    return root


def test_tiny_round_trip(tmp_path):
    ds = tiny_dataset()
    write_dataset(ds, tmp_path / "d")
    back = load_dataset(tmp_path / "d")
    assert back == ds
    assert back.meta == {"name": "tiny", "n": 3, "d": 2, "c": 2}
    assert back.features[2, 1] == 1e-17


def test_written_format(tmp_path):
    write_dataset(tiny_dataset(), tmp_path)
    assert (tmp_path / "graph.tsv").read_text() == "0\t1\n1\t2\n"
    assert (tmp_path / "labels.tsv").read_text() == "0\n1\n0\n"
    assert (tmp_path / "masks.tsv").read_text() == "train\nval\ntest\n"
    assert json.loads((tmp_path / "meta.json").read_text()) == {"name": "tiny", "n": 3, "d": 2, "c": 2}


def test_deterministic_bytes(tmp_path):
    ds = generate_sbm(SbmSpec(n=120, num_classes=3, p_in=0.2, p_out=0.02, feature_dim=4,
                              nodes_per_class_train=5, val_size=20, test_size=40, seed=9))
    write_dataset(ds, tmp_path / "a")
    write_dataset(load_dataset(tmp_path / "a"), tmp_path / "b")
    for name in ("meta.json", "graph.tsv", "features.tsv", "labels.tsv", "masks.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "graph.tsv").read_text().splitlines()
    pairs = [tuple(map(int, ln.split("\t"))) for ln in lines]
    assert pairs == sorted(pairs) and all(u < v for u, v in pairs)


def test_empty_edge_round_trip(tmp_path):
    g = build_csr([], 2)
    ds = Dataset("e", g, [[1.0], [2.0]], [0, 0], SplitMasks([True, False], [False, True], [False, False]), 1)
    write_dataset(ds, tmp_path)
    assert (tmp_path / "graph.tsv").read_text() == ""
    assert load_dataset(tmp_path) == ds


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), noise=st.floats(0.0, 3.0))
def test_sbm_round_trip(tmp_path_factory, seed, noise):
    ds = generate_sbm(SbmSpec(n=60, num_classes=3, p_in=0.3, p_out=0.05, feature_dim=3,
                              feature_noise=noise, nodes_per_class_train=2, val_size=10,
                              test_size=10, seed=seed))
    path = tmp_path_factory.mktemp("rt")
    write_dataset(ds, path)
    assert load_dataset(path) == ds


def test_missing_file(tmp_path):
    write_files(tmp_path, **{"labels.tsv": None})
    with pytest.raises(MissingFile):
        load_dataset(tmp_path)


def test_parse_error_line_number(tmp_path):
    write_files(tmp_path, **{"features.tsv": "1\t0\n0\tx\n1\t1\n"})
    with pytest.raises(ParseError) as info:
        load_dataset(tmp_path)
    assert info.value.lineno == 2
    write_files(tmp_path, **{"features.tsv": "1\t0\n0\t1\n1\t1\n", "graph.tsv": "0\t1\n1\n"})
    with pytest.raises(ParseError) as info:
        load_dataset(tmp_path)
    assert info.value.lineno == 2


def test_dimension_errors(tmp_path):
    write_files(tmp_path, **{"features.tsv": "1\t0\n0\t1\n"})
    with pytest.raises(InconsistentDims):
        load_dataset(tmp_path)
    write_files(tmp_path, **{"features.tsv": "1\t0\n0\t1\n1\t1\t1\n"})
    with pytest.raises(InconsistentDims):
        load_dataset(tmp_path)
    write_files(tmp_path, **{"features.tsv": "1\t0\n0\t1\n1\t1\n", "graph.tsv": "0\t3\n"})
    with pytest.raises(InconsistentDims):
        load_dataset(tmp_path)


def test_label_out_of_range(tmp_path):
    write_files(tmp_path, **{"labels.tsv": "0\n2\n0\n"})
    with pytest.raises(LabelOutOfRange):
        load_dataset(tmp_path)


def test_overlapping_masks(tmp_path):
    write_files(tmp_path, **{"masks.tsv": "train\ttest\nval\nnone\n"})
    with pytest.raises(InconsistentDims):
        load_dataset(tmp_path)
    with pytest.raises(OverlappingMasks):
        SplitMasks([True, False], [False, False], [True, False])
    assert issubclass(OverlappingMasks, InconsistentDims) and issubclass(InconsistentDims, DataError)


def test_unknown_split_tag(tmp_path):
    write_files(tmp_path, **{"masks.tsv": "train\nvalid\ntest\n"})
    with pytest.raises(ParseError):
        load_dataset(tmp_path)


def test_duplicates_and_self_loops_dropped(tmp_path, caplog):
    write_files(tmp_path, **{"graph.tsv": "0\t1\n1\t0\n1\t1\n1\t2\n0\t1\n"})
    with caplog.at_level(logging.INFO, logger="gcnplus"):
        ds = load_dataset(tmp_path)
    assert ds.graph.num_edges == 2
    assert ds.raw_edge_count == 5
    assert "dropped 1 self-loops and 2 duplicate edges" in caplog.text


def test_write_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        write_dataset(tiny_dataset(), blocker / "sub")


def test_sbm_deterministic_and_balanced():
    spec = SbmSpec(n=300, num_classes=3, seed=4, nodes_per_class_train=10, val_size=50, test_size=100)
    a, b = generate_sbm(spec), generate_sbm(spec)
    assert a == b
    assert np.bincount(a.labels).tolist() == [100, 100, 100]
    assert a.masks.train.sum() == 30 and a.masks.val.sum() == 50 and a.masks.test.sum() == 100
    for k in range(3):
        assert (a.labels[a.masks.train] == k).sum() == 10
    assert generate_sbm(SbmSpec(n=300, num_classes=3, seed=5, nodes_per_class_train=10,
                                val_size=50, test_size=100)) != a


def test_sbm_p_out_zero():
    ds = generate_sbm(small_spec(n=200, num_classes=4, p_in=0.2, p_out=0.0, seed=1))
    e = ds.graph.edge_array()
    assert len(e) > 0
    assert np.all(ds.labels[e[:, 0]] == ds.labels[e[:, 1]])


def test_sbm_feature_centroids():
    ds = generate_sbm(small_spec(n=200, num_classes=4, feature_dim=6, feature_noise=0.0, seed=2))
    expected = np.zeros((200, 6))
    expected[np.arange(200), ds.labels] = 1.0
    assert np.array_equal(ds.features, expected)


def test_sbm_modularity():
    ds = generate_sbm(small_spec(n=400, num_classes=4, p_in=0.1, p_out=0.005, seed=0))
    G = nx.Graph()
    G.add_nodes_from(range(400))
    G.add_edges_from(map(tuple, ds.graph.edge_array()))
    parts = [set(np.flatnonzero(ds.labels == k).tolist()) for k in range(4)]
    assert nx.community.modularity(G, parts) > 0.5


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sbm_density_within_three_sigma(seed):
    n, c, p_in, p_out = 400, 4, 0.1, 0.01
    ds = generate_sbm(small_spec(n=n, num_classes=c, p_in=p_in, p_out=p_out, seed=seed))
    e = ds.graph.edge_array()
    same = ds.labels[e[:, 0]] == ds.labels[e[:, 1]]
    sizes = np.bincount(ds.labels)
    pairs_in = int(sum(s * (s - 1) // 2 for s in sizes))
    pairs_out = n * (n - 1) // 2 - pairs_in
    for count, pairs, p in ((same.sum(), pairs_in, p_in), ((~same).sum(), pairs_out, p_out)):
        sigma = math.sqrt(pairs * p * (1 - p))
        assert abs(count - pairs * p) <= 3 * sigma


def test_sbm_infeasible():
    with pytest.raises(InfeasibleSpec):
        generate_sbm(SbmSpec(n=10, num_classes=4, feature_dim=2))
    with pytest.raises(InfeasibleSpec):
        generate_sbm(SbmSpec(n=100, num_classes=2, val_size=90, test_size=90))
    with pytest.raises(InfeasibleSpec):
        generate_sbm(SbmSpec(n=100, p_in=1.5))


def test_sample_split_sizes():
    labels = np.repeat(np.arange(3), 50)
    m = sample_split(labels, 3, per_class=5, val_size=30, test_size=60, rng=0)
    assert m.train.sum() == 15 and m.val.sum() == 30 and m.test.sum() == 60
    assert sample_split(labels, 3, 5, 30, 60, rng=0) == m
    with pytest.raises(InfeasibleSpec):
        sample_split(labels, 3, per_class=60)


def test_row_normalize():
    X = np.array([[1.0, 3.0], [0.0, 0.0], [2.0, 2.0]])
    R = row_normalize(X)
    assert np.array_equal(R, [[0.25, 0.75], [0.0, 0.0], [0.5, 0.5]])


def sample_report():
    runs = [RunRecord(s, 0.1 + s / 3, 0.5, 10 + s, 0.01 * s) for s in range(3)]
    return RunReport("train", {"name": "x", "n": 3, "d": 2, "c": 2}, {"alpha": 9.0}, runs,
                     curves={"2": {"tr_L": 1 / 3}}).finalize()


def test_results_round_trip(tmp_path):
    rep = sample_report()
    write_results(rep, tmp_path / "r.json")
    back = read_results(tmp_path / "r.json")
    assert back == rep
    assert back.runs[1].test_accuracy == 0.1 + 1 / 3


def test_results_full_precision(tmp_path):
    write_results(sample_report(), tmp_path / "r.json")
    text = (tmp_path / "r.json").read_text()
    assert repr(0.1 + 1 / 3) in text and "0.3333333333333333" in text


def test_results_schema_mismatch(tmp_path):
    d = sample_report().to_dict()
    d["schema_version"] = 99
    (tmp_path / "r.json").write_text(json.dumps(d))
    with pytest.raises(SchemaMismatch):
        read_results(tmp_path / "r.json")
    with pytest.raises(SchemaMismatch):
        RunReport.from_dict(d)
    with pytest.raises(SchemaMismatch):
        write_results({"x": 1}, tmp_path / "bad.json")


def test_results_io_error(tmp_path):
    with pytest.raises(IoError):
        read_results(tmp_path / "absent.json")


def test_aggregate_recomputable():
    rep = sample_report()
    accs = [r.test_accuracy for r in rep.runs]
    assert rep.aggregate["mean"] == math.fsum(accs) / 3
    assert rep.aggregate["std"] == pytest.approx(np.std(accs), abs=1e-15)
