"""Immutable undirected graphs in compressed-row form and their normalized operators.

Self-loops never live in the stored structure. They enter only through the
renormalized degree ``d~ = deg + 1`` when an operator is applied, so::

    A~_sym = D~^{-1/2} (A + I) D~^{-1/2}
    A~_rw  = D~^{-1} (A + I)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    DuplicateEdge,
    EmptyNodeSet,
    IndexOutOfRange,
    NoConvergence,
    SelfLoopInput,
)

__all__ = [
    "NormalizationKind",
    "CsrGraph",
    "build_csr",
    "apply_normalized",
    "apply_normalized_transpose",
    "complement_edge_counts",
    "spectral_radius_estimate",
    "check_features",
]


class NormalizationKind(str, enum.Enum):
    SYM = "sym"
    RW = "rw"

    @classmethod
    def parse(cls, value) -> "NormalizationKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Symmetric adjacency structure; build through :func:`build_csr`."""

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    degrees: np.ndarray

    @property
    def num_edges(self) -> int:
        return int(self.col_indices.size // 2)

    def neighbors(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    def edge_array(self) -> np.ndarray:
        """(num_edges, 2) array of stored edges with u < v, sorted."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = self.col_indices > rows
        return np.column_stack([rows[keep], self.col_indices[keep]])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.col_indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.col_indices, self.row_offsets), shape=(self.n, self.n))

    @cached_property
    def tilde_degrees(self) -> np.ndarray:
        return _frozen(self.degrees.astype(np.float64) + 1.0)

    @cached_property
    def _looped(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # CSR of A + I with the diagonal in sorted position
        rows = np.concatenate([np.repeat(np.arange(self.n), self.degrees), np.arange(self.n)])
        cols = np.concatenate([self.col_indices, np.arange(self.n)])
        order = np.lexsort((cols, rows))
        indptr = self.row_offsets + np.arange(self.n + 1)
        return indptr, rows[order], cols[order]

    @cached_property
    def _sym(self) -> sp.csr_matrix:
        indptr, rows, cols = self._looped
        dt = self.tilde_degrees
        data = 1.0 / np.sqrt(dt[rows] * dt[cols])
        return sp.csr_matrix((data, cols, indptr), shape=(self.n, self.n))

    @cached_property
    def _rw(self) -> sp.csr_matrix:
        indptr, rows, cols = self._looped
        data = 1.0 / self.tilde_degrees[rows]
        return sp.csr_matrix((data, cols, indptr), shape=(self.n, self.n))

    @cached_property
    def _rw_t(self) -> sp.csr_matrix:
        return self._rw.T.tocsr()

    def normalized(self, kind) -> sp.csr_matrix:
        """Sparse A~ (with self-loops) under the requested normalization."""
        kind = NormalizationKind.parse(kind)
        return self._sym if kind is NormalizationKind.SYM else self._rw

    def to_dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def __repr__(self) -> str:
        return f"CsrGraph(n={self.n}, num_edges={self.num_edges})"


def build_csr(edges, n: int) -> CsrGraph:
    """Validate an undirected edge list and store both directions.

    Duplicate edges (in either orientation) and self-loops are rejected
    rather than cleaned.
    """
    n = int(n)
    if n < 1:
        raise EmptyNodeSet("graph needs at least one node")
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if e.size == 0:
        e = e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise DimensionMismatch(f"edges must be pairs, got shape {e.shape}")
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise IndexOutOfRange(f"edge {tuple(bad)} has an endpoint outside [0, {n})")
    loops = e[:, 0] == e[:, 1]
    if loops.any():
        raise SelfLoopInput(f"self-loop on node {int(e[loops][0, 0])}")

    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    key = lo * n + hi
    uniq, counts = np.unique(key, return_counts=True)
    if (counts > 1).any():
        k = int(uniq[counts > 1][0])
        raise DuplicateEdge(f"edge ({k // n}, {k % n}) given more than once")

    rows = np.concatenate([lo, hi])
    cols = np.concatenate([hi, lo])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    degrees = np.bincount(rows, minlength=n).astype(np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=offsets[1:])
    return CsrGraph(n, _frozen(offsets), _frozen(cols.astype(np.int64)), _frozen(degrees))


def check_features(graph: CsrGraph, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != graph.n:
        raise DimensionMismatch(f"expected {graph.n} rows, got shape {X.shape}")
    return X


def apply_normalized(graph: CsrGraph, kind, X) -> np.ndarray:
    """Return A~ X; rows are summed in stored (ascending column) order."""
    X = check_features(graph, X)
    return graph.normalized(kind) @ X


def apply_normalized_transpose(graph: CsrGraph, kind, X) -> np.ndarray:
    X = check_features(graph, X)
    kind = NormalizationKind.parse(kind)
    if kind is NormalizationKind.SYM:
        return graph._sym @ X
    return graph._rw_t @ X


def complement_edge_counts(graph: CsrGraph) -> tuple[int, int]:
    num_e = graph.num_edges
    return num_e, graph.n * (graph.n - 1) // 2 - num_e


def spectral_radius_estimate(graph: CsrGraph, kind, iters: int = 1000, tol: float = 1e-10) -> float:
    """Power-method estimate of the largest |eigenvalue| of A~.

    The operator is entrywise nonnegative, so starting from the all-ones
    vector the norm ratio climbs to the Perron root. Raises
    :class:`NoConvergence` carrying the last estimate if ``iters`` runs out.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    op = graph.normalized(kind)
    x = np.ones(graph.n)
    prev = None
    for _ in range(iters):
        y = op @ x
        norm_y = float(np.linalg.norm(y))
        est = norm_y / float(np.linalg.norm(x))
        if prev is not None and abs(est - prev) <= tol * max(1.0, est):
            return est
        prev = est
        x = y / norm_y
    raise NoConvergence(f"power method did not settle in {iters} iterations", estimate=prev, iterations=iters)
