"""Over-smoothing diagnostics.

All pair sums run over unordered pairs. The disconnected-pair (complement)
energy is obtained from ``pairwise_total - dirichlet_energy``; the complement
graph itself is never built.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateGraph
from .graph import CsrGraph, check_features, complement_edge_counts

_EDGE_CHUNK = 1 << 16


def dirichlet_energy(graph: CsrGraph, X) -> float:
    """Sum over stored edges {i, j} of ||x_i - x_j||^2, i.e. Tr(X^T L X)."""
    X = check_features(graph, X)
    edges = graph.edge_array()
    total = 0.0
    for start in range(0, len(edges), _EDGE_CHUNK):
        e = edges[start:start + _EDGE_CHUNK]
        diff = X[e[:, 0]] - X[e[:, 1]]
        total += float(np.einsum("ij,ij->", diff, diff))
    return total


def pairwise_total(X) -> float:
    """Sum over unordered pairs i < j of ||x_i - x_j||^2.

    Evaluated as ``n ||X||_F^2 - ||1^T X||^2`` on the column-centered matrix,
    where the second term vanishes up to rounding.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        return 0.0
    Xc = X - X.mean(axis=0, keepdims=True)
    colsum = Xc.sum(axis=0)
    return float(n * np.einsum("ij,ij->", Xc, Xc) - colsum @ colsum)


@dataclass(frozen=True)
class SmoothnessReport:
    """Energies and fraction metrics; undefined entries are ``None``."""

    tr_L: float
    tr_Lprime: float
    m_overall: float
    d_smooth: Optional[float]
    d_non_smooth: Optional[float]
    d_overall: Optional[float]
    m_smooth: Optional[float]
    m_non_smooth: Optional[float]
    num_E: int
    num_E_prime: int

    @property
    def fractions_defined(self) -> bool:
        return self.m_smooth is not None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SmoothnessReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def smoothness_report(graph: CsrGraph, X, strict: bool = False) -> SmoothnessReport:
    """Connected/disconnected pair energies and their per-edge fractions.

    With ``strict=True`` a :class:`DegenerateGraph` is raised when the fractions
    are undefined (no edges, complete graph, or zero total distance); the
    exception carries the partial report.
    """
    X = check_features(graph, X)
    num_e, num_ep = complement_edge_counts(graph)
    tr_l = dirichlet_energy(graph, X)
    total = pairwise_total(X)
    tr_lp = total - tr_l
    if abs(tr_lp) <= 1e-12 * max(total, 1.0) or num_ep == 0:
        # exact cancellation (e.g. complete graph) should not leave -1e-17 noise
        tr_lp = max(tr_lp, 0.0) if num_ep else 0.0

    d_s = tr_l / num_e if num_e else None
    d_ns = tr_lp / num_ep if num_ep else None
    d_all = d_s + d_ns if d_s is not None and d_ns is not None else None
    if d_all is not None and d_all > 0 and math.isfinite(d_all):
        m_s, m_ns = d_s / d_all, d_ns / d_all
    else:
        m_s = m_ns = None

    report = SmoothnessReport(
        tr_L=tr_l, tr_Lprime=tr_lp, m_overall=tr_l + tr_lp,
        d_smooth=d_s, d_non_smooth=d_ns, d_overall=d_all,
        m_smooth=m_s, m_non_smooth=m_ns, num_E=num_e, num_E_prime=num_ep,
    )
    if strict and m_s is None:
        if not num_e or not num_ep:
            why = f"num(E)={num_e}, num(E')={num_ep}"
        else:
            why = "total pairwise distance is zero"
        raise DegenerateGraph(f"fraction metrics undefined: {why}", report=report)
    return report
