"""Graph-regularized smoothing: the objective, its closed form, and power iteration.

Two kernel families share one recurrence ``Z <- mu * A_hat Z + (1 - mu) H``:

* ``case1`` (no disconnected-pair term): ``A_hat = A~`` and ``mu = alpha / (1 + alpha)``.
* ``case2`` (disconnected pairs pushed apart with weight ``beta``)::

      A_hat = A~ + beta / (alpha + beta) * D~^{-1} (n I - J)      (rw)
      A_hat = A~ + beta / (alpha + beta) * D~^{-1/2} (n I - J) D~^{-1/2}   (sym)

  with ``mu = (alpha + beta) / (1 + alpha + beta)``. ``J`` (all ones) is never
  formed; ``J Z`` is the broadcast of the column sums of ``Z``.

Nothing in here holds trainable state.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BetaOutOfRange, DenseLimitExceeded, InvalidConfig, SingularMatrix
from .graph import CsrGraph, NormalizationKind, apply_normalized, apply_normalized_transpose, check_features
from .metrics import dirichlet_energy, pairwise_total

DEFAULT_DENSE_LIMIT = 2000


class Kernel(str, enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"

    @classmethod
    def parse(cls, value) -> "Kernel":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class PropagationConfig:
    kernel: Kernel = Kernel.CASE1
    kind: NormalizationKind = NormalizationKind.SYM
    alpha: float = 9.0
    beta: float = 0.0
    hops: int = 16

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel.parse(self.kernel))
        object.__setattr__(self, "kind", NormalizationKind.parse(self.kind))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if int(self.hops) != self.hops or self.hops < 0:
            raise InvalidConfig(f"hops must be a nonnegative integer, got {self.hops}")
        object.__setattr__(self, "hops", int(self.hops))
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidConfig(f"alpha must be finite and >= 0, got {self.alpha}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InvalidConfig(f"beta must be finite and >= 0, got {self.beta}")
        if self.kernel is Kernel.CASE1 and self.beta != 0.0:
            raise InvalidConfig("case1 requires beta == 0")

    @property
    def mu(self) -> float:
        return mu_of(self)

    def replace(self, **changes) -> "PropagationConfig":
        fields = dict(kernel=self.kernel, kind=self.kind, alpha=self.alpha, beta=self.beta, hops=self.hops)
        fields.update(changes)
        return PropagationConfig(**fields)

    def to_dict(self) -> dict:
        return {"kernel": self.kernel.value, "kind": self.kind.value,
                "alpha": self.alpha, "beta": self.beta, "hops": self.hops}


def mu_of(config: PropagationConfig) -> float:
    a, b = config.alpha, config.beta
    if config.kernel is Kernel.CASE1:
        return a / (1.0 + a)
    return (a + b) / (1.0 + a + b)


def check_beta(config: PropagationConfig, n: int, allow_zero_beta: bool = False) -> None:
    """Case-2 guard: 0 < beta < 1/n (the invertibility condition)."""
    if config.kernel is not Kernel.CASE2:
        return
    if config.beta == 0.0 and not allow_zero_beta:
        raise BetaOutOfRange("case2 needs beta > 0 (use case1 for beta == 0)")
    if not config.beta < 1.0 / n:
        raise BetaOutOfRange(f"case2 needs beta < 1/n = {1.0 / n:.6g}, got {config.beta:.6g}")


def _correction_scale(config: PropagationConfig) -> float:
    s = config.alpha + config.beta
    return config.beta / s if s > 0 else 0.0


class PropagationOperator:
    """A_hat bound to a graph; immutable after construction."""

    def __init__(self, graph: CsrGraph, config: PropagationConfig, allow_zero_beta: bool = False):
        check_beta(config, graph.n, allow_zero_beta)
        self.graph = graph
        self.config = config
        self.mu = mu_of(config)
        self.scale = _correction_scale(config) if config.kernel is Kernel.CASE2 else 0.0
        self.inv_deg = 1.0 / graph.tilde_degrees
        self.inv_sqrt_deg = 1.0 / np.sqrt(graph.tilde_degrees)
        for a in (self.inv_deg, self.inv_sqrt_deg):
            a.setflags(write=False)

    @property
    def kind(self) -> NormalizationKind:
        return self.config.kind

    @property
    def hops(self) -> int:
        return self.config.hops

    def __repr__(self) -> str:
        c = self.config
        return (f"PropagationOperator({c.kernel.value}, {c.kind.value}, alpha={c.alpha:g}, "
                f"beta={c.beta:g}, hops={c.hops}, n={self.graph.n})")


def _centered_sum(Z: np.ndarray, n: int) -> np.ndarray:
    # (n I - J) Z
    return n * Z - Z.sum(axis=0, keepdims=True)


def apply_hat(op: PropagationOperator, Z) -> np.ndarray:
    Z = check_features(op.graph, Z)
    out = apply_normalized(op.graph, op.kind, Z)
    if op.scale == 0.0:
        return out
    n = op.graph.n
    if op.kind is NormalizationKind.RW:
        out += op.scale * op.inv_deg[:, None] * _centered_sum(Z, n)
    else:
        s = op.inv_sqrt_deg[:, None]
        out += op.scale * s * _centered_sum(s * Z, n)
    return out


def apply_hat_transpose(op: PropagationOperator, Z) -> np.ndarray:
    Z = check_features(op.graph, Z)
    out = apply_normalized_transpose(op.graph, op.kind, Z)
    if op.scale == 0.0:
        return out
    n = op.graph.n
    if op.kind is NormalizationKind.RW:
        # (D~^{-1}(nI - J))^T = (nI - J) D~^{-1}
        out += op.scale * _centered_sum(op.inv_deg[:, None] * Z, n)
    else:
        s = op.inv_sqrt_deg[:, None]
        out += op.scale * s * _centered_sum(s * Z, n)
    return out


def propagate(op: PropagationOperator, H, hops: int | None = None) -> np.ndarray:
    """Z^(K) of the power-iteration scheme started at Z^(0) = H."""
    H = check_features(op.graph, H)
    K = op.hops if hops is None else int(hops)
    mu = op.mu
    Z = H.copy()
    base = (1.0 - mu) * H
    for _ in range(K):
        Z = mu * apply_hat(op, Z) + base
    return Z


def propagate_transpose(op: PropagationOperator, G, hops: int | None = None) -> np.ndarray:
    """Adjoint of ``H -> propagate(op, H)`` applied to ``G``.

    The forward map is the polynomial ``mu^K A^K + (1 - mu) sum_{i<K} mu^i A^i``,
    so its transpose is the same recurrence driven by ``A_hat^T``.
    """
    G = check_features(op.graph, G)
    K = op.hops if hops is None else int(hops)
    mu = op.mu
    Z = G.copy()
    base = (1.0 - mu) * G
    for _ in range(K):
        Z = mu * apply_hat_transpose(op, Z) + base
    return Z


def propagate_until(op: PropagationOperator, H, tol: float = 1e-12, max_iter: int = 10_000):
    """Iterate until the relative step change drops below ``tol``.

    Returns ``(Z, iterations)``. Intended for oracle comparisons; training
    always uses a fixed hop count.
    """
    H = check_features(op.graph, H)
    mu = op.mu
    Z = H.copy()
    base = (1.0 - mu) * H
    for it in range(1, max_iter + 1):
        Z_next = mu * apply_hat(op, Z) + base
        step = np.linalg.norm(Z_next - Z)
        Z = Z_next
        if step <= tol * max(np.linalg.norm(Z), np.finfo(float).tiny):
            return Z, it
    return Z, max_iter


def dense_hat_matrix(graph: CsrGraph, config: PropagationConfig) -> np.ndarray:
    """Explicit n x n A_hat, built from dense D~, A~ and J."""
    n = graph.n
    A = graph.to_dense() + np.eye(n)
    dt = A.sum(axis=1)
    if config.kind is NormalizationKind.RW:
        Dm = np.diag(1.0 / dt)
        M = Dm @ A
        corr = Dm @ (n * np.eye(n) - np.ones((n, n)))
    else:
        Dm = np.diag(1.0 / np.sqrt(dt))
        M = Dm @ A @ Dm
        corr = Dm @ (n * np.eye(n) - np.ones((n, n))) @ Dm
    if config.kernel is Kernel.CASE2:
        M = M + _correction_scale(config) * corr
    return M


def closed_form_dense(graph: CsrGraph, config: PropagationConfig, H,
                      dense_limit: int = DEFAULT_DENSE_LIMIT, allow_zero_beta: bool = False) -> np.ndarray:
    """Exact fixed point ``(1 - mu) (I - mu A_hat)^{-1} H`` by a pivoted LU solve."""
    H = check_features(graph, H)
    if graph.n > dense_limit:
        raise DenseLimitExceeded(f"n={graph.n} exceeds dense limit {dense_limit}")
    check_beta(config, graph.n, allow_zero_beta)
    mu = mu_of(config)
    Q = np.eye(graph.n) - mu * dense_hat_matrix(graph, config)
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(Q, (1.0 - mu) * H)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            raise SingularMatrix(f"I - mu*A_hat is singular or ill-conditioned: {exc}") from exc


def _laplacian_apply(graph: CsrGraph, Z: np.ndarray) -> np.ndarray:
    return graph.degrees[:, None] * Z - graph.adjacency @ Z


def _complement_laplacian_apply(graph: CsrGraph, Z: np.ndarray) -> np.ndarray:
    # L' = n I - J - L
    return _centered_sum(Z, graph.n) - _laplacian_apply(graph, Z)


def objective_value(graph: CsrGraph, X, Xbar, alpha: float, beta: float = 0.0) -> float:
    """Degree-weighted fit + alpha * connected energy - beta * disconnected energy."""
    X = check_features(graph, X)
    Xbar = check_features(graph, Xbar)
    if X.shape != Xbar.shape:
        raise InvalidConfig(f"X {X.shape} and Xbar {Xbar.shape} differ in shape")
    fit = float(np.sum(graph.tilde_degrees[:, None] * (Xbar - X) ** 2))
    value = fit
    if alpha:
        value += alpha * dirichlet_energy(graph, Xbar)
    if beta:
        tr_l = dirichlet_energy(graph, Xbar)
        value -= beta * (pairwise_total(Xbar) - tr_l)
    return value


def normal_equation_residual(graph: CsrGraph, config: PropagationConfig, X, Xbar) -> np.ndarray:
    """Residual of the first-order optimality condition for ``Xbar``.

    rw:  (D~ + alpha L - beta L') Xbar - D~ X
    sym: (D~ + alpha L - beta L') D~^{-1/2} Xbar - D~^{1/2} X
    """
    X = check_features(graph, X)
    Xbar = check_features(graph, Xbar)
    dt = graph.tilde_degrees[:, None]
    if config.kind is NormalizationKind.RW:
        Y, rhs = Xbar, dt * X
    else:
        Y, rhs = Xbar / np.sqrt(dt), np.sqrt(dt) * X
    lhs = dt * Y + config.alpha * _laplacian_apply(graph, Y)
    if config.beta:
        lhs -= config.beta * _complement_laplacian_apply(graph, Y)
    return lhs - rhs
