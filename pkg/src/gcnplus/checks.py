"""Randomized self-checks comparing fast paths against independent oracles.

Each check returns a list of :class:`CheckResult`. A convergence trial whose
error is above tolerance but whose contraction bound ``rho**K`` is also above
it is marked ``insufficient-K`` and does not count as a failure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BetaOutOfRange
from .graph import CsrGraph, build_csr, spectral_radius_estimate
from .metrics import smoothness_report
from .neural import GCNPlus, loss_and_grad
from .propagation import Kernel, PropagationConfig, PropagationOperator, closed_form_dense, propagate

PASS, FAIL, INSUFFICIENT = "pass", "fail", "insufficient-K"


@dataclass
class CheckResult:
    check: str
    detail: str
    value: float
    tol: float
    status: str
    bound: float | None = None

    @property
    def failed(self) -> bool:
        return self.status == FAIL


def random_graph(rng: np.random.Generator, n: int, p: float) -> CsrGraph:
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < p
    return build_csr(np.column_stack([iu[hit], ju[hit]]), n)


def config_for_mu(kernel, kind, mu: float, beta: float, hops: int) -> PropagationConfig:
    """Config whose derived mu equals ``mu``; case 2 splits alpha + beta."""
    total = mu / (1.0 - mu)
    if Kernel.parse(kernel) is Kernel.CASE1:
        return PropagationConfig(Kernel.CASE1, kind, alpha=total, beta=0.0, hops=hops)
    if beta > total:
        raise BetaOutOfRange(f"beta={beta} too large for mu={mu} (alpha would be negative)")
    return PropagationConfig(Kernel.CASE2, kind, alpha=total - beta, beta=beta, hops=hops)


def contraction_rate(config: PropagationConfig, n: int) -> float:
    # |eig(mu A_hat)| <= mu (1 + beta n / (alpha + beta))
    mu = config.mu
    if config.kernel is Kernel.CASE1:
        return mu
    return mu * (1.0 + config.beta * n / (config.alpha + config.beta))


def check_convergence(rng, trials=20, min_n=5, max_n=50, p=0.1, mus=(0.5, 0.9), hops=400,
                      beta=None, tol=1e-6):
    """Power iteration vs dense solve, relative Frobenius error."""
    if beta is not None and not beta < 1.0 / max_n:
        raise BetaOutOfRange(f"beta={beta} is not below 1/n for n up to {max_n}")
    out = []
    for t in range(trials):
        n = int(rng.integers(min_n, max_n + 1))
        g = random_graph(rng, n, p)
        H = rng.standard_normal((n, 3))
        for mu, kernel, kind in itertools.product(mus, ("case1", "case2"), ("sym", "rw")):
            b = (0.5 / n if beta is None else beta) if kernel == "case2" else 0.0
            cfg = config_for_mu(kernel, kind, mu, b, hops)
            exact = closed_form_dense(g, cfg, H)
            approx = propagate(PropagationOperator(g, cfg), H)
            err = float(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
            bound = contraction_rate(cfg, n) ** hops
            status = PASS if err <= tol else (INSUFFICIENT if bound > tol else FAIL)
            out.append(CheckResult("convergence", f"trial={t} n={n} mu={mu:g} {kernel}/{kind} K={hops}",
                                   err, tol, status, bound))
    return out


def brute_force_report(graph: CsrGraph, X: np.ndarray) -> dict:
    A = graph.to_dense()
    s = ns = 0.0
    e = ne = 0
    for i, j in itertools.combinations(range(graph.n), 2):
        dist = float(np.sum((X[i] - X[j]) ** 2))
        if A[i, j]:
            s, e = s + dist, e + 1
        else:
            ns, ne = ns + dist, ne + 1
    return {"tr_L": s, "tr_Lprime": ns, "d_smooth": s / e, "d_non_smooth": ns / ne}


def check_metrics(rng, trials=20, max_n=30, max_d=8, tol=1e-10):
    out = []
    done = 0
    while done < trials:
        n = int(rng.integers(3, max_n + 1))
        g = random_graph(rng, n, float(rng.uniform(0.1, 0.6)))
        if g.num_edges == 0 or g.num_edges == n * (n - 1) // 2:
            continue
        X = rng.standard_normal((n, int(rng.integers(1, max_d + 1))))
        rep = smoothness_report(g, X)
        ref = brute_force_report(g, X)
        err = max(abs(getattr(rep, k) - v) for k, v in ref.items())
        err = max(err, abs(rep.m_smooth + rep.m_non_smooth - 1.0))
        out.append(CheckResult("metrics", f"trial={done} n={n} d={X.shape[1]}", err, tol,
                               PASS if err <= tol else FAIL))
        done += 1
    return out


def finite_difference_error(model, params, X, y, mask, h=1e-5) -> float:
    _, grads = loss_and_grad(model, params, X, y, mask)
    worst = 0.0
    for k, p in params.items():
        fd = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up, _ = loss_and_grad(model, params, X, y, mask)
            p[idx] = orig - h
            dn, _ = loss_and_grad(model, params, X, y, mask)
            p[idx] = orig
            fd[idx] = (up - dn) / (2 * h)
        denom = max(np.linalg.norm(fd), np.linalg.norm(grads[k]), 1e-8)
        worst = max(worst, float(np.linalg.norm(fd - grads[k]) / denom))
    return worst


def check_gradients(rng, trials=2, hops=(0, 1, 4, 16), n=12, d=5, m=4, c=3, tol=1e-4):
    out = []
    for t in range(trials):
        g = random_graph(rng, n, 0.3)
        X = rng.standard_normal((n, d))
        y = rng.integers(0, c, n)
        mask = rng.random(n) < 0.5
        mask[0] = True
        for K, kernel, kind in itertools.product(hops, ("case1", "case2"), ("sym", "rw")):
            cfg = config_for_mu(kernel, kind, 0.8, 0.5 / n if kernel == "case2" else 0.0, K)
            model = GCNPlus(PropagationOperator(g, cfg), d, c, hidden=m, dropout=0.0)
            err = finite_difference_error(model, model.init(t), X, y, mask)
            out.append(CheckResult("gradient", f"trial={t} K={K} {kernel}/{kind}", err, tol,
                                   PASS if err <= tol else FAIL))
    return out


def check_spectral(rng, trials=10, max_n=50, tol=1e-9):
    out = []
    for t in range(trials):
        n = int(rng.integers(2, max_n + 1))
        g = random_graph(rng, n, float(rng.uniform(0.05, 0.5)))
        for kind in ("sym", "rw"):
            dense = float(np.max(np.abs(np.linalg.eigvals(g.normalized(kind).toarray()))))
            est = spectral_radius_estimate(g, kind, iters=50_000, tol=1e-13)
            worst = max(dense, est) - 1.0
            out.append(CheckResult("spectral", f"trial={t} n={n} {kind}", worst, tol,
                                   PASS if worst <= tol else FAIL))
    return out


def format_table(results) -> str:
    rows = [("check", "detail", "value", "tol", "bound", "status")]
    for r in results:
        rows.append((r.check, r.detail, f"{r.value:.3e}", f"{r.tol:.0e}",
                     "" if r.bound is None else f"{r.bound:.3e}", r.status))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows)
