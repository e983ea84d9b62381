import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcnplus.errors import BetaOutOfRange, DenseLimitExceeded, DimensionMismatch, InvalidConfig
from gcnplus.graph import apply_normalized, build_csr
from gcnplus.propagation import (
    Kernel,
    PropagationConfig,
    PropagationOperator,
    apply_hat,
    apply_hat_transpose,
    closed_form_dense,
    dense_hat_matrix,
    mu_of,
    normal_equation_residual,
    objective_value,
    propagate,
    propagate_transpose,
    propagate_until,
)

from conftest import random_graph


def brute_objective(graph, X, Xbar, alpha, beta):
    """Triple sum: fit over nodes, alpha over edges, beta over non-edges."""
    n = graph.n
    A = graph.to_dense()
    val = 0.0
    for i in range(n):
        val += (A[i].sum() + 1) * np.sum((Xbar[i] - X[i]) ** 2)
    for i in range(n):
        for j in range(i + 1, n):
            dist = np.sum((Xbar[i] - Xbar[j]) ** 2)
            val += alpha * dist if A[i, j] else -beta * dist
    return val


def case2(alpha, n, frac=0.5, kind="rw", hops=16):
    return PropagationConfig(Kernel.CASE2, kind, alpha=alpha, beta=frac / n, hops=hops)


# -- configuration -------------------------------------------------------------

def test_mu_values():
    assert mu_of(PropagationConfig("case1", alpha=9)) == pytest.approx(0.9, abs=1e-15)
    assert 1 - mu_of(PropagationConfig("case1", alpha=9)) == pytest.approx(0.1, abs=1e-15)
    assert mu_of(PropagationConfig("case1", alpha=1)) == 0.5
    assert mu_of(PropagationConfig("case2", alpha=4, beta=0.001)) == 4.001 / 5.001


def test_config_validation():
    with pytest.raises(InvalidConfig):
        PropagationConfig("case1", beta=0.1)
    with pytest.raises(InvalidConfig):
        PropagationConfig(alpha=-1)
    with pytest.raises(InvalidConfig):
        PropagationConfig(hops=-2)
    with pytest.raises(ValueError):
        PropagationConfig(kind="lap")


def test_beta_guard():
    g = build_csr([(0, 1), (1, 2)], 3)
    with pytest.raises(BetaOutOfRange):
        PropagationOperator(g, PropagationConfig("case2", alpha=1, beta=1 / 3))
    with pytest.raises(BetaOutOfRange):
        PropagationOperator(g, PropagationConfig("case2", alpha=1, beta=0.0))
    PropagationOperator(g, PropagationConfig("case2", alpha=1, beta=0.0), allow_zero_beta=True)
    PropagationOperator(g, PropagationConfig("case2", alpha=1, beta=0.33))
    with pytest.raises(BetaOutOfRange):
        closed_form_dense(g, PropagationConfig("case2", alpha=1, beta=0.4), np.ones((3, 1)))


# -- A_hat ---------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["sym", "rw"])
def test_hat_zero_beta_equals_normalized(kind, rng):
    g = random_graph(rng, 12, 0.3)
    Z = rng.standard_normal((12, 3))
    op = PropagationOperator(g, PropagationConfig("case2", kind, alpha=2, beta=0.0), allow_zero_beta=True)
    assert np.array_equal(apply_hat(op, Z), apply_normalized(g, kind, Z))


def test_hat_two_node_dense(edge2):
    cfg = PropagationConfig("case2", "rw", alpha=1, beta=0.1)
    op = PropagationOperator(edge2, cfg)
    Dinv = np.diag([0.5, 0.5])
    A_rw = Dinv @ np.array([[1.0, 1.0], [1.0, 1.0]])
    A_hat = A_rw + (0.1 * 2 * Dinv - 0.1 * Dinv @ np.ones((2, 2))) / 1.1
    Z = np.array([[1.0], [0.0]])
    np.testing.assert_allclose(apply_hat(op, Z), A_hat @ Z, rtol=0, atol=1e-15)
    np.testing.assert_allclose(dense_hat_matrix(edge2, cfg), A_hat, rtol=0, atol=1e-15)


def test_column_sum_identity():
    # (n I - J) Z with n = 3 and J Z = [[6], [6], [6]]
    from gcnplus.propagation import _centered_sum
    Z = np.array([[1.0], [2.0], [3.0]])
    np.testing.assert_array_equal(3 * Z - _centered_sum(Z, 3), [[6.0], [6.0], [6.0]])


@pytest.mark.parametrize("kind", ["sym", "rw"])
def test_hat_matches_dense(kind, rng):
    for _ in range(5):
        n = int(rng.integers(2, 21))
        g = random_graph(rng, n, 0.3)
        cfg = case2(1.5, n, 0.7, kind)
        op = PropagationOperator(g, cfg)
        Z = rng.standard_normal((n, 3))
        M = dense_hat_matrix(g, cfg)
        np.testing.assert_allclose(apply_hat(op, Z), M @ Z, rtol=0, atol=1e-12)
        np.testing.assert_allclose(apply_hat_transpose(op, Z), M.T @ Z, rtol=0, atol=1e-12)


def test_hat_transpose_sym_zero_beta(rng):
    g = random_graph(rng, 10, 0.3)
    op = PropagationOperator(g, PropagationConfig("case2", "sym", alpha=1, beta=0.0), allow_zero_beta=True)
    Z = rng.standard_normal((10, 2))
    assert np.array_equal(apply_hat_transpose(op, Z), apply_hat(op, Z))


@pytest.mark.parametrize("kind", ["sym", "rw"])
@pytest.mark.parametrize("kernel", ["case1", "case2"])
def test_hat_adjointness(kind, kernel, rng):
    for _ in range(10):
        g = random_graph(rng, 10, 0.3)
        cfg = case2(2.0, 10, 0.9, kind) if kernel == "case2" else PropagationConfig("case1", kind, alpha=2)
        op = PropagationOperator(g, cfg)
        X = rng.standard_normal((10, 3))
        Y = rng.standard_normal((10, 3))
        assert abs(np.sum(apply_hat(op, X) * Y) - np.sum(X * apply_hat_transpose(op, Y))) <= 1e-12


def test_hat_dimension_mismatch(edge2):
    op = PropagationOperator(edge2, PropagationConfig())
    with pytest.raises(DimensionMismatch):
        apply_hat(op, np.ones((3, 1)))


# -- power iteration -------------------------------------------------------------

@pytest.mark.parametrize("K", [0, 1, 5, 50])
def test_edgeless_fixed_point(K, rng):
    g = build_csr([], 6)
    H = rng.standard_normal((6, 2))
    op = PropagationOperator(g, PropagationConfig(alpha=3.0, hops=K))
    np.testing.assert_allclose(propagate(op, H), H, rtol=0, atol=1e-15)


def test_two_node_limit(edge2):
    op = PropagationOperator(edge2, PropagationConfig("case1", "rw", alpha=1, hops=200))
    H = [[1.0], [0.0]]
    np.testing.assert_allclose(propagate(op, H), [[0.75], [0.25]], rtol=0, atol=1e-14)
    np.testing.assert_allclose(closed_form_dense(edge2, op.config, H), [[0.75], [0.25]], rtol=0, atol=1e-14)


def test_one_hop_unrolled(rng):
    g = random_graph(rng, 15, 0.2)
    H = rng.standard_normal((15, 4))
    op = PropagationOperator(g, PropagationConfig("case1", "sym", alpha=9, hops=1))
    mu = op.mu
    np.testing.assert_allclose(propagate(op, H), mu * apply_normalized(g, "sym", H) + (1 - mu) * H,
                               rtol=0, atol=1e-15)


def test_zero_hops_identity(rng):
    g = random_graph(rng, 8, 0.4)
    H = rng.standard_normal((8, 2))
    op = PropagationOperator(g, PropagationConfig(hops=0))
    assert np.array_equal(propagate(op, H), H)
    assert np.array_equal(propagate_transpose(op, H), H)


def test_closed_form_matches_polynomial(rng):
    # (mu^K A^K + (1-mu) sum_{i<K} mu^i A^i) H, evaluated with dense powers
    g = random_graph(rng, 12, 0.3)
    cfg = case2(3.0, 12, 0.5, "sym", hops=7)
    op = PropagationOperator(g, cfg)
    H = rng.standard_normal((12, 2))
    M = dense_hat_matrix(g, cfg)
    mu, K = op.mu, 7
    P = mu ** K * np.linalg.matrix_power(M, K) + (1 - mu) * sum(mu ** i * np.linalg.matrix_power(M, i) for i in range(K))
    np.testing.assert_allclose(propagate(op, H), P @ H, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", ["sym", "rw"])
@pytest.mark.parametrize("kernel", ["case1", "case2"])
def test_convergence_to_closed_form(kind, kernel, rng):
    for _ in range(5):
        n = int(rng.integers(5, 101))
        g = random_graph(rng, n, 0.1)
        # mu = 0.9 in both families
        cfg = (PropagationConfig("case1", kind, alpha=9.0, hops=200) if kernel == "case1"
               else PropagationConfig("case2", kind, alpha=9.0 - 0.5 / n, beta=0.5 / n, hops=400))
        op = PropagationOperator(g, cfg)
        H = rng.standard_normal((n, 3))
        exact = closed_form_dense(g, cfg, H)
        rel = np.linalg.norm(propagate(op, H) - exact) / np.linalg.norm(exact)
        assert rel <= 1e-6


def test_geometric_decay(rng):
    g = random_graph(rng, 40, 0.1)
    cfg = PropagationConfig("case1", "sym", alpha=4.0)
    op = PropagationOperator(g, cfg)
    H = rng.standard_normal((40, 2))
    exact = closed_form_dense(g, cfg, H)
    errs = [np.linalg.norm(propagate(op, H, hops=k) - exact) for k in range(0, 60, 10)]
    C = errs[0]
    for k, e in zip(range(0, 60, 10), errs):
        assert e <= C * op.mu ** k * (1 + 1e-9) + 1e-14


def test_propagate_until(rng):
    g = random_graph(rng, 30, 0.15)
    cfg = case2(4.0, 30, 0.5, "rw")
    op = PropagationOperator(g, cfg)
    H = rng.standard_normal((30, 2))
    Z, iters = propagate_until(op, H, tol=1e-14)
    assert iters < 10_000
    np.testing.assert_allclose(Z, closed_form_dense(g, cfg, H), rtol=1e-10, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-2, 2), b=st.floats(-2, 2),
       kind=st.sampled_from(["sym", "rw"]), kernel=st.sampled_from(["case1", "case2"]))
def test_propagate_linear(seed, a, b, kind, kernel):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 10, 0.3)
    cfg = case2(2.0, 10, 0.5, kind, hops=8) if kernel == "case2" else PropagationConfig(kernel, kind, alpha=2.0, hops=8)
    op = PropagationOperator(g, cfg)
    X = rng.standard_normal((10, 2))
    Y = rng.standard_normal((10, 2))
    np.testing.assert_allclose(propagate(op, a * X + b * Y), a * propagate(op, X) + b * propagate(op, Y),
                               rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", ["sym", "rw"])
def test_case2_tiny_beta_matches_case1(kind, rng):
    g = random_graph(rng, 25, 0.2)
    H = rng.standard_normal((25, 3))
    z1 = propagate(PropagationOperator(g, PropagationConfig("case1", kind, alpha=4.0, hops=20)), H)
    z2 = propagate(PropagationOperator(g, PropagationConfig("case2", kind, alpha=4.0, beta=1e-12, hops=20)), H)
    assert np.max(np.abs(z1 - z2)) <= 1e-8


def test_propagate_transpose_sym_zero_beta(rng):
    g = random_graph(rng, 10, 0.3)
    op = PropagationOperator(g, PropagationConfig("case2", "sym", alpha=3.0, beta=0.0, hops=6), allow_zero_beta=True)
    G = rng.standard_normal((10, 2))
    assert np.array_equal(propagate_transpose(op, G), propagate(op, G))


@pytest.mark.parametrize("kind", ["sym", "rw"])
@pytest.mark.parametrize("kernel", ["case1", "case2"])
def test_propagate_transpose_finite_difference(kind, kernel, rng):
    n = 12
    g = random_graph(rng, n, 0.3)
    cfg = case2(2.0, n, 0.8, kind, hops=10) if kernel == "case2" else PropagationConfig("case1", kind, alpha=2.0, hops=10)
    op = PropagationOperator(g, cfg)
    H = rng.standard_normal((n, 3))
    W = rng.standard_normal((n, 3))

    def f(H):
        Z = propagate(op, H)
        return float(np.sum(np.sin(Z) * W))

    G = np.cos(propagate(op, H)) * W
    grad = propagate_transpose(op, G)
    dH = rng.standard_normal((n, 3))
    h = 1e-6
    fd = (f(H + h * dH) - f(H - h * dH)) / (2 * h)
    an = float(np.sum(grad * dH))
    assert abs(fd - an) <= 1e-6 * max(abs(an), 1.0)


# -- closed form and objective -------------------------------------------------

def test_closed_form_edgeless(rng):
    g = build_csr([], 4)
    H = rng.standard_normal((4, 2))
    np.testing.assert_allclose(closed_form_dense(g, PropagationConfig(alpha=5), H), H, rtol=0, atol=1e-15)


def test_dense_limit(rng):
    g = random_graph(rng, 30, 0.1)
    with pytest.raises(DenseLimitExceeded):
        closed_form_dense(g, PropagationConfig(), np.ones((30, 1)), dense_limit=20)


def test_objective_trivial(rng):
    g = random_graph(rng, 8, 0.4)
    X = rng.standard_normal((8, 3))
    assert objective_value(g, X, X, 0.0, 0.0) == 0.0
    Xbar = np.tile(rng.standard_normal((1, 3)), (8, 1))
    fit = float(np.sum((g.degrees + 1.0)[:, None] * (Xbar - X) ** 2))
    assert objective_value(g, X, Xbar, 3.0, 0.0) == pytest.approx(fit, rel=1e-14)


def test_objective_brute_force(rng):
    for _ in range(10):
        g = random_graph(rng, 6, 0.4)
        X = rng.standard_normal((6, 2))
        Xbar = rng.standard_normal((6, 2))
        for alpha, beta in [(0.0, 0.0), (2.0, 0.0), (1.5, 0.1)]:
            assert abs(objective_value(g, X, Xbar, alpha, beta) - brute_objective(g, X, Xbar, alpha, beta)) <= 1e-10


def test_case1_minimizer(rng):
    for _ in range(5):
        g = random_graph(rng, 20, 0.2)
        X = rng.standard_normal((20, 3))
        alpha = 3.0
        Xbar = closed_form_dense(g, PropagationConfig("case1", "rw", alpha=alpha), X)
        best = objective_value(g, X, Xbar, alpha, 0.0)
        scale = 1e-2 * np.linalg.norm(Xbar)
        for _ in range(50):
            eps = rng.standard_normal(Xbar.shape)
            eps *= scale / np.linalg.norm(eps)
            assert best <= objective_value(g, X, Xbar + eps, alpha, 0.0)


@pytest.mark.parametrize("kind", ["sym", "rw"])
@pytest.mark.parametrize("kernel", ["case1", "case2"])
def test_stationarity(kind, kernel, rng):
    for _ in range(5):
        n = int(rng.integers(3, 51))
        g = random_graph(rng, n, 0.15)
        cfg = case2(2.0, n, 0.9, kind) if kernel == "case2" else PropagationConfig("case1", kind, alpha=2.0)
        X = rng.standard_normal((n, 3))
        Xbar = closed_form_dense(g, cfg, X)
        assert np.linalg.norm(normal_equation_residual(g, cfg, X, Xbar)) <= 1e-8


def test_residual_detects_wrong_solution(rng):
    g = random_graph(rng, 20, 0.2)
    cfg = PropagationConfig("case1", "rw", alpha=2.0)
    X = rng.standard_normal((20, 2))
    assert np.linalg.norm(normal_equation_residual(g, cfg, X, X)) > 1e-3


def test_operator_is_parameter_free(rng):
    g = random_graph(rng, 10, 0.3)
    op = PropagationOperator(g, case2(1.0, 10))
    arrays = [v for v in vars(op).values() if isinstance(v, np.ndarray)]
    assert all(not a.flags.writeable for a in arrays)
