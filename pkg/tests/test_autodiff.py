import numpy as np
import pytest
import scipy.sparse as sp

from graphflow import autodiff as ad
from graphflow.autodiff import Tensor
from graphflow.graph import SparseGraph
from graphflow.oracles import random_instance
from graphflow.propagation import normalized_adjacency, spmm

from util import check_grad, numeric_grad, rel_err


def test_matmul_values():
    m = np.arange(9.0).reshape(3, 3)
    np.testing.assert_allclose(ad.matmul(Tensor(np.eye(3)), Tensor(m)).data, m)
    out = ad.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
    assert out.data[0, 0] == 11.0
    with pytest.raises(ValueError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_gradient():
    rng = np.random.default_rng(0)
    a = Tensor(rng.uniform(-1, 1, (4, 3)), requires_grad=True)
    b = Tensor(rng.uniform(-1, 1, (3, 2)), requires_grad=True)
    check_grad(lambda: ad.sum_squares(ad.matmul(a, b)), [a, b], tol=1e-6)


def test_spmm_identity_and_averaging():
    lonely = SparseGraph.from_edges(3, [])
    op = normalized_adjacency(lonely)
    x = Tensor(np.arange(6.0).reshape(3, 2))
    np.testing.assert_allclose(spmm(op, x).data, x.data)

    two = SparseGraph.from_edges(2, [(0, 1)])
    out = spmm(normalized_adjacency(two), Tensor([[0.0], [2.0]]))
    np.testing.assert_allclose(out.data, [[1.0], [1.0]])


def test_spmm_edge_weight_gradient():
    rng = np.random.default_rng(1)
    graph, _ = random_instance(rng, n_max=5)
    w = Tensor(rng.uniform(0.5, 2.0, graph.n_undirected_edges), requires_grad=True)
    x = Tensor(rng.uniform(-1, 1, (graph.n_nodes, 3)), requires_grad=True)
    target = rng.uniform(-1, 1, (graph.n_nodes, 3))

    def loss():
        y = spmm(normalized_adjacency(graph, w), x)
        return ad.sum_squares(ad.add(y, Tensor(-target)))

    loss().backward()
    num_w = numeric_grad(lambda: loss().data, w)
    assert rel_err(w.grad, num_w) <= 1e-5
    num_x = numeric_grad(lambda: loss().data, x)
    assert rel_err(x.grad, num_x) <= 1e-5


def test_spmm_preserves_constant_columns():
    rng = np.random.default_rng(2)
    graph, weights = random_instance(rng)
    x = Tensor(np.full((graph.n_nodes, 2), 3.7))
    out = spmm(normalized_adjacency(graph, weights), x)
    np.testing.assert_allclose(out.data, 3.7, atol=1e-12)


def test_elementwise_ops():
    np.testing.assert_allclose(
        ad.relu(Tensor([[-1.0, 0.0, 2.0]])).data, [[0.0, 0.0, 2.0]])
    assert ad.softplus(Tensor([[0.0]])).data[0, 0] == pytest.approx(np.log(2))
    assert abs(ad.softplus(Tensor([[40.0]])).data[0, 0] - 40.0) < 1e-12
    out = ad.add(Tensor([[1.0]]), Tensor([[2.0]]))
    assert out.data[0, 0] == 3.0
    assert ad.scale(Tensor([[2.0]]), 2.5).data[0, 0] == 5.0


def test_relu_softplus_gradients():
    rng = np.random.default_rng(3)
    x = Tensor(rng.uniform(-1, 1, (4, 3)) + 0.01, requires_grad=True)
    check_grad(lambda: ad.sum_squares(ad.relu(x)), [x], tol=1e-5)
    check_grad(lambda: ad.sum_squares(ad.softplus(x)), [x], tol=1e-6)


def test_masked_cross_entropy_values():
    logits = Tensor([[0.0, 0.0]])
    loss = ad.masked_softmax_cross_entropy(logits, [0], [True])
    assert float(loss.data) == pytest.approx(np.log(2))
    loss = ad.masked_softmax_cross_entropy(Tensor([[10.0, -10.0]]), [0], [True])
    assert float(loss.data) == pytest.approx(np.log1p(np.exp(-20.0)), rel=1e-6)
    with pytest.raises(ValueError):
        ad.masked_softmax_cross_entropy(logits, [0], [False])


def test_masked_cross_entropy_gradient_and_shift_invariance():
    rng = np.random.default_rng(4)
    logits = Tensor(rng.uniform(-1, 1, (5, 3)), requires_grad=True)
    labels = rng.integers(0, 3, 5)
    mask = np.array([True, False, True, True, False])
    check_grad(lambda: ad.masked_softmax_cross_entropy(logits, labels, mask),
               [logits], tol=1e-6)
    shifted = Tensor(logits.data + rng.uniform(-5, 5, (5, 1)))
    a = ad.masked_softmax_cross_entropy(logits, labels, mask)
    b = ad.masked_softmax_cross_entropy(shifted, labels, mask)
    assert abs(float(a.data) - float(b.data)) <= 1e-10


def test_renorm_cross_entropy():
    # all mass on the true class -> loss ~ 0; zero row -> uniform ln c
    soft = Tensor([[2.0, 0.0], [0.0, 0.0]])
    loss = ad.renorm_cross_entropy(soft, [0, 1], [True, False])
    assert float(loss.data) == pytest.approx(0.0, abs=1e-11)
    loss = ad.renorm_cross_entropy(soft, [0, 1], [False, True])
    assert float(loss.data) == pytest.approx(np.log(2))
    rng = np.random.default_rng(5)
    y = Tensor(rng.uniform(0.1, 1.0, (4, 3)), requires_grad=True)
    labels = rng.integers(0, 3, 4)
    check_grad(lambda: ad.renorm_cross_entropy(y, labels, np.ones(4, bool)),
               [y], tol=1e-6)


def test_dropout():
    rng = np.random.default_rng(6)
    x = Tensor(np.ones((300, 350)))
    assert ad.dropout(x, 0.0, True, rng) is x
    assert ad.dropout(x, 0.5, False, rng) is x
    out = ad.dropout(x, 0.5, True, rng)
    survivors = (out.data != 0).mean()
    assert abs(survivors - 0.5) <= 0.01
    assert abs(out.data.mean() - 1.0) <= 0.02
    with pytest.raises(ValueError):
        ad.dropout(x, 1.0, True, rng)


def test_sparse_dropout_matches_semantics():
    rng = np.random.default_rng(7)
    x = sp.random(200, 200, density=0.3, format="csr", random_state=5)
    x.data[:] = 1.0
    out = ad.sparse_dropout(x, 0.5, True, rng)
    assert out.shape == x.shape
    kept = out.data[out.data != 0]
    np.testing.assert_allclose(kept, 2.0)  # survivors scaled by 1/(1-rate)
    assert abs(out.sum() / x.sum() - 1.0) < 0.05
    assert ad.sparse_dropout(x, 0.5, False, rng) is x


def test_backward_accumulation_and_shapes():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    loss = ad.sum_squares(w)
    loss.backward()
    np.testing.assert_allclose(w.grad, 2 * np.ones((2, 2)))
    ad.sum_squares(w).backward()  # accumulates without reset
    np.testing.assert_allclose(w.grad, 4 * np.ones((2, 2)))

    zero_loss = ad.scale(ad.sum_squares(w), 0.0)
    w.zero_grad()
    zero_loss.backward()
    np.testing.assert_allclose(w.grad, 0.0)

    with pytest.raises(ValueError, match="scalar"):
        ad.relu(w).backward()


def test_sparse_matmul_gradient():
    rng = np.random.default_rng(8)
    xs = sp.random(5, 4, density=0.5, format="csr", random_state=3)
    w = Tensor(rng.uniform(-1, 1, (4, 2)), requires_grad=True)
    check_grad(lambda: ad.sum_squares(ad.sparse_matmul(xs, w)), [w], tol=1e-6)


def test_edge_bilinear_gradient():
    rng = np.random.default_rng(9)
    feats = rng.uniform(-1, 1, (6, 3))
    u = np.array([0, 1, 2, 3])
    v = np.array([1, 2, 4, 3])
    h = Tensor(rng.uniform(-1, 1, (3, 3)), requires_grad=True)
    check_grad(
        lambda: ad.sum_squares(ad.softplus(ad.edge_bilinear(h, feats, u, v))),
        [h], tol=1e-6)
