import numpy as np
import pytest
import scipy.sparse as sp

from graphflow import autodiff as ad
from graphflow.autodiff import Tensor
from graphflow.gcn import GcnParams, aggregate_step, gcn_forward, predict
from graphflow.graph import SparseGraph
from graphflow.oracles import random_instance
from graphflow.propagation import normalized_adjacency

from util import numeric_grad, rel_err


def identity_params(n, k):
    return GcnParams([Tensor(np.eye(n), requires_grad=True) for _ in range(k)])


def test_one_layer_is_average_times_weight():
    g = SparseGraph.from_edges(2, [(0, 1)])
    op = normalized_adjacency(g)
    x = np.array([[0.0, 4.0], [2.0, 0.0]])
    w = Tensor(np.array([[1.0, 0.0], [0.0, 2.0]]))
    out = gcn_forward(op, x, GcnParams([w]))
    np.testing.assert_allclose(out.data, [[1.0, 4.0], [1.0, 4.0]])


def test_sparse_and_dense_features_agree():
    rng = np.random.default_rng(0)
    graph, weights = random_instance(rng)
    n = graph.n_nodes
    op = normalized_adjacency(graph, weights)
    dense = rng.uniform(0, 1, (n, 4))
    dense[rng.random((n, 4)) < 0.5] = 0.0
    params = GcnParams([
        Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(3, 2)))])
    a = gcn_forward(op, dense, params)
    b = gcn_forward(op, sp.csr_matrix(dense), params)
    np.testing.assert_allclose(a.data, b.data, atol=1e-12)


def test_hidden_layers_shapes_and_relu():
    rng = np.random.default_rng(1)
    graph, _ = random_instance(rng)
    n = graph.n_nodes
    op = normalized_adjacency(graph)
    params = GcnParams([
        Tensor(rng.normal(size=(3, 5))),
        Tensor(rng.normal(size=(5, 5))),
        Tensor(rng.normal(size=(5, 2)))])
    logits, hidden = gcn_forward(op, rng.normal(size=(n, 3)), params,
                                 return_hidden=True)
    assert [h.data.shape for h in hidden] == [(n, 5), (n, 5), (n, 2)]
    assert np.all(hidden[0].data >= 0)  # post-relu
    assert np.all(hidden[1].data >= 0)
    np.testing.assert_array_equal(hidden[-1].data, logits.data)


def test_end_to_end_gradient():
    rng = np.random.default_rng(2)
    graph, _ = random_instance(rng, n_max=8)
    n = graph.n_nodes
    x = rng.normal(size=(n, 3))
    labels = rng.integers(0, 2, n)
    mask = np.ones(n, bool)
    w0 = Tensor(rng.normal(size=(3, 4)) * 0.5, requires_grad=True)
    w1 = Tensor(rng.normal(size=(4, 2)) * 0.5, requires_grad=True)
    ew = Tensor(rng.uniform(0.5, 2.0, graph.n_undirected_edges),
                requires_grad=True)

    def loss():
        op = normalized_adjacency(graph, ew)
        logits = gcn_forward(op, x, GcnParams([w0, w1]))
        return ad.masked_softmax_cross_entropy(logits, labels, mask)

    loss().backward()
    for p in (w0, w1, ew):
        num = numeric_grad(lambda: loss().data, p)
        assert rel_err(p.grad, num) <= 1e-4


def test_dropout_only_in_training():
    rng = np.random.default_rng(3)
    graph, _ = random_instance(rng)
    n = graph.n_nodes
    op = normalized_adjacency(graph)
    x = rng.normal(size=(n, 3))
    params = GcnParams([Tensor(rng.normal(size=(3, 2)))])
    a = gcn_forward(op, x, params, dropout_rate=0.5, training=False)
    b = gcn_forward(op, x, params, dropout_rate=0.0, training=True,
                    rng=np.random.default_rng(0))
    np.testing.assert_allclose(a.data, b.data)
    c = gcn_forward(op, x, params, dropout_rate=0.5, training=True,
                    rng=np.random.default_rng(0))
    assert not np.allclose(a.data, c.data)
    with pytest.raises(ValueError):
        gcn_forward(op, x, params, dropout_rate=0.5, training=True)


def test_permutation_equivariance():
    rng = np.random.default_rng(4)
    n = 7
    pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (2, 5)]
    x = rng.normal(size=(n, 3))
    params = GcnParams([Tensor(rng.normal(size=(3, 4))),
                        Tensor(rng.normal(size=(4, 2)))])
    perm = rng.permutation(n)
    g = SparseGraph.from_edges(n, pairs)
    gp = SparseGraph.from_edges(n, [(perm[u], perm[v]) for u, v in pairs])
    # relabeling nodes and permuting feature rows the same way permutes outputs
    out = gcn_forward(normalized_adjacency(g), x, params)
    out_p = gcn_forward(normalized_adjacency(gp), x[np.argsort(perm)], params)
    np.testing.assert_allclose(out.data, out_p.data[perm], atol=1e-12)


def test_predict_ties_and_nan():
    assert list(predict(np.array([[1.0, 1.0], [0.0, 3.0]]))) == [0, 1]
    with pytest.raises(ValueError):
        predict(np.array([[np.nan, 1.0]]))


def test_aggregate_step_matches_operator():
    rng = np.random.default_rng(5)
    graph, weights = random_instance(rng)
    op = normalized_adjacency(graph, weights)
    x = rng.normal(size=(graph.n_nodes, 2))
    np.testing.assert_allclose(aggregate_step(op, Tensor(x)).data,
                               op.to_dense() @ x, atol=1e-12)


def test_requires_at_least_one_layer():
    g = SparseGraph.from_edges(2, [(0, 1)])
    with pytest.raises(ValueError):
        gcn_forward(normalized_adjacency(g), np.ones((2, 1)), GcnParams([]))
